#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "kgcn/dataset.hpp"
#include "kgcn/experiments.hpp"
#include "kgcn/models.hpp"
#include "kgcn/training.hpp"

namespace kgcn {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// --------------------------------------------------------- dataset container
//
//   meta.json     name, n_nodes, n_features, n_classes, n_edges,
//                 features_normalized, optional split {train, val, test}
//   edges.bin     u32 LE pairs (u, v), u < v, each undirected edge once
//   features.bin  f64 LE, row-major n_nodes × n_features
//   labels.bin    u16 LE, one per node

void write_container(const GraphDataset& data, const fs::path& dir);

/// Validates sizes against meta.json; BadContainer on any mismatch,
/// MissingDataset when the directory or a file is absent.
GraphDataset read_container(const fs::path& dir);

/// A directory containing meta.json is used as is; otherwise the name is
/// looked up under `root`, then under $KGCN_DATA.
fs::path resolve_dataset(const std::string& name_or_path, const std::optional<fs::path>& root);

// ---------------------------------------------------------------- run config

struct RunConfig {
  std::string experiment = "train";  // train | rank | spectrum | bench
  std::string dataset;
  std::optional<fs::path> dataset_dir;
  std::string preset = "truncated_krylov";
  SplitMode split_mode = SplitMode::public_split;
  double split_percent = 0.0;
  bool reference_hyperparams = false;  // take lr, wd, … from the published row
  Hyperparams hp;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  bool deterministic = false;
  fs::path out_dir = "results";
  bool dump_embeddings = false;
  RankExperimentConfig rank;
  std::size_t lanczos_iters = 2000;
  std::vector<BenchCell> bench_cells;
};

/// Strict: unknown keys and out-of-range values throw BadConfig naming the key.
RunConfig parse_run_config(const json& j);
RunConfig load_run_config(const fs::path& path);

/// Copies the published lr, weight_decay, hidden, layers/n_blocks, dropout
/// and optimizer into `hp`; BadConfig when no row matches.
void apply_reference(Hyperparams& hp, std::string_view preset, std::string_view dataset,
                     SplitMode mode, double percent);

SplitMode parse_split_mode(std::string_view name);
std::string_view to_string(SplitMode mode);

// ---------------------------------------------------------------- checkpoint
//
// "KGCNCKPT" | u64 LE header length | JSON header | f64 LE tensor data, in
// ModelParams::tensors() order, each row-major.

struct Checkpoint {
  ModelSpec spec;
  ModelParams params;
  std::uint64_t seed = 0;
};

void write_checkpoint(const fs::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const fs::path& path);

json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const json& j);

// ------------------------------------------------------------------- outputs

/// Shortest representation that reads back to the same double.
std::string format_double(double v);

json hyperparams_to_json(const Hyperparams& hp);
/// wall_seconds is left out when `deterministic`.
json report_to_json(const TrainReport& report, const Hyperparams& hp, std::uint64_t seed,
                    bool deterministic);

inline constexpr const char* kResultsCsvHeader = "dataset,arch,split,mean,std,runs,diverged,seeds";
/// Appends one summary row, writing the header first for a new file.
void append_results_csv(const fs::path& path, const TrainReport& report);

void write_rank_trace_csv(const fs::path& path, const RankTrace& trace);
/// Every repetition's per-layer ranks, so the summary can be recomputed.
void write_rank_reps_csv(const fs::path& path, const RankTrace& trace);
void write_spectrum_csv(const fs::path& path, const SpectrumSummary& summary);
void write_eigenvalues_csv(const fs::path& path, const SpectrumSummary& summary);
void write_bench_csv(const fs::path& path, const std::vector<BenchResult>& results);
/// node, label, then one column per feature.
void write_embeddings_csv(const fs::path& path, const DenseMatrix& features,
                          const std::vector<std::uint16_t>& labels);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

/// {"error": {"code": …, "message": …}}
std::string error_json(const std::string& code, const std::string& message);

}  // namespace kgcn

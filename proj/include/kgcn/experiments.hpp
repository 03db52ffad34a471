#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgcn/dataset.hpp"
#include "kgcn/models.hpp"
#include "kgcn/training.hpp"

namespace kgcn {

// ---------------------------------------------------------------- reference

/// One row of the published hyperparameter tables.
struct ReferenceRow {
  const char* preset;   // linear_snowball | snowball | truncated_krylov
  const char* dataset;  // cora | citeseer | pubmed
  SplitMode mode;
  double percent;       // labeled fraction, e.g. 0.052 for the Cora public split
  double accuracy;      // published mean accuracy, in percent
  double sota;          // best competing method at publication time
  double lr;
  double weight_decay;
  std::size_t hidden;
  std::size_t layers_or_blocks;
  double dropout;
  OptimizerKind optimizer;
};

std::span<const ReferenceRow> reference_rows();

/// Matches on preset, dataset, mode and percent (to 1e-9; ignored for the
/// public split, which has one row per dataset).
std::optional<ReferenceRow> find_reference(std::string_view preset, std::string_view dataset,
                                           SplitMode mode, double percent);

/// Hyperparams for a row, other fields left at their defaults.
Hyperparams to_hyperparams(const ReferenceRow& row, std::size_t width_cap = 0);

// --------------------------------------------------------------- rank traces

struct RankExperimentConfig {
  Architecture arch = Architecture::vanilla_gcn;
  Activation act = Activation::relu;
  std::size_t depth = 100;
  std::size_t reps = 20;
  std::size_t n_nodes = 1000;
  double edge_prob = 0.01;
  std::size_t n_features = 500;
  std::size_t width = 128;
  std::size_t n_blocks = 3;      // truncated Krylov only
  std::optional<double> tol;     // absolute rank tolerance; empty = default
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

struct RankTrace {
  RankExperimentConfig config;
  std::vector<std::uint64_t> seeds;                // one per repetition
  std::vector<std::vector<std::size_t>> ranks;     // [rep][layer], layer 0 = H_1
  std::vector<double> mean;                        // per layer
  std::vector<double> std;                         // per layer, population
  std::string feature_normalization = "row_sum";
};

/// Forward-only simulation on fresh G(n, p) graphs with Gaussian features and
/// N(0,1) weights, recording the numerical rank of every hidden block.
RankTrace rank_experiment(const RankExperimentConfig& config);

/// Ranks of H_1..H_depth for one repetition.
std::vector<std::size_t> rank_trace_once(const RankExperimentConfig& config, std::uint64_t seed);

// ------------------------------------------------------------------ spectrum

inline constexpr std::size_t kHistogramBins = 100;

struct SpectrumSummary {
  std::string dataset;
  std::size_t n_nodes = 0;
  std::string method;               // dense_full | lanczos
  std::vector<double> eigenvalues;  // ascending (Ritz values for lanczos)
  std::vector<std::size_t> histogram;  // kHistogramBins uniform bins over [-1, 1]
  std::size_t outside_range = 0;    // eigenvalues not in (-1, 1 + 1e-8]
  std::size_t unit_multiplicity = 0;  // |λ − 1| < 1e-8
  std::size_t components = 0;
};

/// Dense eigensolver up to kDenseSpectrumLimit nodes, Lanczos beyond.
SpectrumSummary spectrum_experiment(const Graph& graph, const std::string& name,
                                    std::size_t lanczos_iters = 2000, std::uint64_t seed = 0);

std::vector<std::size_t> histogram(std::span<const double> values, double lo, double hi,
                                   std::size_t bins);

// ---------------------------------------------------------- property suites

struct SuiteResult {
  std::string name;
  bool passed = false;
  double value = 0.0;        // headline measurement
  std::string detail;
  double seconds = 0.0;
};

/// Central differences (h = 1e-5) against backward() on a random 12-node
/// graph, F = 5, hidden 7, 2 layers, m = 3, cross-entropy over all nodes.
/// value = max over entries of |a − n| / max(|a|, |n|, kGradCheckFloor).
inline constexpr double kGradCheckFloor = 1e-7;
SuiteResult gradient_check_suite(Architecture arch, std::uint64_t seed = 1);

/// Collapsed linear snowball vs direct forward on random instances.
SuiteResult equivalence_suite(std::size_t instances = 50, std::uint64_t seed = 2);

/// Dependent pairs x = c·y: tanh restores rank 2, ReLU with c > 0 keeps rank 1.
struct DependentPairStats {
  std::size_t trials = 0;
  std::size_t tanh_rank2 = 0;
  std::size_t relu_positive_trials = 0;
  std::size_t relu_positive_rank1 = 0;
  std::size_t relu_negative_trials = 0;
  std::size_t relu_negative_rank2 = 0;
};
DependentPairStats dependent_pairs(std::size_t trials = 1000, std::size_t length = 100,
                                   std::uint64_t seed = 3);

/// Graphs with k ∈ {1,2,3} components: rank of (L/λmax)^500·X is at most k
/// and eigenvalue 1 has multiplicity k.
SuiteResult component_rank_suite(std::size_t graphs = 20, std::uint64_t seed = 4);

// --------------------------------------------------------------------- bench

struct BenchCell {
  std::string dataset;
  std::string preset;
  SplitMode mode = SplitMode::public_split;
  double percent = 0.0;
  Hyperparams hp;
  std::optional<double> reference;  // published accuracy in percent
};

struct BenchResult {
  BenchCell cell;
  std::optional<TrainReport> report;
  std::string error;  // set when the cell could not run
};

/// Runs every cell whose dataset is present in `datasets`; the others are
/// reported with a MissingDataset error.
std::vector<BenchResult> benchmark_grid(const std::map<std::string, GraphDataset>& datasets,
                                        std::span<const BenchCell> cells, std::size_t jobs = 1);

}  // namespace kgcn

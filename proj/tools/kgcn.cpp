// kgcn — training, rank traces, spectra and self-checks for Krylov GCNs.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "kgcn/error.hpp"
#include "kgcn/experiments.hpp"
#include "kgcn/io.hpp"

using namespace kgcn;

namespace {

struct Globals {
  std::string config;
  std::string dataset_dir;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  bool deterministic = false;
  bool dump_embeddings = false;
};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

// Config file first, then command-line overrides.
RunConfig base_config(const Globals& g, const std::string& experiment) {
  RunConfig c = g.config.empty() ? RunConfig{} : load_run_config(g.config);
  if (g.config.empty()) c.experiment = experiment;
  if (!g.dataset_dir.empty()) c.dataset_dir = g.dataset_dir;
  if (!g.out.empty()) c.out_dir = g.out;
  if (g.seed) {
    c.seed = *g.seed;
    c.hp.seed = *g.seed;
    c.rank.seed = *g.seed;
    for (auto& cell : c.bench_cells) cell.hp.seed = *g.seed;
  }
  if (g.jobs) {
    if (*g.jobs == 0) fail(ErrorCode::BadConfig, "--jobs must be positive");
    c.jobs = *g.jobs;
    c.rank.jobs = *g.jobs;
  }
  c.deterministic = c.deterministic || g.deterministic;
  c.dump_embeddings = c.dump_embeddings || g.dump_embeddings;
  return c;
}

GraphDataset load_dataset(const RunConfig& c) {
  if (c.dataset.empty()) fail(ErrorCode::BadConfig, "no dataset given (config 'dataset' or --dataset)");
  return read_container(resolve_dataset(c.dataset, c.dataset_dir));
}

// ------------------------------------------------------------------- train

struct TrainFlags {
  std::string dataset, preset, split;
  std::optional<double> percent;
  bool reference = false;
  std::optional<std::size_t> runs, max_episodes;
};

int cmd_train(const Globals& g, const TrainFlags& f) {
  RunConfig c = base_config(g, "train");
  if (c.experiment != "train") fail(ErrorCode::BadConfig, "config experiment is '" + c.experiment + "', expected train");
  if (!f.dataset.empty()) c.dataset = f.dataset;
  if (!f.preset.empty()) c.preset = f.preset;
  if (!f.split.empty()) c.split_mode = parse_split_mode(f.split);
  if (f.percent) c.split_percent = *f.percent;
  if (f.reference) c.reference_hyperparams = true;
  if (c.split_mode != SplitMode::public_split && !(c.split_percent > 0.0 && c.split_percent <= 1.0)) {
    fail(ErrorCode::BadConfig, "split percent must lie in (0, 1]");
  }
  const GraphDataset data = load_dataset(c);
  if (c.reference_hyperparams) {
    apply_reference(c.hp, c.preset, lower(data.name), c.split_mode, c.split_percent);
  }
  if (f.runs) c.hp.runs = *f.runs;
  if (f.max_episodes) c.hp.max_episodes = *f.max_episodes;
  for (const auto& w : range_warnings(c.hp)) std::cerr << "warning: " << w << "\n";

  TrainOptions opt;
  opt.preset = c.preset;
  opt.split_mode = c.split_mode;
  opt.split_percent = c.split_percent;
  opt.jobs = c.jobs;
  ModelParams first;
  opt.first_run_params = &first;
  opt.on_run = [](std::size_t i, const RunResult& r) {
    std::fprintf(stderr, "run %zu seed %llu: test %.4f after %zu episodes%s\n", i,
                 static_cast<unsigned long long>(r.seed), r.test_accuracy, r.episodes,
                 r.diverged ? " (diverged)" : "");
  };
  const TrainReport report = train(data, c.hp, opt);

  fs::create_directories(c.out_dir);
  write_text(c.out_dir / "report.json", report_to_json(report, c.hp, c.seed, c.deterministic).dump(2) + "\n");
  append_results_csv(c.out_dir / "results.csv", report);
  const ModelSpec spec = preset_spec(c.preset, data.features.cols(), data.n_classes, c.hp);
  if (!first.tensors().empty()) {
    write_checkpoint(c.out_dir / "model.ckpt", Checkpoint{spec, first, run_seed(c.seed, 0)});
    if (c.dump_embeddings) {
      const SparseMatrix op = diffusion(data.graph, DiffusionKind::renormalized_adjacency).matrix;
      const ForwardTape tape = forward(op, data.features, first, spec);
      write_embeddings_csv(c.out_dir / "embeddings.csv", tape.hidden.back().to_dense(), data.labels);
    }
  }
  std::printf("%s %s %s: %.4f ± %.4f over %zu runs\n", report.dataset.c_str(), report.arch.c_str(),
              report.split.c_str(), report.mean, report.std, report.accuracies.size());
  return 0;
}

// ---------------------------------------------------------------- rank-exp

struct RankFlags {
  std::string arch, activation;
  std::optional<std::size_t> depth, reps;
  std::optional<double> tol;
};

int cmd_rank(const Globals& g, const RankFlags& f) {
  RunConfig c = base_config(g, "rank");
  if (!f.arch.empty()) c.rank.arch = parse_architecture(f.arch);
  if (!f.activation.empty()) c.rank.act = parse_activation(f.activation);
  if (f.depth) c.rank.depth = *f.depth;
  if (f.reps) c.rank.reps = *f.reps;
  if (f.tol) c.rank.tol = *f.tol;
  if (c.rank.depth == 0 || c.rank.reps == 0) fail(ErrorCode::BadConfig, "depth and reps must be positive");
  const RankTrace trace = rank_experiment(c.rank);
  write_rank_trace_csv(c.out_dir / "rank_trace.csv", trace);
  write_rank_reps_csv(c.out_dir / "rank_reps.csv", trace);
  std::printf("%s/%s: rank %.2f at layer 1, %.2f at layer %zu\n", std::string(to_string(c.rank.arch)).c_str(),
              std::string(to_string(c.rank.act)).c_str(), trace.mean.front(), trace.mean.back(),
              trace.mean.size());
  return 0;
}

// ---------------------------------------------------------------- spectrum

int cmd_spectrum(const Globals& g, const std::string& dataset) {
  RunConfig c = base_config(g, "spectrum");
  if (!dataset.empty()) c.dataset = dataset;
  const GraphDataset data = load_dataset(c);
  const SpectrumSummary s = spectrum_experiment(data.graph, data.name, c.lanczos_iters, c.seed);
  write_spectrum_csv(c.out_dir / "spectrum.csv", s);
  write_eigenvalues_csv(c.out_dir / "eigenvalues.csv", s);
  json j;
  j["dataset"] = s.dataset;
  j["n_nodes"] = s.n_nodes;
  j["method"] = s.method;
  j["seed"] = c.seed;
  j["eigenvalues"] = s.eigenvalues.size();
  j["outside_range"] = s.outside_range;
  j["unit_multiplicity"] = s.unit_multiplicity;
  j["components"] = s.components;
  write_text(c.out_dir / "spectrum.json", j.dump(2) + "\n");
  std::printf("%s: %zu eigenvalues (%s), %zu outside (-1, 1], eigenvalue 1 ×%zu, %zu components\n",
              s.dataset.c_str(), s.eigenvalues.size(), s.method.c_str(), s.outside_range,
              s.unit_multiplicity, s.components);
  return 0;
}

// ------------------------------------------------------------------- bench

int cmd_bench(const Globals& g) {
  if (g.config.empty()) fail(ErrorCode::BadConfig, "bench needs --config with a 'bench' section");
  RunConfig c = base_config(g, "bench");
  if (c.bench_cells.empty()) fail(ErrorCode::BadConfig, "config has no bench cells");
  std::map<std::string, GraphDataset> datasets;
  for (const auto& cell : c.bench_cells) {
    if (datasets.count(cell.dataset)) continue;
    try {
      datasets.emplace(cell.dataset, read_container(resolve_dataset(cell.dataset, c.dataset_dir)));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::MissingDataset) throw;
      std::cerr << "warning: " << e.what() << "\n";
    }
  }
  const auto results = benchmark_grid(datasets, c.bench_cells, c.jobs);
  write_bench_csv(c.out_dir / "bench.csv", results);
  for (const auto& r : results) {
    std::printf("%-10s %-22s %-16s %s\n", r.cell.dataset.c_str(), r.cell.preset.c_str(),
                split_label(r.cell.mode, r.cell.percent).c_str(),
                r.report ? (format_double(r.report->mean)).c_str() : r.error.c_str());
  }
  return 0;
}

// ---------------------------------------------------------------- selftest

int cmd_selftest(const Globals& g) {
  std::vector<SuiteResult> results;
  for (auto arch : {Architecture::vanilla_gcn, Architecture::snowball, Architecture::truncated_krylov}) {
    results.push_back(gradient_check_suite(arch));
  }
  results.push_back(equivalence_suite());
  {
    const DependentPairStats d = dependent_pairs();
    SuiteResult r;
    r.name = "dependent pairs";
    r.value = static_cast<double>(d.tanh_rank2) / static_cast<double>(d.trials);
    r.passed = d.tanh_rank2 * 100 >= d.trials * 99 && d.relu_positive_rank1 == d.relu_positive_trials;
    r.detail = "tanh rank 2 in " + std::to_string(d.tanh_rank2) + "/" + std::to_string(d.trials) +
               ", relu rank 1 in " + std::to_string(d.relu_positive_rank1) + "/" +
               std::to_string(d.relu_positive_trials);
    results.push_back(r);
  }
  results.push_back(component_rank_suite());
  {
    SuiteResult r;
    r.name = "container round trip";
    PlantedPartitionOptions po;
    po.n_nodes = 200;
    const GraphDataset a = planted_partition(po);
    const fs::path dir = fs::temp_directory_path() / ("kgcn_selftest_" + std::to_string(::getpid()));
    write_container(a, dir);
    const GraphDataset b = read_container(dir);
    fs::remove_all(dir);
    const DenseMatrix xa = a.features.to_dense(), xb = b.features.to_dense();
    r.passed = xa.rows() == xb.rows() && xa.cols() == xb.cols() &&
               std::equal(xa.values().begin(), xa.values().end(), xb.values().begin()) &&
               a.labels == b.labels && a.graph.edges == b.graph.edges &&
               a.public_split->train_idx == b.public_split->train_idx;
    r.detail = std::to_string(b.n_nodes()) + " nodes, " + std::to_string(b.graph.n_edges()) + " edges";
    results.push_back(r);
  }
  {
    SuiteResult r;
    r.name = "toy training";
    PlantedPartitionOptions po;
    po.n_nodes = 300;
    po.p_in = 0.04;
    po.p_out = 0.003;
    po.seed = 5;
    const GraphDataset toy = planted_partition(po);
    Hyperparams hp;
    hp.hidden = 32;
    hp.layers_or_blocks = 2;
    hp.lr = 1e-2;
    hp.max_episodes = 200;
    hp.patience = 30;
    hp.runs = 2;
    hp.seed = g.seed.value_or(0);
    TrainOptions opt;
    opt.preset = "linear_snowball";
    const TrainReport rep = train(toy, hp, opt);
    r.value = rep.mean;
    r.passed = rep.mean > 1.0 / 3.0 + 0.15;
    r.detail = "mean test accuracy " + format_double(rep.mean);
    results.push_back(r);
  }
  bool ok = true;
  for (const auto& r : results) {
    ok = ok && r.passed;
    std::printf("%s  %-34s %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
  }
  return ok ? 0 : 1;
}

// ---------------------------------------------------------------- make-toy

int cmd_make_toy(const Globals& g, PlantedPartitionOptions po) {
  if (g.out.empty()) fail(ErrorCode::BadConfig, "make-toy needs --out DIR");
  if (g.seed) po.seed = *g.seed;
  const GraphDataset d = planted_partition(po);
  write_container(d, g.out);
  std::printf("%s: %zu nodes, %zu edges, %zu features, %zu classes\n", d.name.c_str(), d.n_nodes(),
              d.graph.n_edges(), d.features.cols(), d.n_classes);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Krylov-subspace graph convolutional networks"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "JSON run configuration");
  app.add_option("--dataset-dir", g.dataset_dir, "dataset root (default: $KGCN_DATA)");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--seed", g.seed, "base seed");
  app.add_option("--jobs", g.jobs, "worker threads for runs and repetitions");
  app.add_flag("--deterministic", g.deterministic, "omit wall-clock fields from outputs");
  app.add_flag("--dump-embeddings", g.dump_embeddings, "write final hidden features of run 0");

  TrainFlags tf;
  auto* train_cmd = app.add_subcommand("train", "train a preset for several seeds");
  train_cmd->add_option("--dataset", tf.dataset, "container name or path");
  train_cmd->add_option("--preset", tf.preset, "vanilla_gcn | linear_snowball | snowball | truncated_krylov");
  train_cmd->add_option("--split", tf.split, "public | percent | percent_no_validation");
  train_cmd->add_option("--percent", tf.percent, "labeled fraction for percentage splits");
  train_cmd->add_flag("--reference", tf.reference, "use the published hyperparameters");
  train_cmd->add_option("--runs", tf.runs, "number of seeds");
  train_cmd->add_option("--max-episodes", tf.max_episodes, "episode limit per run");

  RankFlags rf;
  auto* rank_cmd = app.add_subcommand("rank-exp", "numerical rank of hidden features vs depth");
  rank_cmd->add_option("--arch", rf.arch, "vanilla_gcn | snowball | truncated_krylov");
  rank_cmd->add_option("--activation", rf.activation, "relu | tanh | identity");
  rank_cmd->add_option("--depth", rf.depth, "layers");
  rank_cmd->add_option("--reps", rf.reps, "repetitions");
  rank_cmd->add_option("--tol", rf.tol, "absolute rank tolerance");

  std::string spectrum_dataset;
  auto* spectrum_cmd = app.add_subcommand("spectrum", "eigenvalues of the renormalized adjacency");
  spectrum_cmd->add_option("--dataset", spectrum_dataset, "container name or path");

  auto* bench_cmd = app.add_subcommand("bench", "train every cell of a grid config");
  auto* selftest_cmd = app.add_subcommand("selftest", "gradient, equivalence and rank property checks");

  PlantedPartitionOptions po;
  auto* toy_cmd = app.add_subcommand("make-toy", "write a planted-partition dataset container");
  toy_cmd->add_option("--nodes", po.n_nodes, "node count");
  toy_cmd->add_option("--classes", po.n_classes, "class count");
  toy_cmd->add_option("--name", po.name, "dataset name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << error_json("BadConfig", e.what()) << "\n";
    return 2;
  }

  try {
    if (*train_cmd) return cmd_train(g, tf);
    if (*rank_cmd) return cmd_rank(g, rf);
    if (*spectrum_cmd) return cmd_spectrum(g, spectrum_dataset);
    if (*bench_cmd) return cmd_bench(g);
    if (*selftest_cmd) return cmd_selftest(g);
    if (*toy_cmd) return cmd_make_toy(g, po);
  } catch (const Error& e) {
    std::cerr << error_json(std::string(to_string(e.code())), e.what()) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << error_json("Internal", e.what()) << "\n";
    return 3;
  }
  return 0;
}

#include "kgcn/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "kgcn/krylov.hpp"

namespace kgcn {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Runs task(i) for i < count on up to `jobs` threads; rethrows the first failure.
template <typename Task>
void parallel_for(std::size_t count, std::size_t jobs, Task&& task) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr error;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        std::size_t i;
        {
          std::lock_guard lock(mu);
          if (next >= count || error) return;
          i = next++;
        }
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

DenseMatrix gaussian(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double sigma = 1.0) {
  std::normal_distribution<double> dist(0.0, sigma);
  DenseMatrix m(rows, cols);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

// Exact power-of-two rescale to max |h| in [1, 2). Only used where every later
// operation is positively homogeneous, so ranks are untouched.
void rescale_pow2(DenseMatrix& h) {
  double mx = 0.0;
  for (double v : h.values()) mx = std::max(mx, std::abs(v));
  if (mx == 0.0 || !std::isfinite(mx)) return;
  const int e = std::ilogb(mx);
  for (double& v : h.values()) v = std::ldexp(v, -e);
}

}  // namespace

// --------------------------------------------------------------- rank traces

std::vector<std::size_t> rank_trace_once(const RankExperimentConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Graph g = erdos_renyi(cfg.n_nodes, cfg.edge_prob, rng());
  const SparseMatrix l = diffusion(g, DiffusionKind::renormalized_adjacency).matrix;
  const DenseMatrix x = row_normalize(gaussian(cfg.n_nodes, cfg.n_features, rng));
  const bool homogeneous = cfg.act != Activation::tanh;

  std::vector<std::size_t> ranks;
  ranks.reserve(cfg.depth);
  std::vector<DenseMatrix> hidden{x};  // snowball keeps every block
  for (std::size_t layer = 0; layer < cfg.depth; ++layer) {
    const DenseMatrix& h = hidden.back();
    DenseMatrix pre;
    switch (cfg.arch) {
      case Architecture::vanilla_gcn: {
        pre = spmm(l, gemm(h, gaussian(h.cols(), cfg.width, rng)));
        break;
      }
      case Architecture::snowball: {
        std::size_t in_width = 0;
        for (const auto& b : hidden) in_width += b.cols();
        const DenseMatrix w = gaussian(in_width, cfg.width, rng);
        DenseMatrix acc(cfg.n_nodes, cfg.width);
        std::size_t off = 0;
        for (const auto& b : hidden) {
          gemm_accumulate(b, w, off, acc);
          off += b.cols();
        }
        pre = spmm(l, acc);
        break;
      }
      case Architecture::truncated_krylov: {
        const std::size_t m = cfg.n_blocks;
        const DenseMatrix w = gaussian(m * h.cols(), cfg.width, rng);
        DenseMatrix acc(cfg.n_nodes, cfg.width);
        gemm_accumulate(h, w, (m - 1) * h.cols(), acc);
        for (std::size_t j = m - 1; j-- > 0;) {
          acc = spmm(l, acc);
          gemm_accumulate(h, w, j * h.cols(), acc);
        }
        pre = std::move(acc);
        break;
      }
    }
    DenseMatrix next = activation(pre, cfg.act);
    if (!next.all_finite()) {
      fail(ErrorCode::NumericalError,
           "rank experiment: hidden features overflowed at layer " + std::to_string(layer + 1));
    }
    // Snowball mixes blocks of different scales, so rescaling would change it.
    if (homogeneous && cfg.arch != Architecture::snowball) rescale_pow2(next);
    ranks.push_back(numerical_rank(next, cfg.tol));
    if (cfg.arch == Architecture::snowball) {
      hidden.push_back(std::move(next));
    } else {
      hidden.back() = std::move(next);
    }
  }
  return ranks;
}

RankTrace rank_experiment(const RankExperimentConfig& cfg) {
  if (cfg.depth == 0 || cfg.reps == 0 || cfg.width == 0 || cfg.n_features == 0) {
    fail(ErrorCode::BadConfig, "rank experiment: depth, reps, width and features must be positive");
  }
  if (cfg.arch == Architecture::truncated_krylov && cfg.n_blocks == 0) {
    fail(ErrorCode::BadConfig, "rank experiment: n_blocks must be positive");
  }
  RankTrace trace;
  trace.config = cfg;
  trace.ranks.resize(cfg.reps);
  for (std::size_t r = 0; r < cfg.reps; ++r) trace.seeds.push_back(run_seed(cfg.seed, r));
  parallel_for(cfg.reps, cfg.jobs,
               [&](std::size_t r) { trace.ranks[r] = rank_trace_once(cfg, trace.seeds[r]); });

  trace.mean.assign(cfg.depth, 0.0);
  trace.std.assign(cfg.depth, 0.0);
  const double reps = static_cast<double>(cfg.reps);
  for (std::size_t l = 0; l < cfg.depth; ++l) {
    double sum = 0.0;
    for (const auto& t : trace.ranks) sum += static_cast<double>(t[l]);
    const double mean = sum / reps;
    double sq = 0.0;
    for (const auto& t : trace.ranks) sq += (static_cast<double>(t[l]) - mean) * (static_cast<double>(t[l]) - mean);
    trace.mean[l] = mean;
    trace.std[l] = std::sqrt(sq / reps);
  }
  return trace;
}

// ------------------------------------------------------------------ spectrum

std::vector<std::size_t> histogram(std::span<const double> values, double lo, double hi,
                                   std::size_t bins) {
  std::vector<std::size_t> counts(bins, 0);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (double v : values) {
    if (v < lo || v > hi) continue;
    auto b = static_cast<std::size_t>((v - lo) / width);
    counts[std::min(b, bins - 1)] += 1;  // right edge closes the last bin
  }
  return counts;
}

SpectrumSummary spectrum_experiment(const Graph& graph, const std::string& name,
                                    std::size_t lanczos_iters, std::uint64_t seed) {
  SpectrumSummary s;
  s.dataset = name;
  s.n_nodes = graph.n_nodes;
  const SparseMatrix l = diffusion(graph, DiffusionKind::renormalized_adjacency).matrix;
  SpectrumOptions opt;
  if (graph.n_nodes <= kDenseSpectrumLimit) {
    s.method = "dense_full";
  } else {
    s.method = "lanczos";
    opt.method = SpectrumMethod::lanczos;
    opt.iters = std::min(lanczos_iters, graph.n_nodes);
    opt.seed = seed;
  }
  s.eigenvalues = spectrum(l, opt);
  // Eigenvalue 1 comes back as 1 + O(ε); fold that rounding into the last bin.
  std::vector<double> clamped(s.eigenvalues);
  for (double& v : clamped) {
    if (v > 1.0 && v <= 1.0 + 1e-8) v = 1.0;
  }
  s.histogram = histogram(clamped, -1.0, 1.0, kHistogramBins);
  for (double v : s.eigenvalues) {
    if (v <= -1.0 || v > 1.0 + 1e-8) ++s.outside_range;
    if (std::abs(v - 1.0) < 1e-8) ++s.unit_multiplicity;
  }
  s.components = connected_components(graph).count;
  return s;
}

// ---------------------------------------------------------- property suites

namespace {

ModelSpec gradcheck_spec(Architecture arch) {
  constexpr std::size_t kF = 5, kHidden = 7, kLayers = 2, kBlocks = 3, kClasses = 3;
  ModelSpec s;
  switch (arch) {
    case Architecture::vanilla_gcn:
      s.arch = arch;
      s.n_features = kF;
      s.hidden.assign(kLayers, kHidden);
      s.f_act = Activation::relu;
      s.n_classes = kClasses;
      break;
    case Architecture::snowball:
      s = snowball_spec(kF, kHidden, kLayers, kClasses);
      s.identity_classifier = false;
      s.classifier_width = kHidden;
      s.g_act = Activation::tanh;
      break;
    case Architecture::truncated_krylov:
      s = truncated_krylov_spec(kF, kHidden, kLayers, kBlocks, kClasses);
      break;
  }
  return s;
}

}  // namespace

SuiteResult gradient_check_suite(Architecture arch, std::uint64_t seed) {
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  constexpr std::size_t kNodes = 12;
  std::vector<Edge> edges;
  {
    // Random graph with a spanning path so that no node is isolated.
    const Graph g = erdos_renyi(kNodes, 0.25, rng());
    edges = g.edges;
    for (std::size_t i = 0; i + 1 < kNodes; ++i) edges.emplace_back(i, i + 1);
  }
  const SparseMatrix l = diffusion(build_graph(edges, kNodes), DiffusionKind::renormalized_adjacency).matrix;
  const ModelSpec spec = gradcheck_spec(arch);
  const DenseMatrix x = gaussian(kNodes, spec.n_features, rng);
  std::vector<std::uint16_t> labels(kNodes);
  for (auto& y : labels) y = static_cast<std::uint16_t>(rng() % spec.n_classes);
  std::vector<std::size_t> all(kNodes);
  std::iota(all.begin(), all.end(), 0);
  ModelParams params = init_params(spec, InitScheme::glorot_uniform, rng());

  auto loss_at = [&](const ModelParams& p) {
    return masked_cross_entropy(forward(l, x, p, spec).logits, labels, all).loss;
  };
  const ForwardTape tape = forward(l, x, params, spec);
  const LossResult loss = masked_cross_entropy(tape.logits, labels, all);
  const ModelParams grads = backward(l, tape, params, spec, loss.grad_logits);

  constexpr double h = 1e-5;
  double worst = 0.0;
  std::size_t entries = 0;
  auto ws = params.tensors();
  const auto gs = grads.tensors();
  for (std::size_t t = 0; t < ws.size(); ++t) {
    for (std::size_t i = 0; i < ws[t]->size(); ++i) {
      double& w = ws[t]->values()[i];
      const double saved = w;
      w = saved + h;
      const double up = loss_at(params);
      w = saved - h;
      const double down = loss_at(params);
      w = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = gs[t]->values()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
      ++entries;
    }
  }
  SuiteResult r;
  r.name = "gradient check (" + std::string(to_string(arch)) + ")";
  r.value = worst;
  r.seconds = seconds_since(start);
  r.passed = worst < 1e-5;
  std::ostringstream os;
  os << entries << " entries, max relative error " << worst;
  r.detail = os.str();
  return r;
}

SuiteResult equivalence_suite(std::size_t instances, std::uint64_t seed) {
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (std::size_t k = 0; k < instances; ++k) {
    const std::size_t n_nodes = 5 + rng() % 46;   // ≤ 50
    const std::size_t depth = rng() % 5;          // ≤ 4
    const std::size_t f = 1 + rng() % 6;
    const std::size_t hidden = 1 + rng() % 8;
    const std::size_t classes = 2 + rng() % 4;
    ModelSpec spec = linear_snowball_spec(f, hidden, depth, classes);
    if (rng() % 2 == 1) {
      spec.identity_classifier = false;
      spec.classifier_width = 1 + rng() % 8;
    }
    spec.p = static_cast<int>(rng() % 2);
    const Graph g = erdos_renyi(n_nodes, 0.1 + 0.3 * std::uniform_real_distribution<double>()(rng), rng());
    const SparseMatrix l = diffusion(g, DiffusionKind::renormalized_adjacency).matrix;
    const DenseMatrix x = gaussian(n_nodes, f, rng);
    const ModelParams params = init_params(spec, InitScheme::normal, rng());

    const DenseMatrix direct = forward(l, x, params, spec).logits;
    const CollapsedSnowball c = collapse_linear_snowball(params, spec, l, x);
    DenseMatrix routed = gemm(gemm(c.krylov, c.w_eq), params.output);
    if (spec.p == 1) routed = spmm(l, routed);
    double scale = 0.0;
    for (double v : direct.values()) scale = std::max(scale, std::abs(v));
    const double dev = max_abs_diff(direct, routed);
    worst = std::max(worst, scale > 0.0 ? dev / scale : dev);
  }
  SuiteResult r;
  r.name = "snowball equivalence";
  r.value = worst;
  r.seconds = seconds_since(start);
  r.passed = worst < 1e-9;
  std::ostringstream os;
  os << instances << " instances, max relative deviation " << worst;
  r.detail = os.str();
  return r;
}

DependentPairStats dependent_pairs(std::size_t trials, std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mag(0.1, 3.0);
  DependentPairStats st;
  st.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    const double c = (rng() % 2 == 0 ? 1.0 : -1.0) * mag(rng);
    const DenseMatrix y = gaussian(length, 1, rng);
    DenseMatrix pair(length, 2);
    for (std::size_t i = 0; i < length; ++i) {
      pair(i, 0) = c * y(i, 0);
      pair(i, 1) = y(i, 0);
    }
    if (numerical_rank(activation(pair, Activation::tanh)) == 2) ++st.tanh_rank2;
    const std::size_t relu_rank = numerical_rank(activation(pair, Activation::relu));
    if (c > 0) {
      ++st.relu_positive_trials;
      if (relu_rank == 1) ++st.relu_positive_rank1;
    } else {
      ++st.relu_negative_trials;
      if (relu_rank == 2) ++st.relu_negative_rank2;
    }
  }
  return st;
}

SuiteResult component_rank_suite(std::size_t graphs, std::uint64_t seed) {
  const auto start = Clock::now();
  std::mt19937_64 rng(seed);
  std::size_t ok = 0;
  std::ostringstream fails;
  for (std::size_t gi = 0; gi < graphs; ++gi) {
    const std::size_t k = 1 + gi % 3;
    std::vector<Edge> edges;
    std::size_t base = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const std::size_t n = 20 + rng() % 41;  // ≤ 60 per component, ≤ 180 total
      const Graph part = erdos_renyi(n, 0.2, rng());
      for (auto [u, v] : part.edges) edges.emplace_back(base + u, base + v);
      for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(base + i, base + i + 1);
      base += n;
    }
    const Graph g = build_graph(edges, base);
    const SparseMatrix l = diffusion(g, DiffusionKind::renormalized_adjacency).matrix;
    const std::vector<double> ev = spectrum(l);
    const double lmax = std::max(std::abs(ev.front()), std::abs(ev.back()));
    std::size_t multiplicity = 0;
    for (double v : ev) multiplicity += std::abs(v - 1.0) < 1e-8 ? 1 : 0;

    // (L/λmax)^500·X, one spmm at a time.
    std::vector<Triplet> scaled;
    const auto ptr = l.row_ptr();
    const auto idx = l.col_idx();
    const auto val = l.values();
    for (std::size_t r = 0; r < l.rows(); ++r)
      for (std::size_t q = ptr[r]; q < ptr[r + 1]; ++q) scaled.push_back({r, idx[q], val[q] / lmax});
    const SparseMatrix ls = SparseMatrix::from_triplets(l.rows(), l.cols(), std::move(scaled));
    DenseMatrix y = gaussian(base, 8, rng);
    for (int step = 0; step < 500; ++step) y = spmm(ls, y);
    const std::size_t rank = numerical_rank(y);

    const bool pass = connected_components(g).count == k && multiplicity == k && rank <= k;
    if (pass) {
      ++ok;
    } else {
      fails << " [graph " << gi << ": k=" << k << " multiplicity=" << multiplicity
            << " rank=" << rank << "]";
    }
  }
  SuiteResult r;
  r.name = "component eigenspace";
  r.value = static_cast<double>(ok);
  r.seconds = seconds_since(start);
  r.passed = ok == graphs;
  std::ostringstream os;
  os << ok << "/" << graphs << " graphs consistent" << fails.str();
  r.detail = os.str();
  return r;
}

// --------------------------------------------------------------------- bench

std::vector<BenchResult> benchmark_grid(const std::map<std::string, GraphDataset>& datasets,
                                        std::span<const BenchCell> cells, std::size_t jobs) {
  std::vector<BenchResult> out(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) out[i].cell = cells[i];
  // Cells run one after another; `jobs` parallelizes the runs inside each.
  for (auto& res : out) {
    const auto it = datasets.find(res.cell.dataset);
    if (it == datasets.end()) {
      res.error = "MissingDataset: " + res.cell.dataset;
      continue;
    }
    TrainOptions opt;
    opt.preset = res.cell.preset;
    opt.split_mode = res.cell.mode;
    opt.split_percent = res.cell.percent;
    opt.jobs = jobs;
    try {
      res.report = train(it->second, res.cell.hp, opt);
    } catch (const Error& e) {
      res.error = std::string(to_string(e.code())) + ": " + e.what();
    }
  }
  return out;
}

}  // namespace kgcn

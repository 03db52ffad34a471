#include <cmath>
#include <numeric>

#include "doctest.h"
#include "kgcn/experiments.hpp"
#include "test_util.hpp"

using namespace kgcn;

namespace {

RankExperimentConfig small_rank(Architecture arch, Activation act) {
  RankExperimentConfig c;
  c.arch = arch;
  c.act = act;
  c.depth = 30;
  c.reps = 3;
  c.n_nodes = 150;
  c.edge_prob = 0.05;
  c.n_features = 60;
  c.width = 24;
  c.seed = 17;
  return c;
}

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("histogram bins") {
  const std::vector<double> v{-1.0, -0.99, 0.0, 0.5, 1.0, 1.5, -2.0};
  const auto h = histogram(v, -1.0, 1.0, 100);
  REQUIRE(h.size() == 100);
  CHECK(h[0] == 2);
  CHECK(h[50] == 1);
  CHECK(h[75] == 1);
  CHECK(h[99] == 1);
  CHECK(std::accumulate(h.begin(), h.end(), std::size_t{0}) == 5);
}

TEST_CASE("spectrum of small graphs") {
  // Triangle: (A + I)/3 is the all-ones matrix over 3, eigenvalues {1, 0, 0}.
  const Graph tri = build_graph(std::vector<Edge>{{0, 1}, {1, 2}, {0, 2}}, 3);
  const SpectrumSummary s = spectrum_experiment(tri, "triangle");
  CHECK(s.method == "dense_full");
  REQUIRE(s.eigenvalues.size() == 3);
  CHECK(s.eigenvalues[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(s.eigenvalues[1]) < 1e-12);
  CHECK(s.eigenvalues[2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.unit_multiplicity == 1);
  CHECK(s.outside_range == 0);
  CHECK(s.components == 1);
  CHECK(s.histogram[50] == 2);
  CHECK(s.histogram[99] == 1);

  std::vector<Edge> edges;
  testutil::connected_block(edges, 0, 40, 0.1, 1);
  testutil::connected_block(edges, 40, 30, 0.1, 2);
  testutil::connected_block(edges, 70, 25, 0.1, 3);
  const SpectrumSummary three = spectrum_experiment(build_graph(edges, 95), "three");
  CHECK(three.components == 3);
  CHECK(three.unit_multiplicity == 3);
  CHECK(three.outside_range == 0);
  CHECK(three.eigenvalues.front() > -1.0);
}

TEST_CASE("rank traces") {
  const auto cfg = small_rank(Architecture::truncated_krylov, Activation::relu);
  const RankTrace t = rank_experiment(cfg);
  REQUIRE(t.ranks.size() == cfg.reps);
  REQUIRE(t.mean.size() == cfg.depth);
  CHECK(t.seeds.size() == cfg.reps);
  // The first hidden block of a wide random layer is full rank.
  for (const auto& r : t.ranks) {
    CHECK(r.size() == cfg.depth);
    CHECK(r.front() == cfg.width);
    for (std::size_t v : r) CHECK(v <= cfg.width);
  }
  // Summary recomputed from the per-repetition ranks.
  for (std::size_t l = 0; l < cfg.depth; ++l) {
    double mean = 0.0;
    for (const auto& r : t.ranks) mean += static_cast<double>(r[l]);
    mean /= static_cast<double>(cfg.reps);
    double var = 0.0;
    for (const auto& r : t.ranks) var += (static_cast<double>(r[l]) - mean) * (static_cast<double>(r[l]) - mean);
    CHECK(t.mean[l] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(t.std[l] == doctest::Approx(std::sqrt(var / static_cast<double>(cfg.reps))).epsilon(1e-12));
  }
  CHECK(rank_trace_once(cfg, t.seeds[1]) == t.ranks[1]);

  auto par = cfg;
  par.jobs = 3;
  CHECK(rank_experiment(par).ranks == t.ranks);
}

TEST_CASE("vanilla rank collapse: tanh keeps rank, relu loses it") {
  const RankTrace relu = rank_experiment(small_rank(Architecture::vanilla_gcn, Activation::relu));
  const RankTrace tanh = rank_experiment(small_rank(Architecture::vanilla_gcn, Activation::tanh));
  const RankTrace lin = rank_experiment(small_rank(Architecture::vanilla_gcn, Activation::identity));
  CHECK(relu.mean.back() < tanh.mean.back());
  for (std::size_t l = 0; l < relu.mean.size(); ++l) CHECK(lin.mean[l] >= relu.mean[l]);
  const double lin_sum = std::accumulate(lin.mean.begin(), lin.mean.end(), 0.0);
  const double relu_sum = std::accumulate(relu.mean.begin(), relu.mean.end(), 0.0);
  CHECK(lin_sum > relu_sum);
}

TEST_CASE("property suites pass") {
  for (auto arch : {Architecture::vanilla_gcn, Architecture::snowball, Architecture::truncated_krylov}) {
    const SuiteResult r = gradient_check_suite(arch, 5);
    CHECK_MESSAGE(r.passed, r.detail);
    CHECK(r.value < 1e-5);
  }
  const SuiteResult eq = equivalence_suite(10, 6);
  CHECK_MESSAGE(eq.passed, eq.detail);
  CHECK(eq.value < 1e-9);

  const DependentPairStats d = dependent_pairs(200, 50, 7);
  CHECK(d.trials == 200);
  CHECK(d.relu_positive_trials + d.relu_negative_trials == 200);
  CHECK(d.relu_positive_rank1 == d.relu_positive_trials);
  CHECK(d.tanh_rank2 >= 198);

  const SuiteResult comp = component_rank_suite(5, 8);
  CHECK_MESSAGE(comp.passed, comp.detail);
}

TEST_CASE("reference table") {
  const auto rows = reference_rows();
  CHECK(rows.size() == 81);
  for (const auto& r : rows) {
    CHECK(r.lr > 0.0);
    CHECK(r.weight_decay >= 0.0);
    CHECK(r.dropout >= 0.0);
    CHECK(r.dropout < 1.0);
    CHECK(r.hidden > 0);
    CHECK(r.layers_or_blocks > 0);
    CHECK(r.accuracy > 0.0);
    CHECK(r.accuracy < 100.0);
  }
  const auto cite = find_reference("truncated_krylov", "citeseer", SplitMode::public_split, 0.0);
  REQUIRE(cite);
  CHECK(cite->lr == 1.8292e-3);
  CHECK(cite->hidden == 600);
  CHECK(cite->layers_or_blocks == 11);

  const auto low = find_reference("truncated_krylov", "cora", SplitMode::percent_no_validation, 0.005);
  REQUIRE(low);
  CHECK(low->lr == 3.3276e-3);
  CHECK(low->hidden == 128);
  CHECK(low->layers_or_blocks == 18);
  CHECK(low->optimizer == OptimizerKind::rmsprop);
  CHECK_FALSE(find_reference("truncated_krylov", "cora", SplitMode::percent_no_validation, 0.007));

  const Hyperparams capped = to_hyperparams(*find_reference("truncated_krylov", "cora", SplitMode::public_split, 0), 1024);
  CHECK(capped.hidden == 1950);
  CHECK(capped.width_cap == 1024);
}

TEST_CASE("bench grid reports missing datasets") {
  PlantedPartitionOptions po;
  po.n_nodes = 200;
  po.seed = 3;
  std::map<std::string, GraphDataset> data{{"toy", planted_partition(po)}};
  BenchCell toy;
  toy.dataset = "toy";
  toy.preset = "linear_snowball";
  toy.hp.hidden = 16;
  toy.hp.runs = 2;
  toy.hp.max_episodes = 40;
  BenchCell cora = toy;
  cora.dataset = "cora";
  const std::vector<BenchCell> cells{toy, cora};
  const auto res = benchmark_grid(data, cells);
  REQUIRE(res.size() == 2);
  REQUIRE(res[0].report.has_value());
  CHECK(res[0].report->runs.size() == 2);
  CHECK_FALSE(res[1].report.has_value());
  CHECK(res[1].error.find("MissingDataset") != std::string::npos);
}

}  // TEST_SUITE

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "kgcn/graph.hpp"
#include "kgcn/krylov.hpp"
#include "kgcn/models.hpp"
#include "test_util.hpp"

using namespace kgcn;
using testutil::random_dense;

namespace {

SparseMatrix renorm(const Graph& g) {
  return diffusion(g, DiffusionKind::renormalized_adjacency).matrix;
}

ModelSpec small_spec(Architecture arch) {
  ModelSpec s;
  switch (arch) {
    case Architecture::vanilla_gcn:
      s.arch = arch;
      s.n_features = 5;
      s.hidden = {7, 7};
      s.f_act = Activation::tanh;
      s.n_classes = 3;
      break;
    case Architecture::snowball:
      s = snowball_spec(5, 7, 2, 3);
      break;
    case Architecture::truncated_krylov:
      s = truncated_krylov_spec(5, 7, 2, 3, 3);
      break;
  }
  return s;
}

// Σ logits ⊙ R, so dLoss/dlogits = R exactly.
double probe_loss(const DenseMatrix& logits, const DenseMatrix& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) s += logits.values()[i] * r.values()[i];
  return s;
}

// Largest |analytic − central difference| / max(|analytic|, |numeric|, 1e-7).
double max_fd_error(const SparseMatrix& op, const FeatureMatrix& x, ModelParams params,
                    const ModelSpec& spec, std::uint64_t dropout_seed) {
  const auto probe = random_dense(x.rows(), spec.n_classes, 77);
  auto run = [&](const ModelParams& p, bool keep_tape, ForwardTape* tape) {
    std::mt19937_64 rng(dropout_seed);
    ForwardTape t = forward(op, x, p, spec, spec.dropout > 0.0 ? &rng : nullptr);
    const double loss = probe_loss(t.logits, probe);
    if (keep_tape) *tape = std::move(t);
    return loss;
  };
  ForwardTape tape;
  run(params, true, &tape);
  const ModelParams grads = backward(op, tape, params, spec, probe);
  const auto gs = grads.tensors();
  auto ws = params.tensors();
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t t = 0; t < ws.size(); ++t) {
    for (std::size_t i = 0; i < ws[t]->size(); ++i) {
      double& w = ws[t]->values()[i];
      const double saved = w;
      w = saved + h;
      const double up = run(params, false, nullptr);
      w = saved - h;
      const double down = run(params, false, nullptr);
      w = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = gs[t]->values()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

std::vector<std::size_t> random_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

}  // namespace

TEST_SUITE("models") {

TEST_CASE("parameter shapes follow the architecture") {
  const auto sb = snowball_spec(5, 7, 3, 4);
  const auto shapes = parameter_shapes(sb);
  REQUIRE(shapes.size() == 4);
  CHECK(shapes[0] == std::pair<std::size_t, std::size_t>{5, 7});
  CHECK(shapes[1] == std::pair<std::size_t, std::size_t>{12, 7});
  CHECK(shapes[2] == std::pair<std::size_t, std::size_t>{19, 7});
  CHECK(shapes[3] == std::pair<std::size_t, std::size_t>{26, 4});

  const auto tk = truncated_krylov_spec(5, 7, 2, 3, 4);
  const auto ts = parameter_shapes(tk);
  REQUIRE(ts.size() == 4);
  CHECK(ts[0] == std::pair<std::size_t, std::size_t>{15, 7});
  CHECK(ts[1] == std::pair<std::size_t, std::size_t>{21, 7});
  CHECK(ts[2] == std::pair<std::size_t, std::size_t>{7, 7});
  CHECK(ts[3] == std::pair<std::size_t, std::size_t>{7, 4});

  ModelParams p = init_params(tk, InitScheme::glorot_uniform, 1);
  CHECK_NOTHROW(check_shapes(tk, p));
  p.layers[1] = DenseMatrix(20, 7);
  CHECK_THROWS_AS(check_shapes(tk, p), Error);
}

TEST_CASE("spec validation") {
  auto s = snowball_spec(5, 7, 2, 3);
  s.p = 2;
  CHECK_THROWS_AS(validate(s), Error);
  s = truncated_krylov_spec(5, 7, 2, 0, 3);
  CHECK_THROWS_AS(validate(s), Error);
  s = snowball_spec(5, 7, 2, 3);
  s.dropout = 1.0;
  CHECK_THROWS_AS(validate(s), Error);
  s = snowball_spec(5, 0, 2, 3);
  CHECK_THROWS_AS(validate(s), Error);
}

TEST_CASE("vanilla forward examples") {
  const Graph g = erdos_renyi(10, 0.3, 1);
  const auto l = renorm(g);
  const auto x = random_dense(10, 4, 2);
  ModelSpec s;
  s.arch = Architecture::vanilla_gcn;
  s.n_features = 4;
  s.hidden = {4};
  s.f_act = Activation::identity;
  s.n_classes = 4;
  ModelParams p;
  p.layers = {DenseMatrix::identity(4)};
  p.output = DenseMatrix::identity(4);
  const auto logits = forward_vanilla(l, x, p, s).logits;
  CHECK(max_abs_diff(logits, spmm(l, spmm(l, x))) < 1e-14);

  CHECK(forward_vanilla(l, DenseMatrix(10, 4), p, s).logits == DenseMatrix(10, 4));

  // Nonnegative weights and features: ReLU never clips.
  p = init_params(s, InitScheme::glorot_uniform, 3);
  for (auto* t : p.tensors())
    for (double& v : t->values()) v = std::abs(v);
  DenseMatrix xp = x;
  for (double& v : xp.values()) v = std::abs(v);
  const auto ident = forward_vanilla(l, xp, p, s).logits;
  s.f_act = Activation::relu;
  CHECK(forward_vanilla(l, xp, p, s).logits == ident);
}

TEST_CASE("snowball with no hidden layers") {
  const auto l = renorm(erdos_renyi(9, 0.4, 5));
  const auto x = random_dense(9, 3, 1);
  ModelSpec s;
  s.arch = Architecture::snowball;
  s.n_features = 3;
  s.g_act = Activation::tanh;
  s.classifier_width = 4;
  s.n_classes = 2;
  for (int p : {0, 1}) {
    s.p = p;
    const auto params = init_params(s, InitScheme::normal, 8);
    DenseMatrix expect = gemm(activation(gemm(x, params.classifier), Activation::tanh), params.output);
    if (p == 1) expect = spmm(l, expect);
    CHECK(max_abs_diff(forward_snowball(l, x, params, s).logits, expect) < 1e-13);
  }
}

TEST_CASE("snowball forward is reproducible") {
  const auto l = renorm(erdos_renyi(15, 0.2, 5));
  const auto x = random_dense(15, 5, 1);
  auto s = snowball_spec(5, 6, 3, 3);
  const auto p = init_params(s, InitScheme::glorot_uniform, 4);
  CHECK(forward(l, x, p, s).logits == forward(l, x, p, s).logits);
  s.dropout = 0.3;
  std::mt19937_64 a(9), b(9);
  CHECK(forward(l, x, p, s, &a).logits == forward(l, x, p, s, &b).logits);
  CHECK(forward(l, x, p, s, &a).logits != forward(l, x, p, s).logits);
}

TEST_CASE("truncated Krylov with one block and p=0 is an MLP") {
  const auto l = renorm(erdos_renyi(12, 0.3, 2));
  const auto x = random_dense(12, 5, 3);
  const auto s = truncated_krylov_spec(5, 6, 2, 1, 3);
  const auto p = init_params(s, InitScheme::glorot_uniform, 5);
  DenseMatrix h = x;
  for (const auto& w : p.layers) h = activation(gemm(h, w), Activation::tanh);
  const auto expect = gemm(activation(gemm(h, p.classifier), Activation::tanh), p.output);
  CHECK(max_abs_diff(forward(l, x, p, s).logits, expect) < 1e-13);
  CHECK(forward(l, DenseMatrix(12, 5), p, s).logits == DenseMatrix(12, 3));
}

TEST_CASE("truncated Krylov layer equals the block Krylov matrix times W") {
  const auto l = renorm(erdos_renyi(12, 0.3, 2));
  const auto x = random_dense(12, 4, 3);
  auto s = truncated_krylov_spec(4, 5, 1, 2, 3);
  s.f_act = Activation::identity;
  const auto p = init_params(s, InitScheme::normal, 6);
  const auto tape = forward(l, x, p, s);
  const auto expect = gemm(block_krylov_matrix(l, x, 2), p.layers[0]);
  CHECK(max_abs_diff(tape.hidden[1].dense(), expect) < 1e-13);

  s.n_blocks = 4;
  const auto p4 = init_params(s, InitScheme::normal, 6);
  CHECK(max_abs_diff(forward(l, x, p4, s).hidden[1].dense(),
                     gemm(block_krylov_matrix(l, x, 4), p4.layers[0])) < 1e-12);
}

TEST_CASE("sparse and dense features give the same model") {
  const auto l = renorm(erdos_renyi(20, 0.2, 2));
  DenseMatrix x(20, 30);
  std::mt19937_64 rng(4);
  for (std::size_t i = 0; i < 40; ++i) x(rng() % 20, rng() % 30) = 1.0;
  const auto fx = FeatureMatrix::choose_storage(x);
  REQUIRE(fx.is_sparse());
  for (Architecture arch : {Architecture::vanilla_gcn, Architecture::snowball,
                            Architecture::truncated_krylov}) {
    auto s = small_spec(arch);
    s.n_features = 30;
    const auto p = init_params(s, InitScheme::glorot_uniform, 1);
    const auto ds = forward(l, x, p, s);
    const auto sp = forward(l, fx, p, s);
    CHECK(max_abs_diff(ds.logits, sp.logits) < 1e-13);
    const auto probe = random_dense(20, 3, 9);
    const auto gd = backward(l, ds, p, s, probe).tensors();
    const auto gsp = backward(l, sp, p, s, probe).tensors();
    for (std::size_t t = 0; t < gd.size(); ++t) CHECK(max_abs_diff(*gd[t], *gsp[t]) < 1e-12);
  }
}

TEST_CASE("analytic gradients match central differences") {
  const Graph g = erdos_renyi(12, 0.3, 42);
  const auto l = renorm(g);
  const auto x = random_dense(12, 5, 43);
  for (Architecture arch : {Architecture::vanilla_gcn, Architecture::snowball,
                            Architecture::truncated_krylov}) {
    CAPTURE(to_string(arch));
    auto s = small_spec(arch);
    const auto p = init_params(s, InitScheme::glorot_uniform, 44);
    CHECK(max_fd_error(l, x, p, s, 0) < 1e-5);

    s.dropout = 0.4;
    CHECK(max_fd_error(l, x, p, s, 45) < 1e-5);

    if (arch != Architecture::vanilla_gcn) {
      s.dropout = 0.0;
      s.p = 1 - s.p;
      CHECK(max_fd_error(l, x, init_params(s, InitScheme::glorot_uniform, 46), s, 0) < 1e-5);
    }
  }
  // Identity classifier and ReLU paths.
  auto ls = linear_snowball_spec(5, 4, 3, 3);
  CHECK(max_fd_error(l, x, init_params(ls, InitScheme::glorot_uniform, 47), ls, 0) < 1e-5);
  auto rs = small_spec(Architecture::truncated_krylov);
  rs.f_act = Activation::relu;
  CHECK(max_fd_error(l, x, init_params(rs, InitScheme::glorot_uniform, 48), rs, 0) < 1e-5);
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
  const auto l = renorm(erdos_renyi(10, 0.3, 1));
  const auto x = random_dense(10, 5, 2);
  for (Architecture arch : {Architecture::vanilla_gcn, Architecture::snowball,
                            Architecture::truncated_krylov}) {
    const auto s = small_spec(arch);
    const auto p = init_params(s, InitScheme::glorot_uniform, 3);
    const auto grads = backward(l, forward(l, x, p, s), p, s, DenseMatrix(10, 3));
    for (const auto* t : grads.tensors())
      for (double v : t->values()) CHECK(v == 0.0);
  }
}

TEST_CASE("linear snowball output gradient is (L C)^T G") {
  const auto l = renorm(erdos_renyi(10, 0.3, 1));
  const auto x = random_dense(10, 4, 2);
  const auto s = linear_snowball_spec(4, 3, 2, 3);
  const auto p = init_params(s, InitScheme::glorot_uniform, 3);
  const auto tape = forward(l, x, p, s);
  std::vector<DenseMatrix> blocks;
  for (const auto& h : tape.hidden) blocks.push_back(h.to_dense());
  const auto c = hconcat(blocks);
  const auto g = random_dense(10, 3, 4);
  const auto grads = backward(l, tape, p, s, g);
  CHECK(max_abs_diff(grads.output, gemm_tn(spmm(l, c), g)) < 1e-12);
}

TEST_CASE("collapse_linear_snowball") {
  SUBCASE("no hidden layers gives the identity") {
    ModelSpec s = linear_snowball_spec(3, 4, 0, 2);
    const auto p = init_params(s, InitScheme::normal, 1);
    const auto l = renorm(erdos_renyi(6, 0.5, 1));
    const auto c = collapse_linear_snowball(p, s, l, random_dense(6, 3, 2));
    CHECK(c.w_eq == DenseMatrix::identity(3));
  }
  SUBCASE("two layers expand to the block-diagonal chain") {
    const std::size_t f = 3, h = 4;
    const auto s = linear_snowball_spec(f, h, 2, 2);
    const auto p = init_params(s, InitScheme::normal, 5);
    const auto l = renorm(erdos_renyi(8, 0.4, 3));
    const auto c = collapse_linear_snowball(p, s, l, random_dense(8, f, 4));
    // H_2 = L X W_1^1 + L^2 X W_0 W_1^2
    const auto w1_top = row_block(p.layers[1], 0, f);
    const auto w1_bottom = row_block(p.layers[1], f, f + h);
    DenseMatrix expect(3 * f, h);
    const auto prod = gemm(p.layers[0], w1_bottom);
    for (std::size_t i = 0; i < f; ++i)
      for (std::size_t j = 0; j < h; ++j) {
        expect(f + i, j) = w1_top(i, j);
        expect(2 * f + i, j) = prod(i, j);
      }
    CHECK(max_abs_diff(col_block(c.hidden, f + h, f + 2 * h), expect) < 1e-14);
  }
  SUBCASE("collapsed route reproduces the direct forward") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      auto s = linear_snowball_spec(4, 3 + seed % 3, 3, 3);
      if (seed % 2 == 1) {
        s.identity_classifier = false;
        s.classifier_width = 5;
        s.p = 0;
      }
      const auto p = init_params(s, InitScheme::normal, seed);
      const auto l = renorm(erdos_renyi(20, 0.2, seed));
      const auto x = random_dense(20, 4, seed + 1);
      const auto c = collapse_linear_snowball(p, s, l, x);
      DenseMatrix routed = gemm(gemm(c.krylov, c.w_eq), p.output);
      if (s.p == 1) routed = spmm(l, routed);
      const auto direct = forward(l, x, p, s).logits;
      double scale = 0.0;
      for (double v : direct.values()) scale = std::max(scale, std::abs(v));
      CHECK(max_abs_diff(routed, direct) / scale < 1e-9);
    }
  }
  SUBCASE("nonlinear models are refused") {
    const auto s = snowball_spec(3, 4, 2, 2);
    const auto p = init_params(s, InitScheme::normal, 1);
    const auto l = renorm(erdos_renyi(6, 0.5, 1));
    try {
      collapse_linear_snowball(p, s, l, random_dense(6, 3, 2));
      FAIL("expected NotLinear");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NotLinear);
    }
  }
}

TEST_CASE("init_params") {
  const auto s = snowball_spec(100, 100, 1, 100);
  const auto a = init_params(s, InitScheme::glorot_uniform, 11);
  const auto b = init_params(s, InitScheme::glorot_uniform, 11);
  CHECK(a.layers == b.layers);
  CHECK(a.output == b.output);
  CHECK(init_params(s, InitScheme::glorot_uniform, 12).layers != a.layers);

  double sum = 0.0, sq = 0.0;
  for (double v : a.layers[0].values()) {
    sum += v;
    sq += v * v;
  }
  const double n = static_cast<double>(a.layers[0].size());
  const double var = sq / n - (sum / n) * (sum / n);
  CHECK(std::abs(var - 2.0 / 200.0) < 0.2 * (2.0 / 200.0));
  const double bound = std::sqrt(6.0 / 200.0);
  for (double v : a.layers[0].values()) CHECK(std::abs(v) <= bound);

  const auto nrm = init_params(s, InitScheme::normal, 3, 1.0);
  sq = 0.0;
  for (double v : nrm.layers[0].values()) sq += v * v;
  CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("node relabeling permutes the logits") {
  const std::size_t n = 16;
  const Graph g = erdos_renyi(n, 0.25, 3);
  const auto perm = random_permutation(n, 4);
  std::vector<Edge> pe;
  for (auto [u, v] : g.edges) pe.emplace_back(perm[u], perm[v]);
  const Graph pg = build_graph(pe, n);
  const auto x = random_dense(n, 5, 6);
  DenseMatrix px(n, 5);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < 5; ++j) px(perm[i], j) = x(i, j);
  for (Architecture arch : {Architecture::vanilla_gcn, Architecture::snowball,
                            Architecture::truncated_krylov}) {
    const auto s = small_spec(arch);
    const auto p = init_params(s, InitScheme::glorot_uniform, 7);
    const auto a = forward(renorm(g), x, p, s).logits;
    const auto b = forward(renorm(pg), px, p, s).logits;
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < 3; ++j) worst = std::max(worst, std::abs(a(i, j) - b(perm[i], j)));
    CHECK(worst < 1e-12);
  }
}

}

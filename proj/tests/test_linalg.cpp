#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "kgcn/graph.hpp"
#include "kgcn/linalg.hpp"
#include "test_util.hpp"

using namespace kgcn;
using testutil::random_dense;

TEST_SUITE("linalg") {

TEST_CASE("from_external rejects non-finite input") {
  CHECK_THROWS_AS(DenseMatrix::from_external(1, 2, {1.0, std::nan("")}), Error);
  CHECK_THROWS_AS(
      DenseMatrix::from_external(1, 1, {std::numeric_limits<double>::infinity()}), Error);
  CHECK_THROWS_AS(DenseMatrix::from_external(2, 2, {1.0, 2.0, 3.0}), Error);
  CHECK(DenseMatrix::from_external(1, 2, {1.0, 2.0}) == DenseMatrix::from_rows({{1.0, 2.0}}));
}

TEST_CASE("sparse triplets are canonicalized") {
  auto s = SparseMatrix::from_triplets(2, 3, {{1, 2, 1.0}, {0, 1, 2.0}, {1, 0, 3.0},
                                              {1, 2, -1.0}, {0, 1, 1.0}});
  CHECK(s.nnz() == 2);
  CHECK(s.at(0, 1) == 3.0);
  CHECK(s.at(1, 0) == 3.0);
  CHECK(s.at(1, 2) == 0.0);
  const std::vector<std::size_t> rp(s.row_ptr().begin(), s.row_ptr().end());
  CHECK(rp == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("spmm examples") {
  const auto swap = SparseMatrix::from_dense(DenseMatrix::from_rows({{0, 1}, {1, 0}}));
  const auto x = DenseMatrix::from_rows({{1, 2}, {3, 4}});
  CHECK(spmm(swap, x) == DenseMatrix::from_rows({{3, 4}, {1, 2}}));
  CHECK(spmm(SparseMatrix::identity(2), x) == x);

  const Graph g = build_graph(std::vector<Edge>{{0, 1}}, 2);
  const auto l = diffusion(g, DiffusionKind::renormalized_adjacency).matrix;
  CHECK(spmm(l, DenseMatrix::from_rows({{1}, {0}})) == DenseMatrix::from_rows({{0.5}, {0.5}}));

  CHECK_THROWS_AS(spmm(swap, DenseMatrix(3, 1)), Error);
}

TEST_CASE("spmm_transposed matches the explicit transpose") {
  std::vector<Triplet> t;
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> r(0, 6), c(0, 4);
  for (int i = 0; i < 15; ++i) t.push_back({r(rng), c(rng), 1.0 + i});
  const auto s = SparseMatrix::from_triplets(7, 5, t);
  const auto x = random_dense(7, 3, 1);
  CHECK(max_abs_diff(spmm_transposed(s, x), spmm(s.transpose(), x)) < 1e-13);
}

TEST_CASE("gemm examples and triple-loop oracle") {
  const auto b = random_dense(3, 4, 7);
  CHECK(gemm(DenseMatrix::identity(3), b) == b);
  CHECK(gemm(DenseMatrix::from_rows({{1, 2}}), DenseMatrix::from_rows({{3}, {4}})) ==
        DenseMatrix::from_rows({{11}}));

  const auto a = random_dense(5, 4, 11);
  const auto c = random_dense(4, 3, 12);
  CHECK(max_abs_diff(gemm(a, c), testutil::naive_product(a, c)) < 1e-12);
  CHECK(max_abs_diff(gemm_tn(a.transpose(), c), gemm(a, c)) < 1e-12);
  CHECK(max_abs_diff(gemm_nt(a, c.transpose()), gemm(a, c)) < 1e-12);

  // Crosses the internal block sizes.
  const auto big_a = random_dense(37, 300, 13);
  const auto big_b = random_dense(300, 530, 14);
  CHECK(max_abs_diff(gemm(big_a, big_b), testutil::naive_product(big_a, big_b)) < 1e-10);

  CHECK_THROWS_AS(gemm(a, a), Error);
}

TEST_CASE("blockwise accumulation is bitwise equal to the concatenated product") {
  const auto x1 = random_dense(9, 4, 1);
  const auto x2 = random_dense(9, 3, 2);
  const auto x3 = random_dense(9, 5, 3);
  const std::vector<DenseMatrix> blocks{x1, x2, x3};
  const auto w = random_dense(12, 6, 4);
  const auto full = gemm(hconcat(blocks), w);

  DenseMatrix acc(9, 6);
  gemm_accumulate(x1, w, 0, acc);
  gemm_accumulate(x2, w, 4, acc);
  gemm_accumulate(x3, w, 7, acc);
  CHECK(acc == full);

  const auto g = random_dense(9, 6, 5);
  const auto full_t = gemm_tn(hconcat(blocks), g);
  DenseMatrix acc_t(12, 6);
  gemm_tn_accumulate(x1, g, acc_t, 0);
  gemm_tn_accumulate(x2, g, acc_t, 4);
  gemm_tn_accumulate(x3, g, acc_t, 7);
  CHECK(acc_t == full_t);

  const auto s1 = SparseMatrix::from_dense(x1);
  DenseMatrix sacc(9, 6);
  spmm_accumulate(s1, w, 0, sacc);
  CHECK(max_abs_diff(sacc, gemm(x1, row_block(w, 0, 4))) < 1e-13);
  DenseMatrix sacc_t(12, 6);
  spmm_transposed_accumulate(s1, g, sacc_t, 0);
  CHECK(max_abs_diff(row_block(sacc_t, 0, 4), gemm_tn(x1, g)) < 1e-13);
}

TEST_CASE("block helpers") {
  const auto m = random_dense(4, 6, 9);
  CHECK(hconcat(std::vector<DenseMatrix>{col_block(m, 0, 2), col_block(m, 2, 6)}) == m);
  CHECK(row_block(m, 1, 3).rows() == 2);
  CHECK(row_block(m, 1, 3)(0, 5) == m(1, 5));
  CHECK(hadamard(m, DenseMatrix(4, 6, 2.0))(2, 3) == 2.0 * m(2, 3));
  DenseMatrix y(4, 6);
  axpy(y, -1.0, m);
  CHECK(y(3, 1) == -m(3, 1));
  CHECK(frobenius_norm(DenseMatrix::from_rows({{3, 4}})) == doctest::Approx(5.0));
}

TEST_CASE("numerical_rank examples") {
  CHECK(numerical_rank(DenseMatrix::identity(3)) == 3);
  CHECK(numerical_rank(DenseMatrix::from_rows({{1, 2}, {2, 4}})) == 1);
  CHECK(numerical_rank(DenseMatrix(4, 3)) == 0);
  CHECK(numerical_rank(random_dense(1000, 500, 42)) == 500);
  CHECK(numerical_rank(DenseMatrix::identity(3), 2.0) == 0);
}

TEST_CASE("singular values agree with an independent SVD") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const std::size_t rows = 3 + seed * 7;
    const std::size_t cols = 20 - seed * 2;
    const auto x = random_dense(rows, cols, 100 + seed, std::pow(10.0, double(seed) - 3.0));
    const auto sv = singular_values(x);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(testutil::to_eigen(x));
    const auto& ref = svd.singularValues();
    REQUIRE(sv.size() == static_cast<std::size_t>(ref.size()));
    for (std::size_t i = 0; i < sv.size(); ++i)
      CHECK(std::abs(sv[i] - ref(i)) <= 1e-12 * ref(0));
  }
}

TEST_CASE("rank of a low-rank product and of its transpose") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t k = 1 + seed % 6;
    const auto x = gemm(random_dense(40, k, seed), random_dense(k, 25, seed + 50));
    CHECK(numerical_rank(x) == k);
    CHECK(numerical_rank(x.transpose()) == k);
  }
}

TEST_CASE("relu keeps positively dependent pairs at rank 1, tanh restores rank 2") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> mag(0.1, 3.0);
  int relu_rank1 = 0, tanh_rank2 = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    const auto y = random_dense(60, 1, rng());
    const double c = mag(rng);
    DenseMatrix pair(60, 2);
    for (std::size_t i = 0; i < 60; ++i) {
      pair(i, 0) = c * y(i, 0);
      pair(i, 1) = y(i, 0);
    }
    relu_rank1 += numerical_rank(activation(pair, Activation::relu)) == 1 ? 1 : 0;
    tanh_rank2 += numerical_rank(activation(pair, Activation::tanh)) == 2 ? 1 : 0;
  }
  CHECK(relu_rank1 == trials);
  CHECK(tanh_rank2 >= 990);
}

TEST_CASE("symmetric_eigen agrees with an independent solver and reconstructs") {
  for (std::size_t n : {1u, 2u, 7u, 60u, 200u}) {
    auto r = random_dense(n, n, n);
    DenseMatrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) a(i, j) = r(i, j) + r(j, i);
    const auto eig = symmetric_eigen(a, true);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(testutil::to_eigen(a));
    for (std::size_t i = 0; i < n; ++i) CHECK(eig.values[i] == doctest::Approx(ref.eigenvalues()(i)).epsilon(1e-10));

    DenseMatrix lambda(n, n);
    for (std::size_t i = 0; i < n; ++i) lambda(i, i) = eig.values[i];
    const auto rec = gemm_nt(gemm(eig.vectors, lambda), eig.vectors);
    DenseMatrix diff = rec;
    axpy(diff, -1.0, a);
    CHECK(frobenius_norm(diff) / frobenius_norm(a) < 1e-10);
  }
}

TEST_CASE("spectrum examples") {
  const Graph k3 = build_graph(std::vector<Edge>{{0, 1}, {1, 2}, {0, 2}}, 3);
  const auto ev = spectrum(diffusion(k3, DiffusionKind::renormalized_adjacency).matrix);
  REQUIRE(ev.size() == 3);
  CHECK(ev[0] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(std::abs(ev[1]) < 1e-14);
  CHECK(ev[2] == doctest::Approx(1.0).epsilon(1e-14));

  const Graph edge = build_graph(std::vector<Edge>{{0, 1}}, 2);
  const auto lap = spectrum(diffusion(edge, DiffusionKind::laplacian).matrix);
  CHECK(std::abs(lap[0]) < 1e-14);
  CHECK(lap[1] == doctest::Approx(2.0));

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Graph g = erdos_renyi(80, 0.05, seed);
    const auto s = spectrum(diffusion(g, DiffusionKind::renormalized_adjacency).matrix);
    CHECK(std::abs(s.back() - 1.0) < 1e-10);
    CHECK(s.front() > -1.0);
  }
}

TEST_CASE("dense spectrum refuses large operators") {
  CHECK_THROWS_AS(spectrum(SparseMatrix::identity(kDenseSpectrumLimit + 1)), Error);
  try {
    spectrum(SparseMatrix::identity(kDenseSpectrumLimit + 1));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooLarge);
  }
}

TEST_CASE("lanczos extremal Ritz values converge to the dense spectrum") {
  const Graph g = testutil::random_connected(300, 0.03, 5);
  const auto l = diffusion(g, DiffusionKind::renormalized_adjacency).matrix;
  const auto dense = spectrum(l);
  SpectrumOptions opt;
  opt.method = SpectrumMethod::lanczos;
  opt.iters = 120;
  opt.k = 6;
  opt.seed = 1;
  const auto ritz = spectrum(l, opt);
  REQUIRE(ritz.size() == 6);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(ritz[i] - dense[i]) < 1e-8);
    CHECK(std::abs(ritz[5 - i] - dense[dense.size() - 1 - i]) < 1e-8);
  }
}

TEST_CASE("lanczos breakdown is reported") {
  // Krylov space of the identity is one-dimensional.
  SpectrumOptions opt;
  opt.method = SpectrumMethod::lanczos;
  opt.iters = 5;
  try {
    spectrum(SparseMatrix::identity(10), opt);
    FAIL("expected NumericalError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NumericalError);
  }
}

TEST_CASE("activation examples") {
  CHECK(activation(DenseMatrix::from_rows({{-1, 2}}), Activation::relu) ==
        DenseMatrix::from_rows({{0, 2}}));
  CHECK(activation(DenseMatrix(1, 1), Activation::tanh)(0, 0) == 0.0);
  CHECK(activation_grad(DenseMatrix(1, 1), Activation::tanh)(0, 0) == 1.0);
  CHECK(activation_grad(random_dense(3, 2, 1), Activation::identity) == DenseMatrix(3, 2, 1.0));
  CHECK(activation_grad(DenseMatrix::from_rows({{-1, 0, 2}}), Activation::relu) ==
        DenseMatrix::from_rows({{0, 0, 1}}));
  CHECK(parse_activation("linear") == Activation::identity);
  CHECK_THROWS_AS(parse_activation("gelu"), Error);
}

TEST_CASE("kernels are bitwise reproducible") {
  const auto a = random_dense(50, 70, 1);
  const auto b = random_dense(70, 30, 2);
  CHECK(gemm(a, b) == gemm(a, b));
  const auto l = diffusion(erdos_renyi(50, 0.1, 3), DiffusionKind::renormalized_adjacency).matrix;
  CHECK(spmm(l, a) == spmm(l, a));
}

}

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "kgcn/graph.hpp"
#include "kgcn/krylov.hpp"
#include "test_util.hpp"

using namespace kgcn;
using testutil::random_dense;

TEST_SUITE("krylov") {

TEST_CASE("block_krylov_matrix examples") {
  const auto x = random_dense(4, 2, 1);
  const auto k = block_krylov_matrix(SparseMatrix::identity(4), x, 3);
  CHECK(k == hconcat(std::vector<DenseMatrix>{x, x, x}));

  const auto swap = SparseMatrix::from_dense(DenseMatrix::from_rows({{0, 1}, {1, 0}}));
  CHECK(block_krylov_matrix(swap, DenseMatrix::from_rows({{1}, {0}}), 3) ==
        DenseMatrix::from_rows({{1, 0, 1}, {0, 1, 0}}));

  CHECK(block_krylov_matrix(swap, DenseMatrix::from_rows({{1, 2}, {3, 4}}), 1) ==
        DenseMatrix::from_rows({{1, 2}, {3, 4}}));

  CHECK_THROWS_AS(block_krylov_matrix(swap, DenseMatrix(3, 1), 2), Error);
  CHECK_THROWS_AS(block_krylov_matrix(swap, DenseMatrix(2, 1), 0), Error);
}

TEST_CASE("column block j is L applied j times, bitwise") {
  const Graph g = erdos_renyi(40, 0.1, 2);
  const auto l = diffusion(g, DiffusionKind::renormalized_adjacency).matrix;
  const auto x = random_dense(40, 3, 4);
  const auto basis = block_krylov_basis(l, x, 5);
  const auto k = basis.concatenated();
  CHECK(k.cols() == 15);
  DenseMatrix cur = x;
  for (std::size_t j = 0; j < 5; ++j) {
    CHECK(col_block(k, 3 * j, 3 * j + 3) == cur);
    CHECK(basis.blocks[j] == cur);
    cur = spmm(l, cur);
  }
}

TEST_CASE("classical_block_inner examples") {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(testutil::to_eigen(random_dense(10, 4, 5)));
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(10, 4);
  const auto qm = testutil::from_eigen(q);
  CHECK(max_abs_diff(classical_block_inner(qm, qm), DenseMatrix::identity(4)) < 1e-13);

  const auto x = random_dense(10, 3, 6);
  const auto y = random_dense(10, 3, 7);
  CHECK(classical_block_inner(x, y) == classical_block_inner(y, x).transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
      testutil::to_eigen(classical_block_inner(x, x)));
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
  Eigen::LLT<Eigen::MatrixXd> llt(testutil::to_eigen(classical_block_inner(x, x)));
  CHECK(llt.info() == Eigen::Success);

  CHECK_THROWS_AS(classical_block_inner(x, random_dense(9, 3, 1)), Error);
}

TEST_CASE("krylov_grade examples") {
  const auto x = random_dense(8, 2, 9);
  CHECK(krylov_grade(SparseMatrix::identity(8), x, 6).m == 1);
  CHECK(krylov_grade(SparseMatrix::identity(8), DenseMatrix(8, 2), 6).m == 1);

  std::vector<Triplet> diag;
  for (std::size_t i = 0; i < 8; ++i) diag.push_back({i, i, i < 4 ? 0.5 : -1.5});
  const auto two_eigs = SparseMatrix::from_triplets(8, 8, diag);
  const auto g = krylov_grade(two_eigs, random_dense(8, 1, 3), 6);
  CHECK(g.m == 2);
  CHECK(g.stabilized);

  // Rank keeps growing past max_m.
  const Graph path = build_graph(std::vector<Edge>{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}}, 6);
  DenseMatrix e0(6, 1);
  e0(0, 0) = 1.0;
  const auto ng = krylov_grade(diffusion(path, DiffusionKind::laplacian).matrix, e0, 3);
  CHECK(ng.m == 3);
  CHECK_FALSE(ng.stabilized);
}

TEST_CASE("rank stays put beyond the grade") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const std::size_t n = 10 + 4 * seed;
    const Graph g = erdos_renyi(n, 0.3, seed);
    const auto l = diffusion(g, DiffusionKind::renormalized_adjacency).matrix;
    const auto x = random_dense(n, 2, seed + 20);
    const auto grade = krylov_grade(l, x, n);
    REQUIRE(grade.stabilized);
    const std::size_t r = numerical_rank(block_krylov_matrix(l, x, grade.m));
    for (std::size_t j = grade.m; j <= grade.m + 6; ++j)
      CHECK(numerical_rank(block_krylov_matrix(l, x, j)) == r);
  }
}

}

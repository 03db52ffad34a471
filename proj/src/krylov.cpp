#include "kgcn/krylov.hpp"

#include <string>

namespace kgcn {

BlockKrylovBasis block_krylov_basis(const SparseMatrix& op, const DenseMatrix& x, std::size_t m) {
  if (m == 0) fail(ErrorCode::ShapeError, "block_krylov: m must be at least 1");
  if (op.rows() != op.cols() || op.cols() != x.rows()) {
    fail(ErrorCode::ShapeError, "block_krylov: operator is " + std::to_string(op.rows()) + "x" +
                                    std::to_string(op.cols()) + ", block has " +
                                    std::to_string(x.rows()) + " rows");
  }
  BlockKrylovBasis basis;
  basis.blocks.reserve(m);
  basis.blocks.push_back(x);
  for (std::size_t j = 1; j < m; ++j) basis.blocks.push_back(spmm(op, basis.blocks.back()));
  return basis;
}

DenseMatrix block_krylov_matrix(const SparseMatrix& op, const DenseMatrix& x, std::size_t m) {
  return block_krylov_basis(op, x, m).concatenated();
}

DenseMatrix classical_block_inner(const DenseMatrix& x, const DenseMatrix& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    fail(ErrorCode::ShapeError, "classical_block_inner: block shapes differ");
  }
  return gemm_tn(x, y);
}

KrylovGrade krylov_grade(const SparseMatrix& op, const DenseMatrix& x, std::size_t max_m,
                         std::optional<double> tol) {
  if (max_m == 0) fail(ErrorCode::ShapeError, "krylov_grade: max_m must be at least 1");
  std::vector<DenseMatrix> blocks{x};
  std::size_t prev_rank = numerical_rank(x, tol);
  for (std::size_t m = 1; m <= max_m; ++m) {
    blocks.push_back(spmm(op, blocks.back()));
    const std::size_t rank = numerical_rank(hconcat(blocks), tol);
    if (rank == prev_rank) return {m, true};
    prev_rank = rank;
  }
  return {max_m, false};
}

}  // namespace kgcn

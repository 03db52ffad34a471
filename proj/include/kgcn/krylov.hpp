#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "kgcn/linalg.hpp"

namespace kgcn {

/// Blocks L^j·X for j = 0..m-1, each N×F.
struct BlockKrylovBasis {
  std::vector<DenseMatrix> blocks;

  std::size_t m() const noexcept { return blocks.size(); }
  /// [X, LX, …, L^{m-1}X] as one N×(mF) matrix.
  DenseMatrix concatenated() const { return hconcat(blocks); }
};

/// Successive spmm applications; L^j is never formed.
BlockKrylovBasis block_krylov_basis(const SparseMatrix& op, const DenseMatrix& x, std::size_t m);

/// [X, LX, …, L^{m-1}X], shape N×(mF).
DenseMatrix block_krylov_matrix(const SparseMatrix& op, const DenseMatrix& x, std::size_t m);

/// Classical block inner product ⟨X, Y⟩ = XᵀY.
DenseMatrix classical_block_inner(const DenseMatrix& x, const DenseMatrix& y);

struct KrylovGrade {
  std::size_t m = 1;
  bool stabilized = true;
};

/// Smallest m ≤ max_m with rank(K_{m+1}) == rank(K_m). When the rank never
/// stops growing, returns max_m with stabilized = false. `tol` is forwarded
/// to numerical_rank (empty = default tolerance).
KrylovGrade krylov_grade(const SparseMatrix& op, const DenseMatrix& x, std::size_t max_m,
                         std::optional<double> tol = {});

}  // namespace kgcn

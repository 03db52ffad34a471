#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "kgcn/error.hpp"

namespace kgcn {

/// Row-major matrix of 64-bit floats.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  /// Takes ownership of `data` (row-major). Rejects NaN/Inf, so use this for
  /// anything read from disk or the command line.
  static DenseMatrix from_external(std::size_t rows, std::size_t cols,
                                   std::vector<double> data);
  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  DenseMatrix transpose() const;
  bool all_finite() const noexcept;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Compressed sparse row matrix. Canonical form: column indices strictly
/// increasing within a row, no stored zeros.
class SparseMatrix {
 public:
  SparseMatrix() = default;

  /// Duplicate coordinates are summed; entries that end up zero are dropped.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<Triplet> triplets);
  static SparseMatrix from_dense(const DenseMatrix& dense);
  static SparseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
  std::span<const std::uint32_t> col_idx() const noexcept { return col_idx_; }
  std::span<const double> values() const noexcept { return values_; }

  /// Stored value at (r, c), or 0.
  double at(std::size_t r, std::size_t c) const;

  SparseMatrix transpose() const;
  DenseMatrix to_dense() const;
  /// Bitwise comparison against the transpose.
  bool is_symmetric() const;

  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::uint32_t> col_idx_;
  std::vector<double> values_;
};

// Products. All kernels are single-threaded with a fixed summation order, so
// repeated calls are bitwise identical.

/// S·X, summing each output row in ascending column index of S.
DenseMatrix spmm(const SparseMatrix& s, const DenseMatrix& x);
/// Sᵀ·X without forming Sᵀ.
DenseMatrix spmm_transposed(const SparseMatrix& s, const DenseMatrix& x);
DenseMatrix gemm(const DenseMatrix& a, const DenseMatrix& b);
/// Aᵀ·B.
DenseMatrix gemm_tn(const DenseMatrix& a, const DenseMatrix& b);
/// A·Bᵀ.
DenseMatrix gemm_nt(const DenseMatrix& a, const DenseMatrix& b);

/// C += A·B[off : off + A.cols, :]. Summing a concatenation block by block
/// with this gives the same bits as one gemm on the concatenated matrix.
void gemm_accumulate(const DenseMatrix& a, const DenseMatrix& b, std::size_t b_row_offset,
                     DenseMatrix& c);
/// C += S·B[off : off + S.cols, :]
void spmm_accumulate(const SparseMatrix& s, const DenseMatrix& b, std::size_t b_row_offset,
                     DenseMatrix& c);
/// C[off : off + A.cols, :] += Aᵀ·B
void gemm_tn_accumulate(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c,
                        std::size_t c_row_offset);
/// C[off : off + S.cols, :] += Sᵀ·B
void spmm_transposed_accumulate(const SparseMatrix& s, const DenseMatrix& b, DenseMatrix& c,
                                std::size_t c_row_offset);

/// y += alpha·x
void axpy(DenseMatrix& y, double alpha, const DenseMatrix& x);
DenseMatrix hconcat(std::span<const DenseMatrix> blocks);
/// Rows [begin, end) as a new matrix.
DenseMatrix row_block(const DenseMatrix& m, std::size_t begin, std::size_t end);
/// Columns [begin, end) as a new matrix.
DenseMatrix col_block(const DenseMatrix& m, std::size_t begin, std::size_t end);
DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b);

double frobenius_norm(const DenseMatrix& m);
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);

/// Singular values in descending order (Householder QR followed by one-sided
/// Jacobi on the triangular factor).
std::vector<double> singular_values(const DenseMatrix& x);

/// max(rows, cols)·ε·σ₁
double default_rank_tolerance(std::size_t rows, std::size_t cols, double sigma_max);

/// Count of singular values strictly above `tol`, or above the default
/// tolerance when `tol` is empty. Zero matrix has rank 0.
std::size_t numerical_rank(const DenseMatrix& x, std::optional<double> tol = {});

struct SymmetricEigen {
  std::vector<double> values;  // ascending
  DenseMatrix vectors;         // column j pairs with values[j]; empty if not requested
};

/// Householder tridiagonalization + implicit QL. Input must be symmetric.
SymmetricEigen symmetric_eigen(const DenseMatrix& a, bool compute_vectors = false);

enum class SpectrumMethod { dense_full, lanczos };

struct SpectrumOptions {
  SpectrumMethod method = SpectrumMethod::dense_full;
  std::size_t k = 0;        // lanczos: Ritz values to return, 0 = all
  std::size_t iters = 100;  // lanczos steps
  std::uint64_t seed = 0;   // lanczos start vector
};

inline constexpr std::size_t kDenseSpectrumLimit = 5000;

/// Sorted (ascending) eigenvalues of a symmetric sparse operator.
std::vector<double> spectrum(const SparseMatrix& s, const SpectrumOptions& options = {});

enum class Activation { relu, tanh, identity };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation a);

DenseMatrix activation(const DenseMatrix& x, Activation kind);
/// Element-wise derivative evaluated at x (ReLU'(0) taken as 0).
DenseMatrix activation_grad(const DenseMatrix& x, Activation kind);

}  // namespace kgcn

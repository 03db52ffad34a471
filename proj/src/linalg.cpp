#include "kgcn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace kgcn {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorCode::ShapeError, std::string(op) + ": " + shape_str(a.rows(), a.cols()) +
                                    " vs " + shape_str(b.rows(), b.cols()));
  }
}

// out[0..n) += a * x[0..n)
inline void scaled_add(double* out, double a, const double* x, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) out[j] += a * x[j];
}

inline double dot(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

}  // namespace

// ---------------------------------------------------------------- DenseMatrix

DenseMatrix DenseMatrix::from_external(std::size_t rows, std::size_t cols,
                                       std::vector<double> data) {
  if (data.size() != rows * cols) {
    fail(ErrorCode::ShapeError, "from_external: expected " + std::to_string(rows * cols) +
                                    " values, got " + std::to_string(data.size()));
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      fail(ErrorCode::NumericalError,
           "non-finite value at row " + std::to_string(i / std::max<std::size_t>(cols, 1)));
    }
  }
  DenseMatrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.data_ = std::move(data);
  return m;
}

DenseMatrix DenseMatrix::from_rows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) fail(ErrorCode::ShapeError, "from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return from_external(r, c, std::move(data));
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix t(cols_, rows_);
  constexpr std::size_t kTile = 32;
  for (std::size_t i0 = 0; i0 < rows_; i0 += kTile) {
    const std::size_t i1 = std::min(rows_, i0 + kTile);
    for (std::size_t j0 = 0; j0 < cols_; j0 += kTile) {
      const std::size_t j1 = std::min(cols_, j0 + kTile);
      for (std::size_t i = i0; i < i1; ++i)
        for (std::size_t j = j0; j < j1; ++j) t(j, i) = (*this)(i, j);
    }
  }
  return t;
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

// --------------------------------------------------------------- SparseMatrix

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols) {
      fail(ErrorCode::ShapeError, "from_triplets: (" + std::to_string(t.row) + "," +
                                      std::to_string(t.col) + ") outside " +
                                      shape_str(rows, cols));
    }
  }
  std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  SparseMatrix s;
  s.rows_ = rows;
  s.cols_ = cols;
  s.row_ptr_.assign(rows + 1, 0);
  std::size_t i = 0;
  while (i < triplets.size()) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < triplets.size() && triplets[j].row == triplets[i].row &&
           triplets[j].col == triplets[i].col) {
      sum += triplets[j].value;
      ++j;
    }
    if (sum != 0.0) {
      s.col_idx_.push_back(static_cast<std::uint32_t>(triplets[i].col));
      s.values_.push_back(sum);
      ++s.row_ptr_[triplets[i].row + 1];
    }
    i = j;
  }
  std::partial_sum(s.row_ptr_.begin(), s.row_ptr_.end(), s.row_ptr_.begin());
  return s;
}

SparseMatrix SparseMatrix::from_dense(const DenseMatrix& dense) {
  SparseMatrix s;
  s.rows_ = dense.rows();
  s.cols_ = dense.cols();
  s.row_ptr_.assign(s.rows_ + 1, 0);
  for (std::size_t r = 0; r < s.rows_; ++r) {
    const auto row = dense.row(r);
    for (std::size_t c = 0; c < s.cols_; ++c) {
      if (row[c] != 0.0) {
        s.col_idx_.push_back(static_cast<std::uint32_t>(c));
        s.values_.push_back(row[c]);
      }
    }
    s.row_ptr_[r + 1] = s.values_.size();
  }
  return s;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  SparseMatrix s;
  s.rows_ = s.cols_ = n;
  s.row_ptr_.resize(n + 1);
  s.col_idx_.resize(n);
  s.values_.assign(n, 1.0);
  for (std::size_t i = 0; i <= n; ++i) s.row_ptr_[i] = i;
  for (std::size_t i = 0; i < n; ++i) s.col_idx_[i] = static_cast<std::uint32_t>(i);
  return s;
}

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  const auto begin = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
  const auto end = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
  const auto it = std::lower_bound(begin, end, static_cast<std::uint32_t>(c));
  if (it == end || *it != c) return 0.0;
  return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

SparseMatrix SparseMatrix::transpose() const {
  SparseMatrix t;
  t.rows_ = cols_;
  t.cols_ = rows_;
  t.row_ptr_.assign(cols_ + 1, 0);
  for (auto c : col_idx_) ++t.row_ptr_[c + 1];
  std::partial_sum(t.row_ptr_.begin(), t.row_ptr_.end(), t.row_ptr_.begin());
  t.col_idx_.resize(nnz());
  t.values_.resize(nnz());
  std::vector<std::size_t> next(t.row_ptr_.begin(), t.row_ptr_.end() - 1);
  // Row-major sweep keeps the output columns sorted.
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const std::size_t dst = next[col_idx_[k]]++;
      t.col_idx_[dst] = static_cast<std::uint32_t>(r);
      t.values_[dst] = values_[k];
    }
  }
  return t;
}

DenseMatrix SparseMatrix::to_dense() const {
  DenseMatrix d(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) d(r, col_idx_[k]) = values_[k];
  return d;
}

bool SparseMatrix::is_symmetric() const {
  return rows_ == cols_ && *this == transpose();
}

// ------------------------------------------------------------------- products

DenseMatrix spmm(const SparseMatrix& s, const DenseMatrix& x) {
  if (s.cols() != x.rows()) {
    fail(ErrorCode::ShapeError, "spmm: " + shape_str(s.rows(), s.cols()) + " * " +
                                    shape_str(x.rows(), x.cols()));
  }
  DenseMatrix out(s.rows(), x.cols());
  spmm_accumulate(s, x, 0, out);
  return out;
}

void spmm_accumulate(const SparseMatrix& s, const DenseMatrix& b, std::size_t b_row_offset,
                     DenseMatrix& c) {
  if (b_row_offset + s.cols() > b.rows() || c.rows() != s.rows() || c.cols() != b.cols()) {
    fail(ErrorCode::ShapeError, "spmm_accumulate: " + shape_str(s.rows(), s.cols()) + " * " +
                                    shape_str(b.rows(), b.cols()) + " -> " +
                                    shape_str(c.rows(), c.cols()));
  }
  const auto ptr = s.row_ptr();
  const auto idx = s.col_idx();
  const auto val = s.values();
  const std::size_t f = b.cols();
  for (std::size_t r = 0; r < s.rows(); ++r) {
    double* dst = c.row(r).data();
    for (std::size_t k = ptr[r]; k < ptr[r + 1]; ++k)
      scaled_add(dst, val[k], b.row(b_row_offset + idx[k]).data(), f);
  }
}

DenseMatrix spmm_transposed(const SparseMatrix& s, const DenseMatrix& x) {
  if (s.rows() != x.rows()) {
    fail(ErrorCode::ShapeError, "spmm_transposed: (" + shape_str(s.rows(), s.cols()) +
                                    ")^T * " + shape_str(x.rows(), x.cols()));
  }
  DenseMatrix out(s.cols(), x.cols());
  spmm_transposed_accumulate(s, x, out, 0);
  return out;
}

void spmm_transposed_accumulate(const SparseMatrix& s, const DenseMatrix& b, DenseMatrix& c,
                                std::size_t c_row_offset) {
  if (s.rows() != b.rows() || c_row_offset + s.cols() > c.rows() || c.cols() != b.cols()) {
    fail(ErrorCode::ShapeError, "spmm_transposed_accumulate: shape mismatch");
  }
  const auto ptr = s.row_ptr();
  const auto idx = s.col_idx();
  const auto val = s.values();
  const std::size_t f = b.cols();
  for (std::size_t r = 0; r < s.rows(); ++r) {
    const double* src = b.row(r).data();
    for (std::size_t k = ptr[r]; k < ptr[r + 1]; ++k)
      scaled_add(c.row(c_row_offset + idx[k]).data(), val[k], src, f);
  }
}

DenseMatrix gemm(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorCode::ShapeError, "gemm: " + shape_str(a.rows(), a.cols()) + " * " +
                                    shape_str(b.rows(), b.cols()));
  }
  DenseMatrix c(a.rows(), b.cols());
  gemm_accumulate(a, b, 0, c);
  return c;
}

void gemm_accumulate(const DenseMatrix& a, const DenseMatrix& b, std::size_t b_row_offset,
                     DenseMatrix& c) {
  if (b_row_offset + a.cols() > b.rows() || c.rows() != a.rows() || c.cols() != b.cols()) {
    fail(ErrorCode::ShapeError, "gemm: " + shape_str(a.rows(), a.cols()) + " * " +
                                    shape_str(b.rows(), b.cols()) + " -> " +
                                    shape_str(c.rows(), c.cols()));
  }
  const std::size_t m = a.rows(), kk = a.cols(), n = b.cols();
  // Blocked over k and j; every c(i,j) still accumulates in ascending k.
  constexpr std::size_t kBlockK = 128;
  constexpr std::size_t kBlockJ = 512;
  for (std::size_t k0 = 0; k0 < kk; k0 += kBlockK) {
    const std::size_t k1 = std::min(kk, k0 + kBlockK);
    for (std::size_t j0 = 0; j0 < n; j0 += kBlockJ) {
      const std::size_t jn = std::min(n, j0 + kBlockJ) - j0;
      for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a.row(i).data();
        double* crow = c.row(i).data() + j0;
        for (std::size_t k = k0; k < k1; ++k) {
          const double aik = arow[k];
          if (aik == 0.0) continue;
          scaled_add(crow, aik, b.row(b_row_offset + k).data() + j0, jn);
        }
      }
    }
  }
}

DenseMatrix gemm_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) {
    fail(ErrorCode::ShapeError, "gemm_tn: (" + shape_str(a.rows(), a.cols()) + ")^T * " +
                                    shape_str(b.rows(), b.cols()));
  }
  DenseMatrix c(a.cols(), b.cols());
  gemm_tn_accumulate(a, b, c, 0);
  return c;
}

void gemm_tn_accumulate(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c,
                        std::size_t c_row_offset) {
  if (a.rows() != b.rows() || c_row_offset + a.cols() > c.rows() || c.cols() != b.cols()) {
    fail(ErrorCode::ShapeError, "gemm_tn_accumulate: shape mismatch");
  }
  const std::size_t n = a.rows(), p = a.cols(), q = b.cols();
  constexpr std::size_t kBlockP = 64;
  for (std::size_t p0 = 0; p0 < p; p0 += kBlockP) {
    const std::size_t p1 = std::min(p, p0 + kBlockP);
    for (std::size_t r = 0; r < n; ++r) {
      const double* arow = a.row(r).data();
      const double* brow = b.row(r).data();
      for (std::size_t i = p0; i < p1; ++i) {
        const double ari = arow[i];
        if (ari == 0.0) continue;
        scaled_add(c.row(c_row_offset + i).data(), ari, brow, q);
      }
    }
  }
}

DenseMatrix gemm_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) {
    fail(ErrorCode::ShapeError, "gemm_nt: " + shape_str(a.rows(), a.cols()) + " * (" +
                                    shape_str(b.rows(), b.cols()) + ")^T");
  }
  return gemm(a, b.transpose());
}

void axpy(DenseMatrix& y, double alpha, const DenseMatrix& x) {
  require_same_shape(y, x, "axpy");
  scaled_add(y.data(), alpha, x.data(), y.size());
}

DenseMatrix hconcat(std::span<const DenseMatrix> blocks) {
  if (blocks.empty()) return {};
  const std::size_t rows = blocks.front().rows();
  std::size_t cols = 0;
  for (const auto& b : blocks) {
    if (b.rows() != rows) fail(ErrorCode::ShapeError, "hconcat: row count mismatch");
    cols += b.cols();
  }
  DenseMatrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double* dst = out.row(r).data();
    for (const auto& b : blocks) {
      const auto src = b.row(r);
      dst = std::copy(src.begin(), src.end(), dst);
    }
  }
  return out;
}

DenseMatrix row_block(const DenseMatrix& m, std::size_t begin, std::size_t end) {
  if (begin > end || end > m.rows()) fail(ErrorCode::ShapeError, "row_block: bad range");
  DenseMatrix out(end - begin, m.cols());
  std::copy(m.data() + begin * m.cols(), m.data() + end * m.cols(), out.data());
  return out;
}

DenseMatrix col_block(const DenseMatrix& m, std::size_t begin, std::size_t end) {
  if (begin > end || end > m.cols()) fail(ErrorCode::ShapeError, "col_block: bad range");
  DenseMatrix out(m.rows(), end - begin);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto src = m.row(r);
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(begin),
              src.begin() + static_cast<std::ptrdiff_t>(end), out.row(r).begin());
  }
  return out;
}

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "hadamard");
  DenseMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  return out;
}

double frobenius_norm(const DenseMatrix& m) {
  double scale = 0.0;
  for (double v : m.values()) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return 0.0;
  double s = 0.0;
  for (double v : m.values()) s += (v / scale) * (v / scale);
  return scale * std::sqrt(s);
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  return d;
}

// ------------------------------------------------------------------------ SVD

std::vector<double> singular_values(const DenseMatrix& x) {
  if (x.empty()) return {};
  for (double v : x.values()) {
    if (!std::isfinite(v)) fail(ErrorCode::NumericalError, "singular_values: non-finite input");
  }
  const bool tall = x.rows() >= x.cols();
  const std::size_t m = tall ? x.rows() : x.cols();
  const std::size_t n = tall ? x.cols() : x.rows();

  double scale = 0.0;
  for (double v : x.values()) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return std::vector<double>(n, 0.0);

  // Column-major copy of the tall orientation, rescaled so squares cannot overflow.
  std::vector<double> a(m * n);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double v = x(r, c) / scale;
      if (tall) a[c * m + r] = v; else a[r * m + c] = v;
    }
  }

  // Householder QR; R overwrites the upper triangle.
  std::vector<double> v(m);
  for (std::size_t k = 0; k < n; ++k) {
    double* colk = a.data() + k * m;
    double norm2 = 0.0;
    for (std::size_t i = k; i < m; ++i) norm2 += colk[i] * colk[i];
    if (norm2 == 0.0) continue;
    const double norm = std::sqrt(norm2);
    const double alpha = colk[k] > 0 ? -norm : norm;
    const std::size_t len = m - k;
    std::copy(colk + k, colk + m, v.begin());
    v[0] -= alpha;
    const double vnorm2 = norm2 - colk[k] * colk[k] + v[0] * v[0];
    if (vnorm2 == 0.0) continue;
    for (std::size_t j = k + 1; j < n; ++j) {
      double* colj = a.data() + j * m + k;
      const double f = 2.0 * dot(v.data(), colj, len) / vnorm2;
      for (std::size_t i = 0; i < len; ++i) colj[i] -= f * v[i];
    }
    colk[k] = alpha;
    std::fill(colk + k + 1, colk + m, 0.0);
  }

  // One-sided Jacobi on the n×n triangular factor (columns stored contiguously).
  std::vector<double> r(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i <= j; ++i) r[j * n + i] = a[j * m + i];

  const double tol = static_cast<double>(n) * kEps;
  // Columns at rounding-noise level (from exactly dependent inputs) would
  // otherwise keep rotating against each other without converging.
  const double negligible = dot(r.data(), r.data(), n * n) * kEps * kEps;
  constexpr int kMaxSweeps = 80;
  bool converged = false;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      double* cp = r.data() + p * n;
      for (std::size_t q = p + 1; q < n; ++q) {
        double* cq = r.data() + q * n;
        const double alpha = dot(cp, cp, n);
        const double beta = dot(cq, cq, n);
        const double gamma = dot(cp, cq, n);
        if (alpha <= negligible || beta <= negligible) continue;
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < n; ++i) {
          const double xp = cp[i];
          const double xq = cq[i];
          cp[i] = c * xp - s * xq;
          cq[i] = s * xp + c * xq;
        }
      }
    }
  }
  if (!converged) fail(ErrorCode::NumericalError, "singular_values: Jacobi sweeps did not converge");

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = scale * std::sqrt(dot(r.data() + j * n, r.data() + j * n, n));
  std::sort(sigma.begin(), sigma.end(), std::greater<>());
  return sigma;
}

double default_rank_tolerance(std::size_t rows, std::size_t cols, double sigma_max) {
  return static_cast<double>(std::max(rows, cols)) * kEps * sigma_max;
}

std::size_t numerical_rank(const DenseMatrix& x, std::optional<double> tol) {
  const auto sigma = singular_values(x);
  if (sigma.empty() || sigma.front() == 0.0) return 0;
  const double tau = tol.value_or(default_rank_tolerance(x.rows(), x.cols(), sigma.front()));
  return static_cast<std::size_t>(
      std::count_if(sigma.begin(), sigma.end(), [tau](double s) { return s > tau; }));
}

// ------------------------------------------------------------- eigen solvers

namespace {

// Implicit QL with Wilkinson-style shifts on a symmetric tridiagonal matrix.
// d: diagonal, e[i]: coupling between i and i+1 (e[n-1] unused). If z is
// non-null it is an n×n row-major matrix whose columns get rotated.
void tridiagonal_ql(std::vector<double>& d, std::vector<double>& e, double* z, std::size_t n) {
  if (n == 0) return;
  e[n - 1] = 0.0;
  double f = 0.0;
  double tst1 = 0.0;
  constexpr int kMaxIter = 60;
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n - 1 && std::abs(e[m]) > kEps * tst1) ++m;
    if (m > l) {
      int iter = 0;
      do {
        if (++iter > kMaxIter) fail(ErrorCode::NumericalError, "symmetric_eigen: QL did not converge");
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (std::size_t ii = m; ii-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[ii];
          h = c * p;
          r = std::hypot(p, e[ii]);
          e[ii + 1] = s * r;
          s = e[ii] / r;
          c = p / r;
          p = c * d[ii] - s * g;
          d[ii + 1] = h + s * (c * g + s * d[ii]);
          if (z != nullptr) {
            for (std::size_t k = 0; k < n; ++k) {
              double* zk = z + k * n;
              h = zk[ii + 1];
              zk[ii + 1] = s * zk[ii] + c * h;
              zk[ii] = c * zk[ii] - s * h;
            }
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > kEps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

}  // namespace

SymmetricEigen symmetric_eigen(const DenseMatrix& input, bool compute_vectors) {
  if (input.rows() != input.cols()) fail(ErrorCode::ShapeError, "symmetric_eigen: not square");
  const std::size_t n = input.rows();
  SymmetricEigen result;
  if (n == 0) return result;

  DenseMatrix a = input;
  std::vector<double> diag(n), off(n, 0.0);
  // Householder vectors kept for accumulating Q.
  std::vector<std::vector<double>> reflectors;
  std::vector<double> betas;
  std::vector<double> v, p;

  for (std::size_t k = 0; k + 2 < n; ++k) {
    const std::size_t len = n - k - 1;
    const double* x = a.row(k).data() + k + 1;
    double norm2 = 0.0;
    for (std::size_t i = 0; i < len; ++i) norm2 += x[i] * x[i];
    if (norm2 == 0.0) {
      off[k] = 0.0;
      if (compute_vectors) {
        reflectors.emplace_back();
        betas.push_back(0.0);
      }
      continue;
    }
    const double norm = std::sqrt(norm2);
    const double alpha = x[0] > 0 ? -norm : norm;
    v.assign(x, x + len);
    v[0] -= alpha;
    const double vnorm2 = norm2 - x[0] * x[0] + v[0] * v[0];
    const double beta = vnorm2 == 0.0 ? 0.0 : 2.0 / vnorm2;

    // p = beta·A_sub·v ; w = p − (beta/2)(pᵀv)·v ; A_sub −= v wᵀ + w vᵀ
    p.assign(len, 0.0);
    for (std::size_t i = 0; i < len; ++i) p[i] = beta * dot(a.row(k + 1 + i).data() + k + 1, v.data(), len);
    const double kfac = 0.5 * beta * dot(p.data(), v.data(), len);
    for (std::size_t i = 0; i < len; ++i) p[i] -= kfac * v[i];
    for (std::size_t i = 0; i < len; ++i) {
      double* row = a.row(k + 1 + i).data() + k + 1;
      const double vi = v[i];
      const double wi = p[i];
      for (std::size_t j = 0; j < len; ++j) row[j] -= vi * p[j] + wi * v[j];
    }
    off[k] = alpha;
    if (compute_vectors) {
      reflectors.push_back(v);
      betas.push_back(beta);
    }
  }
  for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i);
  if (n >= 2) off[n - 2] = a(n - 1, n - 2);

  DenseMatrix q;
  if (compute_vectors) {
    q = DenseMatrix::identity(n);
    // Q = H_0 H_1 ⋯ H_{n-3}, accumulated right to left on the trailing block.
    std::vector<double> tmp;
    for (std::size_t kk = reflectors.size(); kk-- > 0;) {
      const auto& vk = reflectors[kk];
      if (vk.empty() || betas[kk] == 0.0) continue;
      const std::size_t off0 = kk + 1;
      const std::size_t len = n - off0;
      tmp.assign(len, 0.0);  // tmp = vᵀ Q_sub
      for (std::size_t i = 0; i < len; ++i)
        scaled_add(tmp.data(), vk[i], q.row(off0 + i).data() + off0, len);
      for (std::size_t i = 0; i < len; ++i)
        scaled_add(q.row(off0 + i).data() + off0, -betas[kk] * vk[i], tmp.data(), len);
    }
  }

  tridiagonal_ql(diag, off, compute_vectors ? q.data() : nullptr, n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return diag[i] < diag[j]; });
  result.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) result.values[i] = diag[order[i]];
  if (compute_vectors) {
    result.vectors = DenseMatrix(n, n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) result.vectors(r, c) = q(r, order[c]);
  }
  return result;
}

namespace {

std::vector<double> lanczos_ritz_values(const SparseMatrix& s, const SpectrumOptions& opt) {
  const std::size_t n = s.rows();
  const std::size_t steps = std::min(opt.iters, n);
  if (steps == 0) fail(ErrorCode::NumericalError, "lanczos: zero iterations requested");

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseMatrix basis(steps, n);  // row j = q_j
  {
    auto q0 = basis.row(0);
    for (auto& v : q0) v = normal(rng);
    const double nrm = std::sqrt(dot(q0.data(), q0.data(), n));
    for (auto& v : q0) v /= nrm;
  }

  std::vector<double> alphas, betas;
  DenseMatrix w(n, 1);
  DenseMatrix qcol(n, 1);
  for (std::size_t j = 0; j < steps; ++j) {
    std::copy(basis.row(j).begin(), basis.row(j).end(), qcol.data());
    w = spmm(s, qcol);
    double* wv = w.data();
    const double alpha = dot(basis.row(j).data(), wv, n);
    alphas.push_back(alpha);
    // Full reorthogonalization, applied twice.
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i <= j; ++i) {
        const double c = dot(basis.row(i).data(), wv, n);
        scaled_add(wv, -c, basis.row(i).data(), n);
      }
    }
    if (j + 1 == steps) break;
    const double beta = std::sqrt(dot(wv, wv, n));
    if (beta <= 1e-12 * std::max(1.0, std::abs(alpha))) {
      fail(ErrorCode::NumericalError,
           "lanczos: breakdown at step " + std::to_string(j + 1) + " of " + std::to_string(steps));
    }
    betas.push_back(beta);
    auto next = basis.row(j + 1);
    for (std::size_t i = 0; i < n; ++i) next[i] = wv[i] / beta;
  }

  std::vector<double> d = alphas;
  std::vector<double> e(d.size(), 0.0);
  std::copy(betas.begin(), betas.end(), e.begin());
  tridiagonal_ql(d, e, nullptr, d.size());
  std::sort(d.begin(), d.end());

  if (opt.k == 0 || opt.k >= d.size()) return d;
  const std::size_t top = (opt.k + 1) / 2;
  const std::size_t bottom = opt.k - top;
  std::vector<double> out(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(bottom));
  out.insert(out.end(), d.end() - static_cast<std::ptrdiff_t>(top), d.end());
  return out;
}

}  // namespace

std::vector<double> spectrum(const SparseMatrix& s, const SpectrumOptions& options) {
  if (s.rows() != s.cols()) fail(ErrorCode::ShapeError, "spectrum: operator not square");
  if (options.method == SpectrumMethod::dense_full) {
    if (s.rows() > kDenseSpectrumLimit) {
      fail(ErrorCode::TooLarge, "spectrum: dense_full refused for N=" + std::to_string(s.rows()) +
                                    " (limit " + std::to_string(kDenseSpectrumLimit) + ")");
    }
    return symmetric_eigen(s.to_dense(), false).values;
  }
  return lanczos_ritz_values(s, options);
}

// ---------------------------------------------------------------- activations

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "identity" || name == "linear") return Activation::identity;
  fail(ErrorCode::BadConfig, "unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "identity";
}

DenseMatrix activation(const DenseMatrix& x, Activation kind) {
  if (kind == Activation::identity) return x;
  DenseMatrix out(x.rows(), x.cols());
  const double* src = x.data();
  double* dst = out.data();
  if (kind == Activation::relu) {
    for (std::size_t i = 0; i < x.size(); ++i) dst[i] = src[i] > 0.0 ? src[i] : 0.0;
  } else {
    for (std::size_t i = 0; i < x.size(); ++i) dst[i] = std::tanh(src[i]);
  }
  return out;
}

DenseMatrix activation_grad(const DenseMatrix& x, Activation kind) {
  DenseMatrix out(x.rows(), x.cols(), 1.0);
  if (kind == Activation::identity) return out;
  const double* src = x.data();
  double* dst = out.data();
  if (kind == Activation::relu) {
    for (std::size_t i = 0; i < x.size(); ++i) dst[i] = src[i] > 0.0 ? 1.0 : 0.0;
  } else {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double t = std::tanh(src[i]);
      dst[i] = 1.0 - t * t;
    }
  }
  return out;
}

}  // namespace kgcn

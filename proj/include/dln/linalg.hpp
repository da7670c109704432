#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace dln {

/// Dense real matrix, row-major. Never empty and never holds NaN/Inf; every
/// constructor validates both. Values are immutable once built.
class Matrix {
 public:
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

  static Matrix zeros(std::size_t rows, std::size_t cols);
  static Matrix identity(std::size_t n);
  /// Top-left identity block padded with zeros (rows x cols).
  static Matrix padded_identity(std::size_t rows, std::size_t cols);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix column(std::vector<double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  double operator()(std::size_t i, std::size_t j) const noexcept { return entries_[i * cols_ + j]; }
  double at(std::size_t i, std::size_t j) const;
  std::span<const double> entries() const noexcept { return entries_; }

  std::vector<double> col(std::size_t j) const;
  /// Copy with a single entry replaced; the finite-difference oracle uses this.
  Matrix with_entry(std::size_t i, std::size_t j, double value) const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> entries_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double factor);
/// u * v^T for column vectors u, v.
Matrix outer(const Matrix& u, const Matrix& v);

inline Matrix operator*(const Matrix& a, const Matrix& b) { return matmul(a, b); }
inline Matrix operator+(const Matrix& a, const Matrix& b) { return add(a, b); }
inline Matrix operator-(const Matrix& a, const Matrix& b) { return subtract(a, b); }
inline Matrix operator*(double c, const Matrix& m) { return scale(m, c); }

/// Sum_ij a_ij b_ij, i.e. Tr(a^T b).
double frobenius_inner(const Matrix& a, const Matrix& b);
double frobenius_norm(const Matrix& m);
double max_abs(const Matrix& m);

/// Full singular value decomposition m = U diag(sigma) V^T with square U
/// (rows x rows) and V (cols x cols); sigma has min(rows, cols) entries in
/// descending order.
struct SvdFactors {
  Matrix u;
  std::vector<double> sigma;
  Matrix v;

  double sigma_max() const { return sigma.empty() ? 0.0 : sigma.front(); }
  /// U * Sigma * V^T with Sigma the rows x cols diagonal.
  Matrix reconstruct() const;
};

/// One-sided Jacobi SVD. Throws kSvdNotConverged when the sweep budget is
/// exhausted.
SvdFactors full_svd(const Matrix& m);

/// Number of singular values strictly above tau * sigma_max; 0 for the zero matrix.
std::size_t rank_with_tolerance(const Matrix& m, double tau);

/// Moore-Penrose pseudo-inverse; singular values <= cutoff * sigma_max are dropped.
Matrix pseudo_inverse(const Matrix& m, double cutoff);

inline constexpr double kDefaultKernelTol = 1e-10;

}  // namespace dln

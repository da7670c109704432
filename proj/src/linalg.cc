#include "dln/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "dln/error.hpp"

namespace dln {

namespace {

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(op) + ": " + shape_str(a) + " vs " + shape_str(b));
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  if (rows_ == 0 || cols_ == 0) {
    throw Error(ErrorCode::kInvalidArgument, "empty matrix");
  }
  if (entries_.size() != rows_ * cols_) {
    throw Error(ErrorCode::kDimensionMismatch, "entry count does not match rows*cols");
  }
  for (double x : entries_) {
    if (!std::isfinite(x)) throw Error(ErrorCode::kNonFinite, "matrix entry is not finite");
  }
}

Matrix Matrix::zeros(std::size_t rows, std::size_t cols) {
  return Matrix(rows, cols, std::vector<double>(rows * cols, 0.0));
}

Matrix Matrix::identity(std::size_t n) { return padded_identity(n, n); }

Matrix Matrix::padded_identity(std::size_t rows, std::size_t cols) {
  std::vector<double> e(rows * cols, 0.0);
  for (std::size_t i = 0; i < std::min(rows, cols); ++i) e[i * cols + i] = 1.0;
  return Matrix(rows, cols, std::move(e));
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> e;
  e.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw Error(ErrorCode::kDimensionMismatch, "ragged row list");
    e.insert(e.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(e));
}

Matrix Matrix::column(std::vector<double> values) {
  const std::size_t n = values.size();
  return Matrix(n, 1, std::move(values));
}

double Matrix::at(std::size_t i, std::size_t j) const {
  if (i >= rows_ || j >= cols_) throw Error(ErrorCode::kInvalidArgument, "index out of range");
  return (*this)(i, j);
}

std::vector<double> Matrix::col(std::size_t j) const {
  std::vector<double> out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
  return out;
}

Matrix Matrix::with_entry(std::size_t i, std::size_t j, double value) const {
  if (i >= rows_ || j >= cols_) throw Error(ErrorCode::kInvalidArgument, "index out of range");
  std::vector<double> e = entries_;
  e[i * cols_ + j] = value;
  return Matrix(rows_, cols_, std::move(e));
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "matmul: " + shape_str(a) + " * " + shape_str(b));
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  std::vector<double> out(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) out[i * m + j] += aip * b(p, j);
    }
  }
  return Matrix(n, m, std::move(out));
}

Matrix transpose(const Matrix& m) {
  std::vector<double> out(m.size());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out[j * m.rows() + i] = m(i, j);
  }
  return Matrix(m.cols(), m.rows(), std::move(out));
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.entries()[i] + b.entries()[i];
  return Matrix(a.rows(), a.cols(), std::move(out));
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "subtract");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.entries()[i] - b.entries()[i];
  return Matrix(a.rows(), a.cols(), std::move(out));
}

Matrix scale(const Matrix& m, double factor) {
  std::vector<double> out(m.entries().begin(), m.entries().end());
  for (double& x : out) x *= factor;
  return Matrix(m.rows(), m.cols(), std::move(out));
}

Matrix outer(const Matrix& u, const Matrix& v) {
  if (u.cols() != 1 || v.cols() != 1) {
    throw Error(ErrorCode::kDimensionMismatch, "outer: expects column vectors");
  }
  return matmul(u, transpose(v));
}

double frobenius_inner(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "frobenius_inner");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.entries()[i] * b.entries()[i];
  return s;
}

double frobenius_norm(const Matrix& m) {
  // Scaled accumulation so tiny or huge entries do not under/overflow.
  const double big = max_abs(m);
  if (big == 0.0) return 0.0;
  double s = 0.0;
  for (double x : m.entries()) {
    const double r = x / big;
    s += r * r;
  }
  return big * std::sqrt(s);
}

double max_abs(const Matrix& m) {
  double out = 0.0;
  for (double x : m.entries()) out = std::max(out, std::abs(x));
  return out;
}

Matrix SvdFactors::reconstruct() const {
  const std::size_t m = u.rows(), n = v.rows();
  std::vector<double> us(u.entries().begin(), u.entries().end());
  // U * Sigma keeps only the first min(m, n) columns of U alive.
  std::vector<double> left(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < sigma.size(); ++j) left[i * n + j] = us[i * m + j] * sigma[j];
  }
  return matmul(Matrix(m, n, std::move(left)), transpose(v));
}

namespace {

using Column = std::vector<double>;

double dot(const Column& a, const Column& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Column& a) {
  double big = 0.0;
  for (double x : a) big = std::max(big, std::abs(x));
  if (big == 0.0) return 0.0;
  double s = 0.0;
  for (double x : a) s += (x / big) * (x / big);
  return big * std::sqrt(s);
}

// Project `x` off every column in `basis` (two passes of modified Gram-Schmidt).
void orthogonalize(Column& x, const std::vector<Column>& basis) {
  for (int pass = 0; pass < 2; ++pass) {
    for (const Column& b : basis) {
      const double c = dot(b, x);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] -= c * b[i];
    }
  }
}

Matrix from_columns(const std::vector<Column>& cols) {
  const std::size_t rows = cols.front().size(), n = cols.size();
  std::vector<double> e(rows * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < rows; ++i) e[i * n + j] = cols[j][i];
  }
  return Matrix(rows, n, std::move(e));
}

constexpr int kMaxSweeps = 80;

// Tall case (rows >= cols). Orthogonalizes the columns of `m` by plane
// rotations accumulated into V, then reads U and sigma off the result.
SvdFactors jacobi_tall(const Matrix& m) {
  const std::size_t rows = m.rows(), n = m.cols();
  const double eps = std::numeric_limits<double>::epsilon();

  std::vector<Column> a(n, Column(rows));
  std::vector<Column> v(n, Column(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    a[j] = m.col(j);
    v[j][j] = 1.0;
  }

  const double tol = eps * static_cast<double>(rows);
  bool converged = n == 1;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = dot(a[p], a[p]);
        const double beta = dot(a[q], a[q]);
        const double gamma = dot(a[p], a[q]);
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= tol * std::sqrt(alpha) * std::sqrt(beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = c * t;
        for (std::size_t k = 0; k < rows; ++k) {
          const double ap = a[p][k], aq = a[q][k];
          a[p][k] = c * ap - s * aq;
          a[q][k] = s * ap + c * aq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vp = v[p][k], vq = v[q][k];
          v[p][k] = c * vp - s * vq;
          v[q][k] = s * vp + c * vq;
        }
      }
    }
    converged = !rotated;
  }
  if (!converged) {
    throw Error(ErrorCode::kSvdNotConverged,
                "one-sided Jacobi did not converge in " + std::to_string(kMaxSweeps) + " sweeps");
  }

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) norms[j] = norm2(a[j]);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  const double smax = norms[order.front()];
  // Columns at roundoff level carry no direction; they are replaced by
  // completion vectors below.
  const double drop = static_cast<double>(std::max(rows, n)) * eps * smax;

  std::vector<double> sigma(n);
  std::vector<Column> u_cols;
  std::vector<Column> v_cols(n);
  u_cols.reserve(rows);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    sigma[j] = norms[src];
    v_cols[j] = v[src];
  }
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    if (sigma[j] == 0.0 || sigma[j] <= drop) break;
    Column u = a[src];
    for (double& x : u) x /= sigma[j];
    orthogonalize(u, u_cols);
    const double nu = norm2(u);
    for (double& x : u) x /= nu;
    u_cols.push_back(std::move(u));
  }
  // Complete U to an orthonormal basis of R^rows, each time taking the
  // standard basis vector with the largest residual.
  while (u_cols.size() < rows) {
    Column best;
    double best_norm = -1.0;
    for (std::size_t i = 0; i < rows; ++i) {
      Column e(rows, 0.0);
      e[i] = 1.0;
      orthogonalize(e, u_cols);
      const double ne = norm2(e);
      if (ne > best_norm + 1e-12) {
        best_norm = ne;
        best = std::move(e);
      }
    }
    for (double& x : best) x /= best_norm;
    u_cols.push_back(std::move(best));
  }

  return SvdFactors{from_columns(u_cols), std::move(sigma), from_columns(v_cols)};
}

}  // namespace

SvdFactors full_svd(const Matrix& m) {
  if (m.rows() >= m.cols()) return jacobi_tall(m);
  SvdFactors t = jacobi_tall(transpose(m));
  return SvdFactors{std::move(t.v), std::move(t.sigma), std::move(t.u)};
}

std::size_t rank_with_tolerance(const Matrix& m, double tau) {
  if (!(tau >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "tau must be >= 0");
  const SvdFactors f = full_svd(m);
  const double smax = f.sigma_max();
  if (smax == 0.0) return 0;
  return static_cast<std::size_t>(
      std::count_if(f.sigma.begin(), f.sigma.end(), [&](double s) { return s > tau * smax; }));
}

Matrix pseudo_inverse(const Matrix& m, double cutoff) {
  const SvdFactors f = full_svd(m);
  const std::size_t rows = m.rows(), cols = m.cols();
  std::vector<double> out(cols * rows, 0.0);
  const double smax = f.sigma_max();
  for (std::size_t k = 0; k < f.sigma.size(); ++k) {
    const double s = f.sigma[k];
    if (smax == 0.0 || s <= cutoff * smax) continue;
    for (std::size_t i = 0; i < cols; ++i) {
      for (std::size_t j = 0; j < rows; ++j) out[i * rows + j] += f.v(i, k) * f.u(j, k) / s;
    }
  }
  return Matrix(cols, rows, std::move(out));
}

}  // namespace dln

#pragma once

// Reference computations used by the tests. Each one is written from the
// definition, without going through the library routine it checks.

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dln/linalg.hpp"
#include "dln/network.hpp"
#include "dln/random.hpp"

namespace oracle {

using dln::Matrix;

inline Matrix random_matrix(dln::Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  std::vector<double> v(r * c);
  for (double& x : v) x = scale * rng.normal();
  return Matrix(r, c, std::move(v));
}

inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  std::vector<double> out(a.rows() * b.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      for (std::size_t k = 0; k < a.cols(); ++k) out[i * b.cols() + j] += a(i, k) * b(k, j);
  return Matrix(a.rows(), b.cols(), std::move(out));
}

inline Matrix naive_transpose(const Matrix& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out[j * a.rows() + i] = a(i, j);
  return Matrix(a.cols(), a.rows(), std::move(out));
}

// Tr(A^T B) from the explicit product.
inline double trace_inner(const Matrix& a, const Matrix& b) {
  const Matrix p = naive_matmul(naive_transpose(a), b);
  double t = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) t += p(i, i);
  return t;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.entries()[i] - b.entries()[i]));
  return m;
}

inline double fro(const Matrix& a) {
  double s = 0.0;
  for (double x : a.entries()) s += x * x;
  return std::sqrt(s);
}

// Solves M Z = R (M square, nonsingular) by Gaussian elimination with
// partial pivoting; R may have several columns.
inline Matrix gauss_solve(const Matrix& m, const Matrix& r) {
  const std::size_t n = m.rows();
  const std::size_t k = r.cols();
  std::vector<std::vector<double>> aug(n, std::vector<double>(n + k));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) aug[i][j] = m(i, j);
    for (std::size_t j = 0; j < k; ++j) aug[i][n + j] = r(i, j);
  }
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t i = c + 1; i < n; ++i)
      if (std::abs(aug[i][c]) > std::abs(aug[p][c])) p = i;
    std::swap(aug[c], aug[p]);
    if (aug[c][c] == 0.0) throw std::runtime_error("singular system");
    for (std::size_t i = 0; i < n; ++i) {
      if (i == c) continue;
      const double f = aug[i][c] / aug[c][c];
      for (std::size_t j = c; j < n + k; ++j) aug[i][j] -= f * aug[c][j];
    }
  }
  std::vector<double> z(n * k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) z[i * k + j] = aug[i][n + j] / aug[i][i];
  return Matrix(n, k, std::move(z));
}

// Least-squares minimizer of (1/N) ||A X - Y||^2 for full-row-rank X via the
// normal equations (X X^T) A^T = X Y^T.
inline Matrix normal_equations_fit(const Matrix& x, const Matrix& y) {
  const Matrix xt = naive_transpose(x);
  const Matrix at = gauss_solve(naive_matmul(x, xt), naive_matmul(x, naive_transpose(y)));
  return naive_transpose(at);
}

inline double mse(const Matrix& a, const Matrix& x, const Matrix& y) {
  const Matrix p = naive_matmul(a, x);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p.entries()[i] - y.entries()[i];
    s += d * d;
  }
  return s / static_cast<double>(x.cols());
}

// Central difference of t -> F(s + t H_k) at t = 0, where H_k perturbs layer k only.
inline double directional_derivative(const std::function<double(const dln::WeightStack&)>& f,
                                     const dln::WeightStack& s, std::size_t k, const Matrix& h,
                                     double step) {
  auto shifted = [&](double t) {
    const Matrix& w = s.layer(k);
    std::vector<double> v(w.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = w.entries()[i] + t * h.entries()[i];
    return s.with_layer(k, Matrix(w.rows(), w.cols(), std::move(v)));
  };
  return (f(shifted(step)) - f(shifted(-step))) / (2.0 * step);
}

}  // namespace oracle

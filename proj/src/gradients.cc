#include "dln/gradients.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dln/error.hpp"

namespace dln {

double LayerGradients::norm() const {
  double s = 0.0;
  for (const Matrix& g : layers) {
    const double n = frobenius_norm(g);
    s += n * n;
  }
  return std::sqrt(s);
}

std::vector<double> LayerGradients::layer_norms() const {
  std::vector<double> out;
  out.reserve(layers.size());
  for (const Matrix& g : layers) out.push_back(frobenius_norm(g));
  return out;
}

double objective(const WeightStack& s, const LossSpec& spec) { return loss_value(spec, product(s)); }

LayerGradients analytic_layer_grads(const TruncatedProducts& tp, const Matrix& grad_at_product) {
  LayerGradients out;
  for (std::size_t k = 1; k <= tp.depth(); ++k) {
    out.layers.push_back(
        matmul(matmul(transpose(tp.plus(k + 1)), grad_at_product), transpose(tp.minus(k - 1))));
  }
  return out;
}

LayerGradients analytic_layer_grads(const WeightStack& s, const LossSpec& spec) {
  const TruncatedProducts tp(s);
  return analytic_layer_grads(tp, loss_grad(spec, tp.full()));
}

double default_fd_step() { return std::cbrt(std::numeric_limits<double>::epsilon()); }

LayerGradients fd_layer_grads(const WeightStack& s, const LossSpec& spec, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::kInvalidArgument, "finite-difference step must be > 0");
  LayerGradients out;
  for (std::size_t k = 1; k <= s.depth(); ++k) {
    const Matrix& w = s.layer(k);
    std::vector<double> g(w.size());
    for (std::size_t i = 0; i < w.rows(); ++i) {
      for (std::size_t j = 0; j < w.cols(); ++j) {
        const double step = h * (1.0 + std::abs(w(i, j)));
        const double up = objective(s.with_layer(k, w.with_entry(i, j, w(i, j) + step)), spec);
        const double down = objective(s.with_layer(k, w.with_entry(i, j, w(i, j) - step)), spec);
        g[i * w.cols() + j] = (up - down) / (2.0 * step);
      }
    }
    out.layers.emplace_back(w.rows(), w.cols(), std::move(g));
  }
  return out;
}

double grad_check(const WeightStack& s, const LossSpec& spec, double h) {
  const LayerGradients analytic = analytic_layer_grads(s, spec);
  const LayerGradients fd = fd_layer_grads(s, spec, h);
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.layers.size(); ++k) {
    const auto a = analytic.layers[k].entries();
    const auto f = fd.layers[k].entries();
    for (std::size_t i = 0; i < a.size(); ++i) {
      worst = std::max(worst, std::abs(a[i] - f[i]) / (1.0 + std::abs(a[i]) + std::abs(f[i])));
    }
  }
  return worst;
}

}  // namespace dln

#pragma once

#include <vector>

#include "dln/linalg.hpp"
#include "dln/losses.hpp"
#include "dln/network.hpp"

namespace dln {

/// One gradient per layer, each shaped like the layer it differentiates.
struct LayerGradients {
  std::vector<Matrix> layers;

  /// Frobenius norm of the stacked gradient.
  double norm() const;
  std::vector<double> layer_norms() const;
};

/// F(W_1..W_L) = f(W_L ... W_1).
double objective(const WeightStack& s, const LossSpec& spec);

/// grad_{W_k} F = W_{k+1,+}^T grad f(A) W_{k-1,-}^T with the empty products
/// read as identities, which covers the k = 1 and k = L endpoints.
LayerGradients analytic_layer_grads(const WeightStack& s, const LossSpec& spec);
LayerGradients analytic_layer_grads(const TruncatedProducts& tp, const Matrix& grad_at_product);

/// Default central-difference step: cbrt(machine epsilon).
double default_fd_step();

/// Central differences of F, entry by entry, with step h * (1 + |w_ij|).
LayerGradients fd_layer_grads(const WeightStack& s, const LossSpec& spec, double h);

/// max |analytic - fd| / (1 + |analytic| + |fd|) over every layer entry.
double grad_check(const WeightStack& s, const LossSpec& spec, double h = default_fd_step());

}  // namespace dln

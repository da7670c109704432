#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "dln/linalg.hpp"

namespace dln {

/// Inputs X (d_0 x N, one sample per column) and targets Y (d_L x N).
class Dataset {
 public:
  Dataset(Matrix x, Matrix y);

  const Matrix& x() const noexcept { return x_; }
  const Matrix& y() const noexcept { return y_; }
  std::size_t samples() const noexcept { return x_.cols(); }
  std::size_t input_dim() const noexcept { return x_.rows(); }
  std::size_t output_dim() const noexcept { return y_.rows(); }

 private:
  Matrix x_;
  Matrix y_;
};

enum class LossKind {
  kMse,             // (1/N) sum ||y - A x||^2
  kLogistic,        // (1/N) sum log(1 + exp(-y A x)), y in {-1, +1}, d_L = 1
  kSoftmaxXent,     // (1/N) sum logsumexp(A x) - (A x)_label, Y one-hot
  kCexNonsmooth,    // |x| + max(1 - y, 0) - 1 on A = (x, y)^T
  kIndefiniteQuad,  // x^2 - y^2 on A = (x, y)^T
};

std::string_view to_string(LossKind kind);
std::optional<LossKind> parse_loss_kind(std::string_view name);

/// f(A) for one of the supported losses. Copies share the dataset.
class LossSpec {
 public:
  static LossSpec mse(Dataset data);
  static LossSpec logistic(Dataset data);
  static LossSpec softmax(Dataset data);
  static LossSpec nonsmooth_counterexample();
  static LossSpec indefinite_quadratic();
  /// Dispatches on kind; the three dataset losses require `data`.
  static LossSpec make(LossKind kind, std::optional<Dataset> data);

  LossKind kind() const noexcept { return kind_; }
  bool has_data() const noexcept { return data_ != nullptr; }
  const Dataset& data() const;
  /// Class index per sample (softmax only).
  const std::vector<std::size_t>& labels() const noexcept { return labels_; }

  /// g(A) := f(A^T). Applying twice gives back the original.
  bool transposed() const noexcept { return transposed_; }
  LossSpec transposed_view() const;

  /// Shape of the argument A (already accounting for transposition).
  std::size_t arg_rows() const;
  std::size_t arg_cols() const;

  bool convex() const noexcept { return kind_ != LossKind::kIndefiniteQuad; }
  /// Differentiable everywhere (CEX has kinks).
  bool smooth() const noexcept { return kind_ != LossKind::kCexNonsmooth; }
  /// ||Y||_fro, or 0 without a dataset.
  double target_norm() const;

 private:
  LossSpec(LossKind kind, std::shared_ptr<const Dataset> data);

  LossKind kind_;
  std::shared_ptr<const Dataset> data_;
  std::vector<std::size_t> labels_;
  bool transposed_ = false;
};

inline constexpr double kKinkTolerance = 1e-12;

double loss_value(const LossSpec& spec, const Matrix& a);

/// Frobenius gradient of f at A. Throws kNonsmoothAtPoint on a CEX kink.
Matrix loss_grad(const LossSpec& spec, const Matrix& a);

/// f(b) - f(a), evaluated without the cancellation of subtracting two
/// nearly equal losses. Line searches rely on this once gradients are tiny.
double loss_delta(const LossSpec& spec, const Matrix& a, const Matrix& b);

struct ConvexOptions {
  std::size_t max_iters = 200000;
  double grad_tol = 1e-10;
  double pinv_cutoff = kDefaultKernelTol;
  /// When false, hitting max_iters returns the last iterate; callers must
  /// then check grad_norm against grad_tol themselves.
  bool throw_on_cap = true;
};

struct ConvexOptimum {
  Matrix a;
  double value;
  double grad_norm;
  std::size_t iterations;  // 0 for the closed form
};

/// Minimizer of f over all d_L x d_0 matrices. MSE uses A* = Y X^T (X X^T)^+;
/// the other smooth convex losses use Armijo gradient descent from A = 0 and
/// throw kIterationCap if the gradient tolerance is not reached.
ConvexOptimum convex_optimum(const LossSpec& spec, std::size_t d_out, std::size_t d_in,
                             const ConvexOptions& opts = {});

}  // namespace dln

#include "dln/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dln/error.hpp"

namespace dln {

Dataset::Dataset(Matrix x, Matrix y) : x_(std::move(x)), y_(std::move(y)) {
  if (x_.cols() != y_.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "X and Y must have the same number of samples");
  }
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kMse: return "mse";
    case LossKind::kLogistic: return "logistic";
    case LossKind::kSoftmaxXent: return "softmax";
    case LossKind::kCexNonsmooth: return "cex_nonsmooth";
    case LossKind::kIndefiniteQuad: return "indefinite_quad";
  }
  return "unknown";
}

std::optional<LossKind> parse_loss_kind(std::string_view name) {
  for (LossKind k : {LossKind::kMse, LossKind::kLogistic, LossKind::kSoftmaxXent,
                     LossKind::kCexNonsmooth, LossKind::kIndefiniteQuad}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

LossSpec::LossSpec(LossKind kind, std::shared_ptr<const Dataset> data)
    : kind_(kind), data_(std::move(data)) {}

LossSpec LossSpec::mse(Dataset data) {
  return LossSpec(LossKind::kMse, std::make_shared<const Dataset>(std::move(data)));
}

LossSpec LossSpec::logistic(Dataset data) {
  if (data.output_dim() != 1) {
    throw Error(ErrorCode::kInvalidArgument, "logistic loss needs a single output row");
  }
  for (double y : data.y().entries()) {
    if (y != 1.0 && y != -1.0) {
      throw Error(ErrorCode::kInvalidArgument, "logistic targets must be +1 or -1");
    }
  }
  return LossSpec(LossKind::kLogistic, std::make_shared<const Dataset>(std::move(data)));
}

LossSpec LossSpec::softmax(Dataset data) {
  const Matrix& y = data.y();
  std::vector<std::size_t> labels(data.samples());
  for (std::size_t i = 0; i < y.cols(); ++i) {
    std::size_t ones = 0;
    for (std::size_t c = 0; c < y.rows(); ++c) {
      if (y(c, i) == 1.0) {
        labels[i] = c;
        ++ones;
      } else if (y(c, i) != 0.0) {
        throw Error(ErrorCode::kInvalidArgument, "softmax targets must be one-hot");
      }
    }
    if (ones != 1) throw Error(ErrorCode::kInvalidArgument, "softmax targets must be one-hot");
  }
  LossSpec spec(LossKind::kSoftmaxXent, std::make_shared<const Dataset>(std::move(data)));
  spec.labels_ = std::move(labels);
  return spec;
}

LossSpec LossSpec::nonsmooth_counterexample() { return LossSpec(LossKind::kCexNonsmooth, nullptr); }

LossSpec LossSpec::indefinite_quadratic() { return LossSpec(LossKind::kIndefiniteQuad, nullptr); }

LossSpec LossSpec::make(LossKind kind, std::optional<Dataset> data) {
  const bool needs_data =
      kind == LossKind::kMse || kind == LossKind::kLogistic || kind == LossKind::kSoftmaxXent;
  if (needs_data && !data) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string("loss '") + std::string(to_string(kind)) + "' requires a dataset");
  }
  switch (kind) {
    case LossKind::kMse: return mse(std::move(*data));
    case LossKind::kLogistic: return logistic(std::move(*data));
    case LossKind::kSoftmaxXent: return softmax(std::move(*data));
    case LossKind::kCexNonsmooth: return nonsmooth_counterexample();
    case LossKind::kIndefiniteQuad: return indefinite_quadratic();
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown loss kind");
}

const Dataset& LossSpec::data() const {
  if (!data_) throw Error(ErrorCode::kInvalidArgument, "loss has no dataset");
  return *data_;
}

LossSpec LossSpec::transposed_view() const {
  LossSpec out = *this;
  out.transposed_ = !transposed_;
  return out;
}

namespace {

std::size_t base_rows(const LossSpec& s) { return s.has_data() ? s.data().output_dim() : 2; }
std::size_t base_cols(const LossSpec& s) { return s.has_data() ? s.data().input_dim() : 1; }

}  // namespace

std::size_t LossSpec::arg_rows() const { return transposed_ ? base_cols(*this) : base_rows(*this); }
std::size_t LossSpec::arg_cols() const { return transposed_ ? base_rows(*this) : base_cols(*this); }

double LossSpec::target_norm() const { return data_ ? frobenius_norm(data_->y()) : 0.0; }

namespace {

void check_shape(const LossSpec& spec, const Matrix& a) {
  if (a.rows() != spec.arg_rows() || a.cols() != spec.arg_cols()) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(to_string(spec.kind())) + " expects a " +
                    std::to_string(spec.arg_rows()) + "x" + std::to_string(spec.arg_cols()) +
                    " argument, got " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
}

// log(1 + exp(t)) without overflow.
double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

// 1 / (1 + exp(-t)).
double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// Stable log-sum-exp of column i of z and the softmax probabilities.
double column_lse(const Matrix& z, std::size_t i, std::vector<double>* probs) {
  double zmax = z(0, i);
  for (std::size_t c = 1; c < z.rows(); ++c) zmax = std::max(zmax, z(c, i));
  double s = 0.0;
  for (std::size_t c = 0; c < z.rows(); ++c) s += std::exp(z(c, i) - zmax);
  if (probs) {
    probs->resize(z.rows());
    for (std::size_t c = 0; c < z.rows(); ++c) (*probs)[c] = std::exp(z(c, i) - zmax) / s;
  }
  return zmax + std::log(s);
}

double value_untransposed(const LossSpec& spec, const Matrix& a) {
  switch (spec.kind()) {
    case LossKind::kMse: {
      const Dataset& d = spec.data();
      const Matrix r = matmul(a, d.x()) - d.y();
      const double n = frobenius_norm(r);
      return n * n / static_cast<double>(d.samples());
    }
    case LossKind::kLogistic: {
      const Dataset& d = spec.data();
      const Matrix z = matmul(a, d.x());
      double s = 0.0;
      for (std::size_t i = 0; i < d.samples(); ++i) s += softplus(-d.y()(0, i) * z(0, i));
      return s / static_cast<double>(d.samples());
    }
    case LossKind::kSoftmaxXent: {
      const Dataset& d = spec.data();
      const Matrix z = matmul(a, d.x());
      double s = 0.0;
      for (std::size_t i = 0; i < d.samples(); ++i) {
        s += column_lse(z, i, nullptr) - z(spec.labels()[i], i);
      }
      return s / static_cast<double>(d.samples());
    }
    case LossKind::kCexNonsmooth: {
      const double x = a(0, 0), y = a(1, 0);
      return std::abs(x) + std::max(1.0 - y, 0.0) - 1.0;
    }
    case LossKind::kIndefiniteQuad: {
      const double x = a(0, 0), y = a(1, 0);
      return x * x - y * y;
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown loss kind");
}

Matrix grad_untransposed(const LossSpec& spec, const Matrix& a) {
  switch (spec.kind()) {
    case LossKind::kMse: {
      const Dataset& d = spec.data();
      const Matrix r = matmul(a, d.x()) - d.y();
      return scale(matmul(r, transpose(d.x())), 2.0 / static_cast<double>(d.samples()));
    }
    case LossKind::kLogistic: {
      const Dataset& d = spec.data();
      const Matrix z = matmul(a, d.x());
      const std::size_t n = d.samples();
      std::vector<double> g(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double y = d.y()(0, i);
        g[i] = -y * sigmoid(-y * z(0, i));
      }
      return scale(matmul(Matrix(1, n, std::move(g)), transpose(d.x())), 1.0 / static_cast<double>(n));
    }
    case LossKind::kSoftmaxXent: {
      const Dataset& d = spec.data();
      const Matrix z = matmul(a, d.x());
      const std::size_t classes = z.rows(), n = d.samples();
      std::vector<double> r(classes * n);
      std::vector<double> p;
      for (std::size_t i = 0; i < n; ++i) {
        column_lse(z, i, &p);
        for (std::size_t c = 0; c < classes; ++c) r[c * n + i] = p[c] - d.y()(c, i);
      }
      return scale(matmul(Matrix(classes, n, std::move(r)), transpose(d.x())),
                   1.0 / static_cast<double>(n));
    }
    case LossKind::kCexNonsmooth: {
      const double x = a(0, 0), y = a(1, 0);
      if (std::abs(x) <= kKinkTolerance || std::abs(y - 1.0) <= kKinkTolerance) {
        throw Error(ErrorCode::kNonsmoothAtPoint,
                    "|x| + (1-y)_+ - 1 has no gradient at (" + std::to_string(x) + ", " +
                        std::to_string(y) + ")");
      }
      return Matrix(2, 1, {x > 0.0 ? 1.0 : -1.0, y < 1.0 ? -1.0 : 0.0});
    }
    case LossKind::kIndefiniteQuad: return Matrix(2, 1, {2.0 * a(0, 0), -2.0 * a(1, 0)});
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown loss kind");
}

// Beyond this the log1p/expm1 form loses its edge and may overflow.
constexpr double kDeltaDirectThreshold = 30.0;

double delta_untransposed(const LossSpec& spec, const Matrix& a, const Matrix& b) {
  switch (spec.kind()) {
    case LossKind::kMse: {
      const Dataset& d = spec.data();
      const Matrix r = matmul(a, d.x()) - d.y();
      const Matrix dx = matmul(b - a, d.x());
      const double ndx = frobenius_norm(dx);
      return (2.0 * frobenius_inner(r, dx) + ndx * ndx) / static_cast<double>(d.samples());
    }
    case LossKind::kLogistic: {
      const Dataset& d = spec.data();
      const Matrix z = matmul(a, d.x());
      const Matrix dz = matmul(b - a, d.x());
      double s = 0.0;
      for (std::size_t i = 0; i < d.samples(); ++i) {
        const double y = d.y()(0, i);
        const double m = y * z(0, i), dm = y * dz(0, i);
        if (std::abs(dm) > kDeltaDirectThreshold) {
          s += softplus(-m - dm) - softplus(-m);
        } else {
          // softplus(-m-dm) - softplus(-m) = log1p(sigmoid(-m) * expm1(-dm))
          s += std::log1p(sigmoid(-m) * std::expm1(-dm));
        }
      }
      return s / static_cast<double>(d.samples());
    }
    case LossKind::kSoftmaxXent: {
      const Dataset& d = spec.data();
      const Matrix z = matmul(a, d.x());
      const Matrix dz = matmul(b - a, d.x());
      const Matrix zb = matmul(b, d.x());
      double s = 0.0;
      std::vector<double> p;
      for (std::size_t i = 0; i < d.samples(); ++i) {
        const double lse_a = column_lse(z, i, &p);
        double big = 0.0;
        for (std::size_t c = 0; c < dz.rows(); ++c) big = std::max(big, std::abs(dz(c, i)));
        double dlse;
        if (big > kDeltaDirectThreshold) {
          dlse = column_lse(zb, i, nullptr) - lse_a;
        } else {
          // lse(z + dz) - lse(z) = log(sum_c p_c exp(dz_c))
          double t = 0.0;
          for (std::size_t c = 0; c < dz.rows(); ++c) t += p[c] * std::expm1(dz(c, i));
          dlse = std::log1p(t);
        }
        s += dlse - dz(spec.labels()[i], i);
      }
      return s / static_cast<double>(d.samples());
    }
    case LossKind::kCexNonsmooth:
      return value_untransposed(spec, b) - value_untransposed(spec, a);
    case LossKind::kIndefiniteQuad: {
      const double dx = b(0, 0) - a(0, 0), dy = b(1, 0) - a(1, 0);
      return dx * (b(0, 0) + a(0, 0)) - dy * (b(1, 0) + a(1, 0));
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown loss kind");
}

}  // namespace

double loss_value(const LossSpec& spec, const Matrix& a) {
  check_shape(spec, a);
  return spec.transposed() ? value_untransposed(spec, transpose(a)) : value_untransposed(spec, a);
}

Matrix loss_grad(const LossSpec& spec, const Matrix& a) {
  check_shape(spec, a);
  return spec.transposed() ? transpose(grad_untransposed(spec, transpose(a)))
                           : grad_untransposed(spec, a);
}

double loss_delta(const LossSpec& spec, const Matrix& a, const Matrix& b) {
  check_shape(spec, a);
  check_shape(spec, b);
  return spec.transposed() ? delta_untransposed(spec, transpose(a), transpose(b))
                           : delta_untransposed(spec, a, b);
}

ConvexOptimum convex_optimum(const LossSpec& spec, std::size_t d_out, std::size_t d_in,
                             const ConvexOptions& opts) {
  if (!spec.smooth()) {
    throw Error(ErrorCode::kNotDifferentiable, "convex_optimum needs a differentiable loss");
  }
  if (!spec.convex()) {
    throw Error(ErrorCode::kInvalidArgument, "convex_optimum needs a convex loss");
  }
  if (d_out != spec.arg_rows() || d_in != spec.arg_cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "requested shape does not match the loss");
  }

  if (spec.kind() == LossKind::kMse) {
    const Dataset& d = spec.data();
    const Matrix xt = transpose(d.x());
    Matrix a = matmul(matmul(d.y(), xt), pseudo_inverse(matmul(d.x(), xt), opts.pinv_cutoff));
    if (spec.transposed()) a = transpose(a);
    const double value = loss_value(spec, a);
    const double gn = frobenius_norm(loss_grad(spec, a));
    return ConvexOptimum{std::move(a), value, gn, 0};
  }

  constexpr double kArmijo = 1e-4;
  constexpr double kBacktrack = 0.5;
  constexpr double kMinStep = 1e-16;
  Matrix a = Matrix::zeros(d_out, d_in);
  Matrix g = loss_grad(spec, a);
  double gn = frobenius_norm(g);
  double step = 1.0;
  std::size_t it = 0;
  for (; it < opts.max_iters && gn > opts.grad_tol; ++it) {
    // Warm start from twice the last accepted step.
    double t = std::min(2.0 * step, 1e6);
    bool accepted = false;
    for (; t >= kMinStep; t *= kBacktrack) {
      Matrix trial = a - scale(g, t);
      if (loss_delta(spec, a, trial) <= -kArmijo * t * gn * gn) {
        a = std::move(trial);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (opts.throw_on_cap) {
        throw Error(ErrorCode::kIterationCap,
                    "line search underflow in convex_optimum at gradient norm " +
                        std::to_string(gn));
      }
      break;
    }
    step = t;
    g = loss_grad(spec, a);
    gn = frobenius_norm(g);
  }
  if (gn > opts.grad_tol && opts.throw_on_cap) {
    throw Error(ErrorCode::kIterationCap, "convex_optimum stopped after " + std::to_string(it) +
                                              " iterations with gradient norm " +
                                              std::to_string(gn));
  }
  const double value = loss_value(spec, a);
  return ConvexOptimum{std::move(a), value, gn, it};
}

}  // namespace dln

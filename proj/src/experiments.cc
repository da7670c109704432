#include "dln/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <thread>

#include "dln/error.hpp"
#include "dln/gradients.hpp"
#include "dln/io.hpp"

namespace dln {

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::kConverged: return "converged";
    case RunStatus::kMaxIters: return "max_iters";
    case RunStatus::kLineSearchFailed: return "line_search_failed";
  }
  return "unknown";
}

std::string_view to_string(RunClass c) {
  switch (c) {
    case RunClass::kGlobalOptimal: return "global_optimal";
    case RunClass::kSaddleStalled: return "saddle_stalled";
    case RunClass::kNonConverged: return "non_converged";
    case RunClass::kFalsifier: return "falsifier";
  }
  return "unknown";
}

namespace {

WeightStack step_along(const WeightStack& s, const LayerGradients& g, double t) {
  std::vector<Matrix> layers;
  layers.reserve(s.depth());
  for (std::size_t k = 0; k < s.depth(); ++k) layers.push_back(s.layers()[k] - scale(g.layers[k], t));
  return WeightStack(s.dims(), std::move(layers));
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. Each result lands in
// its own slot, so the output order never depends on scheduling.
template <typename T>
std::vector<T> parallel_map(std::size_t n, std::size_t workers, const std::function<T(std::size_t)>& fn) {
  std::vector<std::optional<T>> slots(n);
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) slots[i].emplace(fn(i));
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (std::size_t i = next++; i < n; i = next++) {
            try {
              slots[i].emplace(fn(i));
            } catch (...) {
              std::lock_guard lock(failure_mu);
              if (!failure) failure = std::current_exception();
            }
          }
        });
      }
    }
    if (failure) std::rethrow_exception(failure);
  }
  std::vector<T> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

constexpr std::uint64_t kDataStream = 0xD1B54A32D192ED03ULL;

bool trace_monotone(const std::vector<TracePoint>& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i].loss > trace[i - 1].loss) return false;
  }
  return true;
}

}  // namespace

RunResult gd_optimize(const WeightStack& s0, const LossSpec& spec, const OptimizerConfig& opt) {
  const auto started = std::chrono::steady_clock::now();
  RunResult out{s0};
  WeightStack s = s0;
  Matrix a = product(s);
  double f = loss_value(spec, a);
  out.initial_loss = f;

  LayerGradients g = analytic_layer_grads(s, spec);
  double gn = g.norm();
  out.trace.push_back({0, f, gn, 0.0});

  std::size_t it = 0;
  double last_step = 0.0;
  out.status = RunStatus::kMaxIters;
  while (true) {
    if (gn <= opt.grad_tol) {
      out.status = RunStatus::kConverged;
      break;
    }
    if (it >= opt.max_iters) break;

    double t = opt.initial_step;
    bool accepted = false;
    while (t >= opt.min_step) {
      WeightStack trial = step_along(s, g, t);
      Matrix trial_a = product(trial);
      const double delta = loss_delta(spec, a, trial_a);
      if (delta <= -opt.armijo_c * t * gn * gn) {
        s = std::move(trial);
        a = std::move(trial_a);
        f += delta;
        accepted = true;
        break;
      }
      t *= opt.backtrack;
    }
    if (!accepted) {
      out.status = RunStatus::kLineSearchFailed;
      out.diagnostics = "step fell below " + format_double(opt.min_step) + " at iteration " +
                        std::to_string(it) + " with gradient norm " + format_double(gn) +
                        " and loss " + format_double(f);
      break;
    }
    ++it;
    last_step = t;
    g = analytic_layer_grads(s, spec);
    gn = g.norm();
    if (opt.trace_stride > 0 && it % opt.trace_stride == 0) out.trace.push_back({it, f, gn, t});
  }
  if (out.trace.back().iter != it) out.trace.push_back({it, f, gn, last_step});

  out.final_stack = std::move(s);
  out.final_loss = f;
  out.final_grad_norm = gn;
  out.iterations = it;
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

Dataset synthetic_dataset(LossKind kind, std::size_t d_in, std::size_t d_out, std::size_t n,
                          bool separable, Rng& rng) {
  std::vector<double> x(d_in * n);
  for (double& v : x) v = rng.normal();
  Matrix xm(d_in, n, std::move(x));
  switch (kind) {
    case LossKind::kMse: {
      std::vector<double> y(d_out * n);
      for (double& v : y) v = rng.normal();
      return Dataset(std::move(xm), Matrix(d_out, n, std::move(y)));
    }
    case LossKind::kLogistic: {
      if (d_out != 1) throw Error(ErrorCode::kInvalidArgument, "logistic data needs d_L = 1");
      std::vector<double> y(n);
      if (separable) {
        std::vector<double> w(d_in);
        for (double& v : w) v = rng.normal();
        for (std::size_t i = 0; i < n; ++i) {
          double z = 0.0;
          for (std::size_t j = 0; j < d_in; ++j) z += w[j] * xm(j, i);
          y[i] = z >= 0.0 ? 1.0 : -1.0;
        }
      } else {
        for (double& v : y) v = rng.uniform() < 0.5 ? -1.0 : 1.0;
      }
      return Dataset(std::move(xm), Matrix(1, n, std::move(y)));
    }
    case LossKind::kSoftmaxXent: {
      std::vector<double> y(d_out * n, 0.0);
      for (std::size_t i = 0; i < n; ++i) y[rng.below(d_out) * n + i] = 1.0;
      return Dataset(std::move(xm), Matrix(d_out, n, std::move(y)));
    }
    default:
      throw Error(ErrorCode::kInvalidArgument,
                  std::string("no synthetic data for loss ") + std::string(to_string(kind)));
  }
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kConfig, what); };
  if (restarts < 1) fail("restarts must be >= 1");
  if (optimizer.max_iters < 1) fail("optimizer.max_iters must be >= 1");
  if (!(optimizer.grad_tol > 0.0)) fail("optimizer.grad_tol must be > 0");
  if (!(optimizer.armijo_c > 0.0 && optimizer.armijo_c < 1.0)) fail("optimizer.armijo_c must be in (0, 1)");
  if (!(optimizer.backtrack > 0.0 && optimizer.backtrack < 1.0)) fail("optimizer.backtrack must be in (0, 1)");
  if (!(optimizer.initial_step > 0.0)) fail("optimizer.initial_step must be > 0");
  if (!(tolerances.tau > 0.0)) fail("tolerances.tau must be > 0");
  for (const auto& [name, v] : {std::pair{"tolerances.tol_crit", tolerances.tol_crit},
                                std::pair{"tolerances.tol_grad", tolerances.tol_grad},
                                std::pair{"tolerances.tol_value", tolerances.tol_value}}) {
    if (v && !(*v > 0.0)) fail(std::string(name) + " must be > 0");
  }
  if (!(epsilon0 > 0.0)) fail("epsilon0 must be > 0");
  if (data.csv_path.empty() && data.n_samples < 1) fail("dataset.n_samples must be >= 1");
  if (workers < 1) fail("workers must be >= 1");
}

Dataset experiment_dataset(const ExperimentConfig& cfg) {
  if (!cfg.data.csv_path.empty()) {
    return read_dataset_csv(cfg.data.csv_path, cfg.dims.input(), cfg.dims.output());
  }
  Rng rng = Rng::stream(cfg.seed, kDataStream);
  return synthetic_dataset(cfg.loss, cfg.dims.input(), cfg.dims.output(), cfg.data.n_samples,
                           cfg.data.separable, rng);
}

Theorem1Report theorem1_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (!structural_condition(cfg.dims)) {
    throw Error(ErrorCode::kStructuralViolation,
                "a hidden layer is narrower than min(d_0, d_L); the theorem does not apply");
  }
  const LossSpec spec = LossSpec::make(cfg.loss, experiment_dataset(cfg));
  if (!spec.convex() || !spec.smooth()) {
    throw Error(ErrorCode::kInvalidArgument, "theorem1_experiment needs a convex differentiable loss");
  }

  Theorem1Report rep{cfg};
  ConvexOptions copts;
  copts.max_iters = cfg.oracle_max_iters;
  copts.throw_on_cap = false;
  const ConvexOptimum oracle = convex_optimum(spec, spec.arg_rows(), spec.arg_cols(), copts);
  rep.optimum = oracle.value;
  rep.oracle_grad_norm = oracle.grad_norm;
  rep.oracle_converged = oracle.grad_norm <= copts.grad_tol;
  rep.tol_value = cfg.tolerances.tol_value.value_or(1e-6 * (1.0 + std::abs(oracle.value)));

  const std::function<RunSummary(std::size_t)> one_run = [&](std::size_t r) {
    Rng rng = Rng::stream(cfg.seed, r);
    RunResult run = gd_optimize(random_stack(cfg.dims, rng), spec, cfg.optimizer);

    VerifierConfig vcfg;
    vcfg.tol_crit = cfg.tolerances.tol_crit;
    vcfg.tol_grad = cfg.tolerances.tol_grad;
    vcfg.tol_value = rep.tol_value;
    vcfg.tau = cfg.tolerances.tau;
    vcfg.n_probe = cfg.probes;
    vcfg.epsilon0 = cfg.epsilon0;
    vcfg.seed = cfg.seed ^ r;
    vcfg.known_optimum = oracle.value;
    const CriticalPointReport cp = verify_theorem3(run.final_stack, spec, vcfg);

    RunSummary sum{};
    sum.restart = r;
    sum.initial_loss = run.initial_loss;
    sum.final_loss = run.final_loss;
    sum.value_gap = cp.value - oracle.value;
    sum.final_grad_norm = run.final_grad_norm;
    sum.grad_at_product_norm = cp.grad_at_product_norm;
    sum.iterations = run.iterations;
    sum.status = run.status;
    sum.verdict = cp.verdict;
    sum.monotone = trace_monotone(run.trace) && run.final_loss <= run.initial_loss;
    if (sum.value_gap <= rep.tol_value) {
      sum.run_class = RunClass::kGlobalOptimal;
    } else if (cp.critical() && cp.grad_at_product_norm <= cp.tol_grad) {
      // First-order optimal for a convex f yet above the optimum: this is
      // what a sub-optimal local minimum would look like.
      sum.run_class = RunClass::kFalsifier;
    } else if (cp.critical()) {
      sum.run_class = RunClass::kSaddleStalled;
    } else {
      sum.run_class = RunClass::kNonConverged;
    }
    return sum;
  };
  rep.runs = parallel_map(cfg.restarts, cfg.workers, one_run);

  for (const RunSummary& r : rep.runs) {
    switch (r.run_class) {
      case RunClass::kGlobalOptimal: ++rep.global_optimal; break;
      case RunClass::kSaddleStalled: ++rep.saddle_stalled; break;
      case RunClass::kNonConverged: ++rep.non_converged; break;
      case RunClass::kFalsifier: ++rep.falsifiers; break;
    }
    rep.all_monotone = rep.all_monotone && r.monotone;
  }
  return rep;
}

std::pair<double, double> sample_lifted_neighbor(Rng& rng, double radius) {
  const double w1 = rng.uniform(-radius, radius);
  const double rho = radius * std::sqrt(rng.uniform());
  const double theta = 2.0 * std::numbers::pi * rng.uniform();
  const double w2x = 1.0 + rho * std::cos(theta);
  const double w2y = rho * std::sin(theta);
  return {w2x * w1, w2y * w1};
}

namespace {

bool in_truncated_cone(double x, double y) {
  return std::abs(x) <= 0.5 && std::abs(y) <= 0.5 * std::abs(x);
}

// Absolute slack for comparisons that hold exactly in real arithmetic.
constexpr double kRoundoffSlack = 1e-15;
constexpr double kZeroProduct = 1e-12;

}  // namespace

Theorem2Report theorem2_experiment(std::size_t n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw Error(ErrorCode::kInvalidArgument, "n_samples must be >= 1");
  const LossSpec f = LossSpec::nonsmooth_counterexample();
  const Matrix a_hat = matmul(Matrix::column({1.0, 0.0}), Matrix(1, 1, {0.0}));

  Theorem2Report rep;
  rep.n_samples = n_samples;
  rep.seed = seed;
  rep.value_at_minimizer = loss_value(f, a_hat);
  rep.optimum = loss_value(f, Matrix::column({0.0, 1.0}));
  rep.gap = rep.value_at_minimizer - rep.optimum;
  try {
    loss_grad(f, a_hat);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNonsmoothAtPoint) throw;
    rep.gradient_defined_at_minimizer = false;
  }

  Rng rng(seed);
  rep.min_sampled = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_samples; ++i) {
    const auto [x, y] = sample_lifted_neighbor(rng);
    const double v = loss_value(f, Matrix::column({x, y}));
    rep.min_sampled = std::min(rep.min_sampled, v);
    if (!in_truncated_cone(x, y)) ++rep.cone_violations;
    if (v < 0.5 * std::abs(x) - kRoundoffSlack) ++rep.bound_violations;
    if (v < rep.value_at_minimizer) ++rep.sign_violations;
    if (std::hypot(x, y) > kZeroProduct) {
      if (!(v > rep.value_at_minimizer)) ++rep.strict_violations;
    } else {
      ++rep.zero_products;
    }
  }
  return rep;
}

SaddleReport saddle_experiment(const DimChain& dims, const LossSpec& spec) {
  SaddleReport rep;
  rep.dims = dims.values();
  rep.claim_applies = dims.depth() >= 3;
  const WeightStack zero = zero_stack(dims);
  rep.residuals = critical_residuals(zero, spec);
  rep.residuals_exactly_zero =
      std::all_of(rep.residuals.begin(), rep.residuals.end(), [](double r) { return r == 0.0; });
  rep.grad_at_zero_norm = frobenius_norm(loss_grad(spec, product(zero)));
  return rep;
}

BottleneckReport bottleneck_experiment(const DimChain& dims, const Matrix& target,
                                       std::size_t restarts, std::uint64_t seed,
                                       const OptimizerConfig& opt) {
  if (structural_condition(dims)) {
    throw Error(ErrorCode::kInvalidArgument,
                "the structural condition holds; a bottleneck chain is required");
  }
  if (restarts < 1) throw Error(ErrorCode::kInvalidArgument, "restarts must be >= 1");
  if (target.rows() != dims.output() || target.cols() != dims.input()) {
    throw Error(ErrorCode::kDimensionMismatch, "target must be d_L x d_0");
  }

  BottleneckReport rep;
  rep.dims = dims.values();
  rep.seed = seed;
  rep.restarts = restarts;
  std::size_t r = std::min(dims.input(), dims.output());
  for (std::size_t l = 1; l < dims.depth(); ++l) r = std::min(r, dims[l]);
  rep.bottleneck_rank = r;
  rep.target_rank = rank_with_tolerance(target, kDefaultKernelTol);

  // With X = I the loss is ||A - Y||^2 / N, so the best rank-r fit drops the
  // trailing singular values of Y.
  const double n = static_cast<double>(dims.input());
  const SvdFactors svd = full_svd(target);
  double tail = 0.0;
  for (std::size_t i = r; i < svd.sigma.size(); ++i) tail += svd.sigma[i] * svd.sigma[i];
  rep.oracle_value = tail / n;
  rep.unconstrained_value = 0.0;

  const LossSpec spec = LossSpec::mse(Dataset(Matrix::identity(dims.input()), target));
  rep.best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < restarts; ++i) {
    Rng rng = Rng::stream(seed, i);
    const RunResult run = gd_optimize(random_stack(dims, rng), spec, opt);
    const double v = objective(run.final_stack, spec);
    rep.run_losses.push_back(v);
    rep.best_loss = std::min(rep.best_loss, v);
  }
  rep.oracle_gap = rep.best_loss - rep.oracle_value;
  rep.matches_oracle = std::abs(rep.oracle_gap) <= 1e-4;
  rep.above_unconstrained = rep.best_loss > rep.unconstrained_value;
  return rep;
}

NonconvexReport nonconvex_experiment(std::size_t n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw Error(ErrorCode::kInvalidArgument, "n_samples must be >= 1");
  const LossSpec f = LossSpec::indefinite_quadratic();
  NonconvexReport rep;
  rep.n_samples = n_samples;
  rep.seed = seed;

  const Matrix g0 = loss_grad(f, Matrix::zeros(2, 1));
  rep.grad_at_origin.assign(g0.entries().begin(), g0.entries().end());
  rep.value_along_y = loss_value(f, Matrix::column({0.0, rep.probe_t}));
  const double value_along_x = loss_value(f, Matrix::column({rep.probe_t, 0.0}));
  rep.origin_is_saddle = max_abs(g0) == 0.0 && rep.value_along_y < 0.0 && value_along_x > 0.0;

  const LossSpec& spec = f;
  const WeightStack hat(DimChain({1, 1, 2}), {Matrix(1, 1, {0.0}), Matrix::column({1.0, 0.0})});
  rep.value_at_minimizer = objective(hat, spec);

  Rng rng(seed);
  rep.min_sampled = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_samples; ++i) {
    const auto [x, y] = sample_lifted_neighbor(rng);
    const double v = loss_value(spec, Matrix::column({x, y}));
    rep.min_sampled = std::min(rep.min_sampled, v);
    if (!in_truncated_cone(x, y)) ++rep.cone_violations;
    // On the cone x^2 - y^2 >= 3/4 x^2; allow a few ulps of x^2.
    if (v < 0.75 * x * x * (1.0 - 8.0 * std::numeric_limits<double>::epsilon())) ++rep.bound_violations;
    if (v < rep.value_at_minimizer) ++rep.sign_violations;
  }
  return rep;
}

}  // namespace dln

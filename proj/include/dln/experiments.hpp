#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dln/landscape.hpp"
#include "dln/losses.hpp"
#include "dln/network.hpp"
#include "dln/random.hpp"

namespace dln {

// ---------------------------------------------------------------------------
// Gradient descent on the factorized objective.

struct OptimizerConfig {
  std::size_t max_iters = 20000;
  double grad_tol = 1e-9;
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  double initial_step = 1.0;
  double min_step = 1e-16;
  /// Keep every n-th iterate in the trace (the last one is always kept).
  std::size_t trace_stride = 25;
};

enum class RunStatus { kConverged, kMaxIters, kLineSearchFailed };
std::string_view to_string(RunStatus s);

struct TracePoint {
  std::size_t iter;
  double loss;
  double grad_norm;
  double step;  // accepted step leading to this iterate; 0 for the start
};

struct RunResult {
  WeightStack final_stack;
  double initial_loss = 0.0;
  /// Initial loss plus the accepted, cancellation-free decrements. Agrees with
  /// objective(final_stack) to roundoff and is non-increasing along the trace.
  double final_loss = 0.0;
  double final_grad_norm = 0.0;
  std::size_t iterations = 0;
  RunStatus status = RunStatus::kMaxIters;
  std::string diagnostics{};
  std::vector<TracePoint> trace{};
  double wall_seconds = 0.0;  // informational; never serialized
  std::optional<CriticalPointReport> report{};
};

/// Steepest descent on all layers jointly with Armijo backtracking from the
/// full initial step each iteration. Stops on the stacked gradient norm, the
/// iteration cap, or step underflow (reported, not thrown).
RunResult gd_optimize(const WeightStack& s0, const LossSpec& spec, const OptimizerConfig& opt);

// ---------------------------------------------------------------------------
// Data.

struct DatasetSource {
  std::string csv_path;  // empty: synthetic
  std::size_t n_samples = 32;
  /// Logistic only: labels from a random hyperplane instead of coin flips.
  bool separable = false;
};

/// X ~ N(0,1); targets per loss: Gaussian (MSE), random signs (logistic),
/// uniform class labels one-hot encoded (softmax).
Dataset synthetic_dataset(LossKind kind, std::size_t d_in, std::size_t d_out, std::size_t n,
                          bool separable, Rng& rng);

// ---------------------------------------------------------------------------
// Experiments.

struct Tolerances {
  double tau = kDefaultKernelTol;
  std::optional<double> tol_crit;
  std::optional<double> tol_grad;
  std::optional<double> tol_value;
};

struct ExperimentConfig {
  DimChain dims{{3, 4, 4, 2}};
  LossKind loss = LossKind::kMse;
  DatasetSource data;
  std::uint64_t seed = 1;
  std::size_t restarts = 100;
  OptimizerConfig optimizer;
  Tolerances tolerances;
  std::size_t probes = 2;
  double epsilon0 = 1e-3;
  std::size_t oracle_max_iters = 200000;
  /// Restarts run on this many threads; results do not depend on it.
  std::size_t workers = 1;

  void validate() const;
};

/// Dataset for `cfg`: loaded from CSV or drawn from the seed's data stream.
Dataset experiment_dataset(const ExperimentConfig& cfg);

enum class RunClass { kGlobalOptimal, kSaddleStalled, kNonConverged, kFalsifier };
std::string_view to_string(RunClass c);

struct RunSummary {
  std::size_t restart;
  double initial_loss;
  double final_loss;
  double value_gap;
  double final_grad_norm;
  double grad_at_product_norm;
  std::size_t iterations;
  RunStatus status;
  Verdict verdict;
  RunClass run_class;
  bool monotone;
};

struct Theorem1Report {
  ExperimentConfig config;
  double optimum = 0.0;
  bool oracle_converged = true;
  double oracle_grad_norm = 0.0;
  double tol_value = 0.0;
  std::size_t global_optimal = 0;
  std::size_t saddle_stalled = 0;
  std::size_t non_converged = 0;
  std::size_t falsifiers = 0;
  bool all_monotone = true;
  std::vector<RunSummary> runs{};
};

/// Multi-restart GD against the convex oracle. Throws kStructuralViolation if
/// the dimension chain has a bottleneck.
Theorem1Report theorem1_experiment(const ExperimentConfig& cfg);

struct Theorem2Report {
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  double value_at_minimizer = 0.0;  // f(W2 W1) at W1 = 0, W2 = (1, 0)
  double optimum = -1.0;
  double gap = 0.0;
  bool gradient_defined_at_minimizer = true;
  double min_sampled = 0.0;
  std::size_t cone_violations = 0;
  std::size_t bound_violations = 0;   // f < |x|/2
  std::size_t sign_violations = 0;    // f < 0
  std::size_t strict_violations = 0;  // product nonzero but f <= 0
  std::size_t zero_products = 0;
};

/// Samples the 1/4-neighborhood of the sub-optimal minimizer of the
/// non-smooth counterexample.
Theorem2Report theorem2_experiment(std::size_t n_samples, std::uint64_t seed);

struct SaddleReport {
  std::vector<std::size_t> dims;
  bool claim_applies = false;  // L >= 3
  std::vector<double> residuals;
  bool residuals_exactly_zero = false;
  double grad_at_zero_norm = 0.0;
};

/// Evaluates the all-zero stack.
SaddleReport saddle_experiment(const DimChain& dims, const LossSpec& spec);

struct BottleneckReport {
  std::vector<std::size_t> dims;
  std::uint64_t seed = 0;
  std::size_t restarts = 0;
  std::size_t bottleneck_rank = 0;
  std::size_t target_rank = 0;
  double oracle_value = 0.0;        // best rank-r fit, truncated SVD of Y
  double unconstrained_value = 0.0;
  double best_loss = 0.0;
  double oracle_gap = 0.0;          // best_loss - oracle_value
  bool matches_oracle = false;      // |gap| <= 1e-4
  bool above_unconstrained = false;
  std::vector<double> run_losses;
};

/// MSE with X = I and a hidden width below min(d_0, d_L). Throws
/// kInvalidArgument if the chain actually satisfies the structural condition.
BottleneckReport bottleneck_experiment(const DimChain& dims, const Matrix& target,
                                       std::size_t restarts, std::uint64_t seed,
                                       const OptimizerConfig& opt = {});

struct NonconvexReport {
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  std::vector<double> grad_at_origin;
  double probe_t = 0.1;
  double value_along_y = 0.0;  // f(0, t)
  bool origin_is_saddle = false;
  double value_at_minimizer = 0.0;
  double min_sampled = 0.0;
  std::size_t cone_violations = 0;
  std::size_t bound_violations = 0;  // x^2 - y^2 < 3/4 x^2
  std::size_t sign_violations = 0;   // F < 0
};

/// f(x, y) = x^2 - y^2: a saddle of the one-layer problem whose lift to two
/// layers has a local minimum at W1 = 0, W2 = (1, 0).
NonconvexReport nonconvex_experiment(std::size_t n_samples, std::uint64_t seed);

/// Shared sampler: W1 uniform on [-r, r], W2 uniform in the disk of radius r
/// around (1, 0). Returns the product W2 W1 as (x, y).
std::pair<double, double> sample_lifted_neighbor(Rng& rng, double radius = 0.25);

}  // namespace dln

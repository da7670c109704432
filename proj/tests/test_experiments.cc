#include <cmath>

#include "doctest.h"

#include "dln/error.hpp"
#include "dln/experiments.hpp"
#include "dln/reports.hpp"
#include "oracles.hpp"

using namespace dln;

TEST_CASE("gradient descent leaves a stationary point alone") {
  Rng rng(1);
  const Matrix y = oracle::random_matrix(rng, 2, 3);
  const LossSpec f = LossSpec::mse(Dataset(Matrix::identity(3), y));
  const WeightStack s = embed_product(DimChain({3, 3, 2}), y);
  const RunResult run = gd_optimize(s, f, {});
  CHECK(run.iterations == 0);
  CHECK(run.status == RunStatus::kConverged);
  CHECK(run.final_stack == s);
}

TEST_CASE("single layer gradient descent reaches the closed form") {
  Rng rng(2);
  const LossSpec f = LossSpec::mse(synthetic_dataset(LossKind::kMse, 3, 2, 20, false, rng));
  const RunResult run = gd_optimize(random_stack(DimChain({3, 2}), rng), f, {});
  const double opt = convex_optimum(f, 2, 3).value;
  CHECK(run.status == RunStatus::kConverged);
  CHECK(run.final_loss - opt <= 1e-6 * (1 + std::abs(opt)));
  CHECK(std::abs(run.final_loss - objective(run.final_stack, f)) <= 1e-12);
}

TEST_CASE("two-layer interpolation reaches zero loss from every start") {
  Rng rng(3);
  const LossSpec f = LossSpec::mse(Dataset(Matrix::identity(2), oracle::random_matrix(rng, 2, 2)));
  int converged = 0;
  for (std::uint64_t r = 0; r < 50; ++r) {
    Rng init = Rng::stream(3, r);
    const RunResult run = gd_optimize(random_stack(DimChain({2, 2, 2}), init), f, {});
    if (run.status != RunStatus::kConverged) continue;
    ++converged;
    CHECK(objective(run.final_stack, f) <= 1e-6);
  }
  CHECK(converged >= 45);
}

TEST_CASE("armijo descent is monotone and reports step underflow") {
  Rng rng(4);
  const LossSpec f = LossSpec::softmax(synthetic_dataset(LossKind::kSoftmaxXent, 3, 3, 16, false, rng));
  OptimizerConfig opt;
  opt.trace_stride = 1;
  opt.max_iters = 300;
  const RunResult run = gd_optimize(random_stack(DimChain({3, 4, 3}), rng), f, opt);
  for (std::size_t i = 1; i < run.trace.size(); ++i) CHECK(run.trace[i].loss <= run.trace[i - 1].loss);
  CHECK(run.final_loss <= run.initial_loss);
  CHECK(run.trace.front().iter == 0);
  CHECK(run.trace.back().iter == run.iterations);

  // Big data scale makes the unit step overshoot; a large min_step then
  // forbids backtracking far enough.
  const Matrix x = scale(oracle::random_matrix(rng, 2, 5), 30.0);
  const LossSpec g = LossSpec::mse(Dataset(x, oracle::random_matrix(rng, 1, 5)));
  OptimizerConfig tight;
  tight.min_step = 0.3;
  const RunResult bad = gd_optimize(random_stack(DimChain({2, 2, 1}), rng), g, tight);
  CHECK(bad.status == RunStatus::kLineSearchFailed);
  CHECK_FALSE(bad.diagnostics.empty());
  CHECK(bad.iterations == 0);
}

TEST_CASE("synthetic datasets have the requested form") {
  Rng rng(5);
  const Dataset m = synthetic_dataset(LossKind::kMse, 3, 2, 7, false, rng);
  CHECK(m.x().rows() == 3);
  CHECK(m.y().rows() == 2);
  CHECK(m.samples() == 7);
  const Dataset l = synthetic_dataset(LossKind::kLogistic, 2, 1, 50, true, rng);
  for (double v : l.y().entries()) CHECK(std::abs(v) == 1.0);
  CHECK_NOTHROW(LossSpec::logistic(l));
  const Dataset s = synthetic_dataset(LossKind::kSoftmaxXent, 2, 4, 30, false, rng);
  CHECK_NOTHROW(LossSpec::softmax(s));
  CHECK_THROWS_AS(synthetic_dataset(LossKind::kLogistic, 2, 2, 5, false, rng), Error);
  CHECK_THROWS_AS(synthetic_dataset(LossKind::kCexNonsmooth, 2, 1, 5, false, rng), Error);
}

TEST_CASE("config validation") {
  ExperimentConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.restarts = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.optimizer.max_iters = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.tolerances.tol_value = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.tolerances.tau = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("no sub-optimal local minima across restarts") {
  ExperimentConfig cfg;
  cfg.dims = DimChain({3, 4, 4, 2});
  cfg.restarts = 100;
  const Theorem1Report rep = theorem1_experiment(cfg);
  CHECK(rep.falsifiers == 0);
  CHECK(rep.global_optimal >= 95);
  CHECK(rep.all_monotone);
  CHECK(rep.runs.size() == 100);
  for (std::size_t i = 0; i < rep.runs.size(); ++i) CHECK(rep.runs[i].restart == i);
  CHECK(rep.global_optimal + rep.saddle_stalled + rep.non_converged + rep.falsifiers == 100);
}

TEST_CASE("separable logistic descends toward the optimum") {
  ExperimentConfig cfg;
  cfg.dims = DimChain({2, 2, 1});
  cfg.loss = LossKind::kLogistic;
  cfg.data.separable = true;
  cfg.restarts = 10;
  cfg.optimizer.max_iters = 2000;
  cfg.oracle_max_iters = 20000;
  const Theorem1Report rep = theorem1_experiment(cfg);
  CHECK(rep.all_monotone);
  CHECK(rep.falsifiers == 0);
  CHECK_FALSE(rep.oracle_converged);
  for (const RunSummary& r : rep.runs) CHECK(r.final_loss < r.initial_loss);
}

TEST_CASE("theorem1 refuses a bottleneck") {
  ExperimentConfig cfg;
  cfg.dims = DimChain({3, 1, 3});
  try {
    theorem1_experiment(cfg);
    FAIL("expected refusal");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kStructuralViolation);
  }
}

TEST_CASE("theorem1 report does not depend on worker count") {
  ExperimentConfig cfg;
  cfg.dims = DimChain({2, 5, 3, 5, 2});
  cfg.loss = LossKind::kSoftmaxXent;
  cfg.restarts = 24;
  const std::string one = to_json(theorem1_experiment(cfg)).dump();
  cfg.workers = 4;
  const nlohmann::json four = to_json(theorem1_experiment(cfg));
  CHECK(four.dump() == one);
}

TEST_CASE("non-smooth counterexample") {
  const LossSpec f = LossSpec::nonsmooth_counterexample();
  CHECK(loss_value(f, Matrix::column({0.25, 0.0})) == 0.25);
  const Theorem2Report rep = theorem2_experiment(100000, 7);
  CHECK(rep.value_at_minimizer == 0.0);
  CHECK(rep.optimum == -1.0);
  CHECK(rep.gap == 1.0);
  CHECK_FALSE(rep.gradient_defined_at_minimizer);
  CHECK(rep.min_sampled >= 0.0);
  CHECK(rep.cone_violations == 0);
  CHECK(rep.bound_violations == 0);
  CHECK(rep.sign_violations == 0);
  CHECK(rep.strict_violations == 0);
  CHECK_THROWS_AS(theorem2_experiment(0, 1), Error);
}

TEST_CASE("lifted neighbourhood lies in the truncated cone") {
  Rng rng(6);
  for (int i = 0; i < 100000; ++i) {
    const auto [x, y] = sample_lifted_neighbor(rng);
    CHECK(std::abs(x) <= 0.5);
    CHECK(std::abs(y) <= 0.5 * std::abs(x));
  }
}

TEST_CASE("zero stack saddle") {
  const LossSpec f = LossSpec::mse(Dataset(Matrix::identity(3), Matrix::identity(3)));
  const SaddleReport three = saddle_experiment(DimChain({3, 3, 3, 3}), f);
  CHECK(three.claim_applies);
  CHECK(three.residuals_exactly_zero);
  // ||-2 Y X^T / N|| with X = Y = I_3 and N = 3.
  CHECK(three.grad_at_zero_norm == doctest::Approx(2.0 * std::sqrt(3.0) / 3.0).epsilon(1e-15));

  const SaddleReport two = saddle_experiment(DimChain({3, 3, 3}), f);
  CHECK_FALSE(two.claim_applies);
  CHECK(two.residuals.size() == 2);

  const LossSpec zero = LossSpec::mse(Dataset(Matrix::identity(3), Matrix::zeros(3, 3)));
  const SaddleReport z = saddle_experiment(DimChain({3, 3, 3, 3}), zero);
  CHECK(z.residuals_exactly_zero);
  CHECK(z.grad_at_zero_norm == 0.0);
}

TEST_CASE("bottleneck matches the best low-rank fit") {
  const BottleneckReport rep = bottleneck_experiment(DimChain({3, 1, 3}), Matrix::identity(3), 20, 1);
  CHECK(rep.bottleneck_rank == 1);
  CHECK(rep.target_rank == 3);
  CHECK(rep.oracle_value == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(std::abs(rep.best_loss - 2.0 / 3.0) <= 1e-4);
  CHECK(rep.matches_oracle);
  CHECK(rep.above_unconstrained);
  CHECK(rep.best_loss > 0.0);

  const Matrix rank_one = outer(Matrix::column({1, 2, 3}), Matrix::column({1, -1, 0.5}));
  const BottleneckReport easy = bottleneck_experiment(DimChain({3, 1, 3}), rank_one, 10, 2);
  CHECK(easy.oracle_value <= 1e-28);
  CHECK(easy.best_loss <= 1e-4);

  CHECK_THROWS_AS(bottleneck_experiment(DimChain({3, 3, 3}), Matrix::identity(3), 5, 1), Error);
}

TEST_CASE("lifted saddle of an indefinite quadratic") {
  const NonconvexReport rep = nonconvex_experiment(100000, 3);
  CHECK(rep.grad_at_origin == std::vector<double>{0.0, 0.0});
  CHECK(rep.value_along_y == doctest::Approx(-0.01));
  CHECK(rep.origin_is_saddle);
  CHECK(rep.value_at_minimizer == 0.0);
  CHECK(rep.min_sampled >= 0.0);
  CHECK(rep.cone_violations == 0);
  CHECK(rep.bound_violations == 0);
  CHECK(rep.sign_violations == 0);
}

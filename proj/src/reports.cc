#include "dln/reports.hpp"

#include "dln/io.hpp"

namespace dln {

using nlohmann::json;

namespace {

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

json to_json(const KernelChainReport& r) {
  return {
      {"flags", std::vector<bool>(r.flags.begin(), r.flags.end())},
      {"sigma_mins", r.sigma_mins},
      {"k_star", optional_json(r.k_star)},
      {"monotone", r.monotone},
      {"tau", r.tau},
  };
}

json to_json(const CriticalPointReport& r) {
  return {
      {"verdict", std::string(to_string(r.verdict))},
      {"residuals", r.residuals},
      {"value", r.value},
      {"grad_at_product_norm", r.grad_at_product_norm},
      {"structural_ok", r.structural_ok},
      {"transposed_orientation", r.transposed_orientation},
      {"kernel_chain", to_json(r.kernel_chain)},
      {"probes",
       {{"count", r.probes.count},
        {"max_residual", r.probes.max_residual},
        {"max_product_change", r.probes.max_product_change},
        {"all_critical", r.probes.all_critical}}},
      {"tolerances",
       {{"tol_crit", r.tol_crit},
        {"tol_grad", r.tol_grad},
        {"tol_value", optional_json(r.tol_value)},
        {"tau", r.kernel_chain.tau}}},
      {"optimum", optional_json(r.optimum)},
      {"value_gap", optional_json(r.value_gap)},
      {"certified", optional_json(r.certified)},
  };
}

json to_json(const OptimizerConfig& c) {
  return {
      {"method", "gd_armijo"},
      {"max_iters", c.max_iters},
      {"grad_tol", c.grad_tol},
      {"armijo_c", c.armijo_c},
      {"backtrack", c.backtrack},
      {"initial_step", c.initial_step},
      {"min_step", c.min_step},
      {"trace_stride", c.trace_stride},
  };
}

json to_json(const ExperimentConfig& c) {
  return {
      {"dims", c.dims.values()},
      {"loss", std::string(to_string(c.loss))},
      {"dataset",
       {{"csv", c.data.csv_path.empty() ? json(nullptr) : json(c.data.csv_path)},
        {"n_samples", c.data.n_samples},
        {"separable", c.data.separable}}},
      {"seed", c.seed},
      {"restarts", c.restarts},
      {"optimizer", to_json(c.optimizer)},
      {"tolerances",
       {{"tau", c.tolerances.tau},
        {"tol_crit", optional_json(c.tolerances.tol_crit)},
        {"tol_grad", optional_json(c.tolerances.tol_grad)},
        {"tol_value", optional_json(c.tolerances.tol_value)}}},
      {"probes", c.probes},
      {"epsilon0", c.epsilon0},
      {"oracle_max_iters", c.oracle_max_iters},
      {"init", "uniform(+-1/sqrt(fan_in))"},
  };
}

json to_json(const RunResult& r) {
  json trace = json::array();
  for (const TracePoint& p : r.trace) {
    trace.push_back({{"iter", p.iter}, {"F", p.loss}, {"grad_norm", p.grad_norm}, {"step", p.step}});
  }
  json out = {
      {"initial_loss", r.initial_loss},
      {"final_loss", r.final_loss},
      {"final_grad_norm", r.final_grad_norm},
      {"iterations", r.iterations},
      {"status", std::string(to_string(r.status))},
      {"trace", std::move(trace)},
      {"final_stack", stack_to_json(r.final_stack)},
  };
  if (!r.diagnostics.empty()) out["diagnostics"] = r.diagnostics;
  if (r.report) out["critical_point"] = to_json(*r.report);
  return out;
}

json to_json(const Theorem1Report& r) {
  json runs = json::array();
  for (const RunSummary& s : r.runs) {
    runs.push_back({
        {"restart", s.restart},
        {"initial_loss", s.initial_loss},
        {"final_loss", s.final_loss},
        {"value_gap", s.value_gap},
        {"final_grad_norm", s.final_grad_norm},
        {"grad_at_product_norm", s.grad_at_product_norm},
        {"iterations", s.iterations},
        {"status", std::string(to_string(s.status))},
        {"verdict", std::string(to_string(s.verdict))},
        {"class", std::string(to_string(s.run_class))},
        {"monotone", s.monotone},
    });
  }
  return {
      {"config", to_json(r.config)},
      {"oracle",
       {{"value", r.optimum}, {"grad_norm", r.oracle_grad_norm}, {"converged", r.oracle_converged}}},
      {"tol_value", r.tol_value},
      {"counts",
       {{"global_optimal", r.global_optimal},
        {"saddle_stalled", r.saddle_stalled},
        {"non_converged", r.non_converged},
        {"falsifiers", r.falsifiers}}},
      {"all_monotone", r.all_monotone},
      {"runs", std::move(runs)},
  };
}

json to_json(const Theorem2Report& r) {
  return {
      {"n_samples", r.n_samples},
      {"seed", r.seed},
      {"value_at_minimizer", r.value_at_minimizer},
      {"optimum", r.optimum},
      {"gap", r.gap},
      {"gradient_defined_at_minimizer", r.gradient_defined_at_minimizer},
      {"min_sampled", r.min_sampled},
      {"violations",
       {{"cone", r.cone_violations},
        {"bound", r.bound_violations},
        {"sign", r.sign_violations},
        {"strict", r.strict_violations}}},
      {"zero_products", r.zero_products},
  };
}

json to_json(const SaddleReport& r) {
  return {
      {"dims", r.dims},
      {"claim_applies", r.claim_applies},
      {"residuals", r.residuals},
      {"residuals_exactly_zero", r.residuals_exactly_zero},
      {"grad_at_zero_norm", r.grad_at_zero_norm},
  };
}

json to_json(const BottleneckReport& r) {
  return {
      {"dims", r.dims},
      {"seed", r.seed},
      {"restarts", r.restarts},
      {"bottleneck_rank", r.bottleneck_rank},
      {"target_rank", r.target_rank},
      {"oracle_value", r.oracle_value},
      {"unconstrained_value", r.unconstrained_value},
      {"best_loss", r.best_loss},
      {"oracle_gap", r.oracle_gap},
      {"matches_oracle", r.matches_oracle},
      {"above_unconstrained", r.above_unconstrained},
      {"run_losses", r.run_losses},
  };
}

json to_json(const NonconvexReport& r) {
  return {
      {"n_samples", r.n_samples},
      {"seed", r.seed},
      {"grad_at_origin", r.grad_at_origin},
      {"probe_t", r.probe_t},
      {"value_along_y", r.value_along_y},
      {"origin_is_saddle", r.origin_is_saddle},
      {"value_at_minimizer", r.value_at_minimizer},
      {"min_sampled", r.min_sampled},
      {"violations",
       {{"cone", r.cone_violations}, {"bound", r.bound_violations}, {"sign", r.sign_violations}}},
  };
}

json report_document(const std::string& experiment, std::uint64_t seed, json result) {
  return {
      {"schema_version", kSchemaVersion},
      {"experiment", experiment},
      {"seed", seed},
      {"result", std::move(result)},
  };
}

std::string report_file_name(const std::string& experiment, std::uint64_t seed) {
  return experiment + "-" + std::to_string(seed) + ".report.json";
}

std::string trace_to_csv(const std::vector<TracePoint>& trace) {
  std::string out = "iter,F,grad_norm,step\n";
  for (const TracePoint& p : trace) {
    out += std::to_string(p.iter) + ',' + format_double(p.loss) + ',' + format_double(p.grad_norm) +
           ',' + format_double(p.step) + '\n';
  }
  return out;
}

}  // namespace dln

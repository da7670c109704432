#include "dln/cli.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <utility>

#include "CLI11.hpp"
#include "json.hpp"

#include "dln/error.hpp"
#include "dln/experiments.hpp"
#include "dln/gradients.hpp"
#include "dln/io.hpp"
#include "dln/landscape.hpp"
#include "dln/reports.hpp"

namespace dln::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::kConfig, what); }

// A JSON object whose keys are checked off as they are read; finish()
// rejects whatever was not consumed.
class Section {
 public:
  Section(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) config_error(where() + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  std::string name(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  std::optional<double> number(const std::string& key) {
    const json* v = raw(key);
    if (!v) return std::nullopt;
    if (!v->is_number()) config_error(name(key) + ": expected a number");
    return v->get<double>();
  }

  std::optional<double> positive(const std::string& key) {
    auto v = number(key);
    if (v && !(*v > 0.0)) config_error(name(key) + ": must be > 0");
    return v;
  }

  double positive(const std::string& key, double def) { return positive(key).value_or(def); }

  std::optional<std::uint64_t> uint(const std::string& key) {
    const json* v = raw(key);
    if (!v) return std::nullopt;
    if (!v->is_number_unsigned()) config_error(name(key) + ": expected a non-negative integer");
    return v->get<std::uint64_t>();
  }

  std::size_t count(const std::string& key, std::size_t def, std::size_t min = 1) {
    const std::size_t v = static_cast<std::size_t>(uint(key).value_or(def));
    if (v < min) config_error(name(key) + ": must be >= " + std::to_string(min));
    return v;
  }

  bool boolean(const std::string& key, bool def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_boolean()) config_error(name(key) + ": expected true or false");
    return v->get<bool>();
  }

  std::optional<std::string> string(const std::string& key) {
    const json* v = raw(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) config_error(name(key) + ": expected a string");
    return v->get<std::string>();
  }

  DimChain dims(const std::string& key, std::vector<std::size_t> def) {
    const json* v = raw(key);
    if (!v) return DimChain(std::move(def));
    if (!v->is_array() || v->size() < 2) config_error(name(key) + ": expected an array of at least two widths");
    std::vector<std::size_t> out;
    for (const json& d : *v) {
      if (!d.is_number_unsigned() || d.get<std::size_t>() == 0) {
        config_error(name(key) + ": widths must be positive integers");
      }
      out.push_back(d.get<std::size_t>());
    }
    return DimChain(std::move(out));
  }

  Section sub(const std::string& key) {
    const json* v = raw(key);
    return Section(v ? *v : empty(), name(key));
  }

  void finish() const {
    for (const auto& [k, _] : j_.items()) {
      if (!seen_.contains(k)) config_error("unknown key '" + name(k) + "'");
    }
  }

 private:
  static const json& empty() {
    static const json e = json::object();
    return e;
  }
  std::string where() const { return prefix_.empty() ? "config" : prefix_; }

  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

// Command-line values that take precedence over the config file.
struct Overrides {
  std::string config;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  std::optional<double> tau;
  std::optional<double> tol_crit;
  std::optional<double> tol_grad;
  std::optional<double> tol_value;
  std::optional<std::size_t> workers;
  bool trace = false;
};

struct Loaded {
  json doc = json::object();
  fs::path base = fs::current_path();
};

Loaded load_config(const Overrides& ov) {
  Loaded l;
  if (ov.config.empty()) return l;
  const fs::path p(ov.config);
  std::ifstream in(p);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  l.doc = json::parse(ss.str(), nullptr, false);
  if (l.doc.is_discarded()) config_error(p.string() + ": invalid JSON");
  if (!l.doc.is_object()) config_error(p.string() + ": top level must be an object");
  l.base = p.has_parent_path() ? p.parent_path() : fs::current_path();
  return l;
}

fs::path resolve(const Loaded& l, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : l.base / path;
}

LossKind read_loss(Section& s, LossKind def) {
  const auto name = s.string("loss");
  if (!name) return def;
  const auto kind = parse_loss_kind(*name);
  if (!kind) {
    config_error(s.name("loss") +
                 ": expected one of mse, logistic, softmax, cex_nonsmooth, indefinite_quad");
  }
  return *kind;
}

OptimizerConfig read_optimizer(Section s) {
  OptimizerConfig o;
  if (auto m = s.string("method"); m && *m != "gd_armijo") config_error(s.name("method") + ": only gd_armijo is available");
  o.max_iters = s.count("max_iters", o.max_iters);
  o.grad_tol = s.positive("grad_tol", o.grad_tol);
  o.armijo_c = s.positive("armijo_c", o.armijo_c);
  if (o.armijo_c >= 1.0) config_error(s.name("armijo_c") + ": must be < 1");
  o.backtrack = s.positive("backtrack", o.backtrack);
  if (o.backtrack >= 1.0) config_error(s.name("backtrack") + ": must be < 1");
  o.initial_step = s.positive("initial_step", o.initial_step);
  o.min_step = s.positive("min_step", o.min_step);
  o.trace_stride = s.count("trace_stride", o.trace_stride, 0);
  s.finish();
  return o;
}

Tolerances read_tolerances(Section s, const Overrides& ov) {
  Tolerances t;
  t.tau = s.positive("tau", t.tau);
  t.tol_crit = s.positive("tol_crit");
  t.tol_grad = s.positive("tol_grad");
  t.tol_value = s.positive("tol_value");
  s.finish();
  auto check = [](std::optional<double> v, const char* flag) {
    if (v && !(*v > 0.0)) config_error(std::string(flag) + ": must be > 0");
    return v;
  };
  if (ov.tau) t.tau = *check(ov.tau, "--tau");
  if (ov.tol_crit) t.tol_crit = check(ov.tol_crit, "--tol-crit");
  if (ov.tol_grad) t.tol_grad = check(ov.tol_grad, "--tol-grad");
  if (ov.tol_value) t.tol_value = check(ov.tol_value, "--tol-value");
  return t;
}

// Dataset section: {"source": "synthetic" | "csv" | "identity" | "zero",
// "path", "n_samples", "separable"}. identity and zero use X = I_{d_0}.
struct DataChoice {
  std::string source = "synthetic";
  DatasetSource src;
};

DataChoice read_data(Section s, const Loaded& l) {
  DataChoice c;
  c.source = s.string("source").value_or("synthetic");
  if (c.source != "synthetic" && c.source != "csv" && c.source != "identity" && c.source != "zero") {
    config_error(s.name("source") + ": expected synthetic, csv, identity or zero");
  }
  const auto path = s.string("path");
  if (c.source == "csv") {
    if (!path) config_error(s.name("path") + ": required when source is csv");
    c.src.csv_path = resolve(l, *path).string();
  } else if (path) {
    config_error(s.name("path") + ": only valid when source is csv");
  }
  c.src.n_samples = s.count("n_samples", c.src.n_samples);
  c.src.separable = s.boolean("separable", false);
  s.finish();
  return c;
}

std::optional<Dataset> build_data(const DataChoice& c, LossKind loss, const DimChain& dims,
                                  std::uint64_t seed) {
  if (loss == LossKind::kCexNonsmooth || loss == LossKind::kIndefiniteQuad) return std::nullopt;
  if (c.source == "identity" || c.source == "zero") {
    const Matrix x = Matrix::identity(dims.input());
    const Matrix y = c.source == "identity" ? Matrix::padded_identity(dims.output(), dims.input())
                                            : Matrix::zeros(dims.output(), dims.input());
    return Dataset(x, y);
  }
  ExperimentConfig tmp;
  tmp.dims = dims;
  tmp.loss = loss;
  tmp.data = c.src;
  tmp.seed = seed;
  return experiment_dataset(tmp);
}

// Writes every file to a temporary sibling first and renames only once all
// of them exist, so a failure leaves nothing behind.
void commit_files(const fs::path& dir, const std::vector<std::pair<std::string, std::string>>& files) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create output directory " + dir.string());
  std::vector<fs::path> temps;
  auto cleanup = [&] {
    for (const auto& t : temps) fs::remove(t, ec);
  };
  for (const auto& [name, content] : files) {
    fs::path tmp = dir / (name + ".partial");
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    temps.push_back(tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out) {
      cleanup();
      throw Error(ErrorCode::kIo, "cannot write " + (dir / name).string());
    }
  }
  for (std::size_t i = 0; i < files.size(); ++i) {
    fs::rename(temps[i], dir / files[i].first, ec);
    if (ec) {
      cleanup();
      throw Error(ErrorCode::kIo, "cannot rename into " + (dir / files[i].first).string());
    }
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

struct Outcome {
  bool ok = true;
  std::string summary;
  std::vector<std::pair<std::string, std::string>> files;
};

Outcome finish_report(const std::string& experiment, std::uint64_t seed, json result, bool ok,
                      std::string summary) {
  Outcome o;
  o.ok = ok;
  o.files.emplace_back(report_file_name(experiment, seed),
                       dump(report_document(experiment, seed, std::move(result))));
  o.summary = std::move(summary);
  return o;
}

std::string fmt(double x) {
  std::ostringstream ss;
  ss.precision(6);
  ss << x;
  return ss.str();
}

// ---------------------------------------------------------------------------

Outcome cmd_gradcheck(const Overrides& ov) {
  const Loaded l = load_config(ov);
  Section root(l.doc, "");
  const DimChain dims = root.dims("dims", {3, 4, 4, 2});
  const LossKind loss = read_loss(root, LossKind::kMse);
  const DataChoice data = read_data(root.sub("dataset"), l);
  const std::uint64_t seed = ov.seed.value_or(root.uint("seed").value_or(1));
  const std::size_t instances = ov.samples.value_or(root.count("instances", 10));
  const double h = root.positive("fd_step", default_fd_step());
  const double threshold = root.positive("threshold", 1e-5);
  root.finish();

  const LossSpec spec = LossSpec::make(loss, build_data(data, loss, dims, seed));
  std::vector<double> errors;
  double worst = 0.0;
  for (std::size_t i = 0; i < instances; ++i) {
    Rng rng = Rng::stream(seed, i);
    const double e = grad_check(random_stack(dims, rng), spec, h);
    errors.push_back(e);
    worst = std::max(worst, e);
  }
  const bool ok = worst <= threshold;
  json result = {{"dims", dims.values()},   {"loss", std::string(to_string(loss))},
                 {"instances", instances},  {"fd_step", h},
                 {"threshold", threshold},  {"max_error", worst},
                 {"errors", errors},        {"pass", ok}};
  return finish_report("gradcheck", seed, std::move(result), ok,
                       "gradcheck: " + std::to_string(instances) + " instances, max relative error " +
                           fmt(worst) + (ok ? " <= " : " > ") + fmt(threshold));
}

struct VerifyInputs {
  WeightStack stack;
  LossSpec spec;
  VerifierConfig vcfg;
  std::uint64_t seed;
};

VerifyInputs read_verify_inputs(Section& root, const Loaded& l, const Overrides& ov) {
  const auto stack_path = root.string("stack");
  if (!stack_path) config_error("stack: required (path to a stack JSON file)");
  WeightStack stack = read_stack_file(resolve(l, *stack_path));
  const LossKind loss = read_loss(root, LossKind::kMse);
  const DataChoice data = read_data(root.sub("dataset"), l);
  const std::uint64_t seed = ov.seed.value_or(root.uint("seed").value_or(1));
  const Tolerances tol = read_tolerances(root.sub("tolerances"), ov);

  VerifierConfig v;
  v.tau = tol.tau;
  v.tol_crit = tol.tol_crit;
  v.tol_grad = tol.tol_grad;
  v.tol_value = tol.tol_value;
  v.n_probe = ov.samples.value_or(root.count("probes", v.n_probe, 0));
  v.epsilon0 = root.positive("epsilon0", v.epsilon0);
  v.certify = root.boolean("certify", true);
  v.seed = seed;
  const std::string orient = root.string("orientation").value_or("auto");
  if (orient == "auto") {
    v.orientation = Orientation::kAuto;
  } else if (orient == "direct") {
    v.orientation = Orientation::kDirect;
  } else if (orient == "transposed") {
    v.orientation = Orientation::kTransposed;
  } else {
    config_error("orientation: expected auto, direct or transposed");
  }
  LossSpec spec = LossSpec::make(loss, build_data(data, loss, stack.dims(), seed));
  return {std::move(stack), std::move(spec), v, seed};
}

Outcome cmd_verify(const Overrides& ov) {
  const Loaded l = load_config(ov);
  Section root(l.doc, "");
  const VerifyInputs in = read_verify_inputs(root, l, ov);
  root.finish();

  const CriticalPointReport rep = verify_theorem3(in.stack, in.spec, in.vcfg);
  const bool ok = (rep.verdict == Verdict::kFirstOrderGlobalCandidate ||
                   rep.verdict == Verdict::kCriticalSaddleCandidate) &&
                  rep.certified.value_or(true);
  std::string summary = "verify: " + std::string(to_string(rep.verdict)) + ", max residual " +
                        fmt(rep.residuals.empty() ? 0.0
                                                  : *std::max_element(rep.residuals.begin(), rep.residuals.end())) +
                        ", |grad f(A)| " + fmt(rep.grad_at_product_norm);
  if (rep.value_gap) summary += ", gap " + fmt(*rep.value_gap);
  return finish_report("verify", in.seed, to_json(rep), ok, summary);
}

Outcome cmd_perturb(const Overrides& ov) {
  const Loaded l = load_config(ov);
  Section root(l.doc, "");
  const auto stack_path = root.string("stack");
  if (!stack_path) config_error("stack: required (path to a stack JSON file)");
  const WeightStack s = read_stack_file(resolve(l, *stack_path));
  const std::uint64_t seed = ov.seed.value_or(root.uint("seed").value_or(1));
  double tau = root.positive("tau", kDefaultKernelTol);
  if (ov.tau) tau = *ov.tau;
  const double eps0 = root.positive("epsilon0", 1e-3);
  const bool transposed = s.dims().output() < s.dims().input();
  const WeightStack oriented = transposed ? transpose_orientation(s) : s;
  const KernelChainReport chain = kernel_chain(oriented, tau);

  const json* wj = root.raw("w");
  const json* dj = root.raw("delta");
  const auto ks_cfg = root.uint("k_star");
  root.finish();
  if ((wj == nullptr) != (dj == nullptr)) config_error("w and delta must be given together");

  const auto k_star = ks_cfg ? std::optional<std::size_t>(*ks_cfg) : chain.k_star;
  if (!k_star) {
    json result = {{"kernel_chain", to_json(chain)}, {"transposed_orientation", transposed}};
    return finish_report("perturb", seed, std::move(result), false,
                         "perturb: every prefix product has trivial kernel, no family exists");
  }

  PerturbationFamily fam;
  if (wj) {
    if (!wj->is_array()) config_error("w: expected an array of vectors");
    if (!dj->is_array()) config_error("delta: expected an array of numbers");
    std::vector<Matrix> w;
    for (std::size_t i = 0; i < wj->size(); ++i) {
      const json& v = (*wj)[i];
      std::vector<double> vals;
      if (!v.is_array()) config_error("w[" + std::to_string(i) + "]: expected an array of numbers");
      for (const json& x : v) {
        if (!x.is_number()) config_error("w[" + std::to_string(i) + "]: expected numbers");
        vals.push_back(x.get<double>());
      }
      if (vals.empty()) config_error("w[" + std::to_string(i) + "]: empty vector");
      w.push_back(Matrix::column(std::move(vals)));
    }
    std::vector<double> delta;
    for (const json& x : *dj) {
      if (!x.is_number()) config_error("delta: expected numbers");
      delta.push_back(x.get<double>());
    }
    fam = make_perturbation_family(oriented, *k_star, std::move(w), std::move(delta), eps0, tau);
  } else {
    Rng rng(seed);
    fam = random_perturbation_family(oriented, *k_star, eps0, rng, tau);
  }
  WeightStack moved = build_perturbation(oriented, fam);
  if (transposed) moved = transpose_orientation(moved);

  const Matrix a = product(s);
  const double change = frobenius_norm(product(moved) - a) / (1.0 + frobenius_norm(a));
  std::vector<double> distances;
  for (std::size_t k = 1; k <= s.depth(); ++k) distances.push_back(frobenius_norm(moved.layer(k) - s.layer(k)));
  json result = {
      {"kernel_chain", to_json(chain)},
      {"k_star", *k_star},
      {"transposed_orientation", transposed},
      {"delta", fam.delta},
      {"epsilon0", eps0},
      {"layer_distances", distances},
      {"relative_product_change", change},
      {"perturbed_stack", stack_to_json(moved)},
  };
  return finish_report("perturb", seed, std::move(result), true,
                       "perturb: k* = " + std::to_string(*k_star) + ", relative product change " +
                           fmt(change));
}

Outcome cmd_optimize(const Overrides& ov) {
  const Loaded l = load_config(ov);
  Section root(l.doc, "");
  const auto init_path = root.string("init");
  std::optional<WeightStack> init;
  if (init_path) init = read_stack_file(resolve(l, *init_path));
  const DimChain dims = init ? init->dims() : root.dims("dims", {3, 4, 4, 2});
  if (init && root.has("dims")) {
    root.raw("dims");
    config_error("dims: not allowed together with init (the stack fixes the widths)");
  }
  const LossKind loss = read_loss(root, LossKind::kMse);
  const DataChoice data = read_data(root.sub("dataset"), l);
  const std::uint64_t seed = ov.seed.value_or(root.uint("seed").value_or(1));
  const OptimizerConfig opt = read_optimizer(root.sub("optimizer"));
  const Tolerances tol = read_tolerances(root.sub("tolerances"), ov);
  const std::size_t probes = root.count("probes", 8, 0);
  const double eps0 = root.positive("epsilon0", 1e-3);
  const bool trace = root.boolean("trace", false) || ov.trace;
  root.finish();

  const std::optional<Dataset> ds = build_data(data, loss, dims, seed);
  const LossSpec spec = LossSpec::make(loss, ds);
  Rng rng = Rng::stream(seed, 0);
  const WeightStack s0 = init ? *init : random_stack(dims, rng);
  RunResult run = gd_optimize(s0, spec, opt);

  VerifierConfig v;
  v.tau = tol.tau;
  v.tol_crit = tol.tol_crit;
  v.tol_grad = tol.tol_grad;
  v.tol_value = tol.tol_value;
  v.n_probe = probes;
  v.epsilon0 = eps0;
  v.seed = seed;
  v.certify = spec.convex() && spec.smooth();
  run.report = verify_theorem3(run.final_stack, spec, v);

  const std::string stem = "optimize-" + std::to_string(seed);
  json result = to_json(run);
  result["config"] = {{"dims", dims.values()},
                      {"loss", std::string(to_string(loss))},
                      {"optimizer", to_json(opt)},
                      {"init", init ? json(*init_path) : json("uniform(+-1/sqrt(fan_in))")}};
  result["checkpoint"] = stem + ".stack.json";
  if (ds) result["data"] = stem + ".data.csv";
  if (trace) result["trace_file"] = stem + ".trace.csv";

  const bool ok = run.status != RunStatus::kLineSearchFailed;
  Outcome o = finish_report("optimize", seed, std::move(result), ok,
                            "optimize: " + std::string(to_string(run.status)) + " after " +
                                std::to_string(run.iterations) + " iterations, F = " +
                                fmt(run.final_loss) + ", verdict " +
                                std::string(to_string(run.report->verdict)));
  o.files.emplace_back(stem + ".stack.json", dump(stack_to_json(run.final_stack)));
  if (ds) o.files.emplace_back(stem + ".data.csv", dataset_to_csv(*ds));
  if (trace) o.files.emplace_back(stem + ".trace.csv", trace_to_csv(run.trace));
  return o;
}

Outcome cmd_thm1(const Overrides& ov) {
  const Loaded l = load_config(ov);
  Section root(l.doc, "");
  ExperimentConfig cfg;
  cfg.dims = root.dims("dims", cfg.dims.values());
  cfg.loss = read_loss(root, cfg.loss);
  const DataChoice data = read_data(root.sub("dataset"), l);
  if (data.source != "synthetic" && data.source != "csv") {
    config_error("dataset.source: thm1 accepts synthetic or csv");
  }
  cfg.data = data.src;
  cfg.seed = ov.seed.value_or(root.uint("seed").value_or(cfg.seed));
  cfg.restarts = ov.samples.value_or(root.count("restarts", cfg.restarts));
  cfg.optimizer = read_optimizer(root.sub("optimizer"));
  cfg.tolerances = read_tolerances(root.sub("tolerances"), ov);
  cfg.probes = root.count("probes", cfg.probes, 0);
  cfg.epsilon0 = root.positive("epsilon0", cfg.epsilon0);
  cfg.oracle_max_iters = root.count("oracle_max_iters", cfg.oracle_max_iters);
  cfg.workers = ov.workers.value_or(root.count("workers", cfg.workers));
  root.finish();
  cfg.validate();

  const Theorem1Report rep = theorem1_experiment(cfg);
  json result = to_json(rep);
  // Thread count never changes the numbers, so it stays out of the report.
  const bool ok = rep.falsifiers == 0 && rep.all_monotone;
  return finish_report("thm1", cfg.seed, std::move(result), ok,
                       "thm1: " + std::to_string(rep.runs.size()) + " runs, " +
                           std::to_string(rep.global_optimal) + " global-optimal, " +
                           std::to_string(rep.saddle_stalled) + " saddle-stalled, " +
                           std::to_string(rep.non_converged) + " non-converged, " +
                           std::to_string(rep.falsifiers) + " falsifiers");
}

std::pair<std::size_t, std::uint64_t> read_sampling(const Overrides& ov) {
  const Loaded l = load_config(ov);
  Section root(l.doc, "");
  const std::size_t n = ov.samples.value_or(root.count("samples", 100000));
  const std::uint64_t seed = ov.seed.value_or(root.uint("seed").value_or(1));
  root.finish();
  if (n < 1) config_error("--samples: must be >= 1");
  return {n, seed};
}

Outcome cmd_thm2(const Overrides& ov) {
  const auto [n, seed] = read_sampling(ov);
  const Theorem2Report rep = theorem2_experiment(n, seed);
  const bool ok = rep.cone_violations == 0 && rep.bound_violations == 0 && rep.sign_violations == 0 &&
                  rep.strict_violations == 0 && rep.gap == 1.0;
  return finish_report("thm2", seed, to_json(rep), ok,
                       "thm2: " + std::to_string(n) + " samples, min f = " + fmt(rep.min_sampled) +
                           ", gap " + fmt(rep.gap) + ", violations " +
                           std::to_string(rep.cone_violations + rep.bound_violations +
                                          rep.sign_violations + rep.strict_violations));
}

Outcome cmd_nonconvex(const Overrides& ov) {
  const auto [n, seed] = read_sampling(ov);
  const NonconvexReport rep = nonconvex_experiment(n, seed);
  const bool ok = rep.origin_is_saddle && rep.cone_violations == 0 && rep.bound_violations == 0 &&
                  rep.sign_violations == 0;
  return finish_report("nonconvex", seed, to_json(rep), ok,
                       "nonconvex: origin saddle " + std::string(rep.origin_is_saddle ? "yes" : "no") +
                           ", " + std::to_string(n) + " samples, min F = " + fmt(rep.min_sampled) +
                           ", violations " +
                           std::to_string(rep.cone_violations + rep.bound_violations + rep.sign_violations));
}

Outcome cmd_saddle(const Overrides& ov) {
  const Loaded l = load_config(ov);
  Section root(l.doc, "");
  const DimChain dims = root.dims("dims", {3, 3, 3, 3});
  const LossKind loss = read_loss(root, LossKind::kMse);
  Section ds = root.sub("dataset");
  DataChoice data;
  if (!ds.has("source")) {
    data.source = "identity";
    ds.raw("source");
    ds.finish();
  } else {
    data = read_data(ds, l);
  }
  const std::uint64_t seed = ov.seed.value_or(root.uint("seed").value_or(1));
  root.finish();
  const LossSpec spec = LossSpec::make(loss, build_data(data, loss, dims, seed));
  if (!spec.smooth()) config_error("loss: saddle needs a differentiable loss");
  const SaddleReport rep = saddle_experiment(dims, spec);
  const bool ok = !rep.claim_applies || rep.residuals_exactly_zero;
  return finish_report("saddle", seed, to_json(rep), ok,
                       "saddle: L = " + std::to_string(dims.depth()) + ", residuals " +
                           (rep.residuals_exactly_zero ? "exactly zero" : "not all zero") +
                           ", |grad f(0)| = " + fmt(rep.grad_at_zero_norm));
}

Outcome cmd_bottleneck(const Overrides& ov) {
  const Loaded l = load_config(ov);
  Section root(l.doc, "");
  const DimChain dims = root.dims("dims", {3, 1, 3});
  const std::uint64_t seed = ov.seed.value_or(root.uint("seed").value_or(1));
  const std::size_t restarts = ov.samples.value_or(root.count("restarts", 20));
  const OptimizerConfig opt = read_optimizer(root.sub("optimizer"));

  std::optional<Matrix> target;
  const json* tj = root.raw("target");
  root.finish();
  if (!tj || (tj->is_string() && tj->get<std::string>() == "identity")) {
    target = Matrix::padded_identity(dims.output(), dims.input());
  } else if (tj->is_array()) {
    std::vector<double> vals;
    for (const json& row : *tj) {
      if (!row.is_array() || row.size() != dims.input()) {
        config_error("target: expected d_L rows of d_0 numbers");
      }
      for (const json& x : row) {
        if (!x.is_number()) config_error("target: expected numbers");
        vals.push_back(x.get<double>());
      }
    }
    if (tj->size() != dims.output()) config_error("target: expected d_L rows of d_0 numbers");
    target = Matrix(dims.output(), dims.input(), std::move(vals));
  } else {
    config_error("target: expected \"identity\" or a matrix given as rows");
  }
  if (structural_condition(dims)) {
    config_error("dims: bottleneck needs a hidden width below min(d_0, d_L)");
  }

  const BottleneckReport rep = bottleneck_experiment(dims, *target, restarts, seed, opt);
  const bool ok = rep.matches_oracle && (rep.target_rank <= rep.bottleneck_rank || rep.above_unconstrained);
  return finish_report("bottleneck", seed, to_json(rep), ok,
                       "bottleneck: best loss " + fmt(rep.best_loss) + " vs rank-" +
                           std::to_string(rep.bottleneck_rank) + " oracle " + fmt(rep.oracle_value) +
                           " (gap " + fmt(rep.oracle_gap) + ")");
}

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::kConfig:
    case ErrorCode::kIo:
    case ErrorCode::kStructuralViolation:
      return kExitUsage;
    default:
      return kExitFailure;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deep linear network landscape toolkit", "dln"};
  app.require_subcommand(1);
  Overrides ov;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"gradcheck", "Compare analytic layer gradients with central differences"},
      {"verify", "Check a stack for criticality and global optimality"},
      {"perturb", "Apply a product-preserving perturbation to a stack"},
      {"optimize", "Gradient descent on the factorized objective"},
      {"thm1", "Multi-restart search for sub-optimal local minima"},
      {"thm2", "Sample around the non-smooth sub-optimal minimizer"},
      {"saddle", "Evaluate the all-zero stack"},
      {"bottleneck", "Compare a bottlenecked network with the best low-rank fit"},
      {"nonconvex", "Sample around the lifted saddle of x^2 - y^2"},
  };
  std::uint64_t seed = 0;
  std::size_t samples = 0, workers = 0;
  double tau = 0, tol_crit = 0, tol_grad = 0, tol_value = 0;
  std::vector<std::pair<CLI::App*, std::vector<CLI::Option*>>> subs;
  for (const auto& [name, desc] : commands) {
    CLI::App* sub = app.add_subcommand(name, desc);
    std::vector<CLI::Option*> opts;
    sub->add_option("--config,-c", ov.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--out,-o", ov.out_dir, "Output directory");
    opts.push_back(sub->add_option("--seed", seed, "Seed (overrides the config)"));
    opts.push_back(sub->add_option("--samples", samples, "Samples, restarts or instances")->check(CLI::PositiveNumber));
    opts.push_back(sub->add_option("--tau", tau, "Relative rank tolerance"));
    opts.push_back(sub->add_option("--tol-crit", tol_crit, "Critical residual tolerance"));
    opts.push_back(sub->add_option("--tol-grad", tol_grad, "Tolerance on |grad f(A)|"));
    opts.push_back(sub->add_option("--tol-value", tol_value, "Tolerance on the value gap"));
    opts.push_back(sub->add_option("--workers", workers, "Threads for restarts")->check(CLI::PositiveNumber));
    sub->add_flag("--trace", ov.trace, "Also write a CSV loss trace (optimize)");
    subs.emplace_back(sub, std::move(opts));
  }

  std::vector<const char*> argv{"dln"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  CLI::App* chosen = nullptr;
  for (auto& [sub, opts] : subs) {
    if (!sub->parsed()) continue;
    chosen = sub;
    if (opts[0]->count()) ov.seed = seed;
    if (opts[1]->count()) ov.samples = samples;
    if (opts[2]->count()) ov.tau = tau;
    if (opts[3]->count()) ov.tol_crit = tol_crit;
    if (opts[4]->count()) ov.tol_grad = tol_grad;
    if (opts[5]->count()) ov.tol_value = tol_value;
    if (opts[6]->count()) ov.workers = workers;
  }
  const std::string name = chosen->get_name();

  try {
    Outcome o;
    if (name == "gradcheck") o = cmd_gradcheck(ov);
    else if (name == "verify") o = cmd_verify(ov);
    else if (name == "perturb") o = cmd_perturb(ov);
    else if (name == "optimize") o = cmd_optimize(ov);
    else if (name == "thm1") o = cmd_thm1(ov);
    else if (name == "thm2") o = cmd_thm2(ov);
    else if (name == "saddle") o = cmd_saddle(ov);
    else if (name == "bottleneck") o = cmd_bottleneck(ov);
    else o = cmd_nonconvex(ov);

    commit_files(ov.out_dir, o.files);
    out << o.summary << (o.ok ? "" : "  [FAILED]") << "  -> " << (fs::path(ov.out_dir) / o.files.front().first).string()
        << "\n";
    return o.ok ? kExitOk : kExitFailure;
  } catch (const Error& e) {
    err << "dln " << name << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const json::exception& e) {
    err << "dln " << name << ": CONFIG: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "dln " << name << ": " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace dln::cli

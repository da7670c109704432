#include "dln/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dln/error.hpp"

namespace dln {

std::vector<double> critical_residuals(const WeightStack& s, const LossSpec& spec) {
  return analytic_layer_grads(s, spec).layer_norms();
}

KernelChainReport kernel_chain(const WeightStack& s, double tau) {
  if (!(tau >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "tau must be >= 0");
  KernelChainReport out;
  out.tau = tau;
  const std::size_t L = s.depth();
  const std::size_t d0 = s.dims().input();
  const TruncatedProducts tp(s);
  for (std::size_t k = 1; k < L; ++k) {
    const SvdFactors f = full_svd(tp.minus(k));
    const double smax = f.sigma_max();
    const auto rank = static_cast<std::size_t>(std::count_if(
        f.sigma.begin(), f.sigma.end(), [&](double x) { return smax > 0.0 && x > tau * smax; }));
    const bool nontrivial = rank < d0;
    out.flags.push_back(nontrivial);
    out.sigma_mins.push_back(f.sigma.back());
    if (nontrivial && !out.k_star) out.k_star = k;
    if (!nontrivial && out.k_star) out.monotone = false;
  }
  return out;
}

std::vector<Matrix> left_null_vectors(const WeightStack& s, std::size_t k_star) {
  const std::size_t L = s.depth();
  const std::size_t d0 = s.dims().input();
  if (k_star < 1 || k_star >= L) {
    throw Error(ErrorCode::kFamilyMismatch, "k_star must lie in 1..L-1");
  }
  const TruncatedProducts tp(s);
  std::vector<Matrix> out;
  for (std::size_t k = k_star; k < L; ++k) {
    if (s.dims()[k] < d0) {
      throw Error(ErrorCode::kFamilyMismatch,
                  "d_" + std::to_string(k) + " < d_0: no d_0-th left singular vector");
    }
    const SvdFactors f = full_svd(tp.minus(k));
    out.push_back(Matrix::column(f.u.col(d0 - 1)));
  }
  return out;
}

PerturbationFamily make_perturbation_family(const WeightStack& s, std::size_t k_star,
                                            std::vector<Matrix> w, std::vector<double> delta,
                                            double epsilon0, double tau) {
  PerturbationFamily fam;
  fam.k_star = k_star;
  fam.u_hats = left_null_vectors(s, k_star);
  fam.w = std::move(w);
  fam.delta = std::move(delta);
  fam.epsilon0 = epsilon0;
  fam.tau = tau;
  return fam;
}

PerturbationFamily random_perturbation_family(const WeightStack& s, std::size_t k_star,
                                              double epsilon0, Rng& rng, double tau) {
  const std::size_t L = s.depth();
  if (k_star < 1 || k_star >= L) {
    throw Error(ErrorCode::kFamilyMismatch, "k_star must lie in 1..L-1");
  }
  std::vector<Matrix> w;
  std::vector<double> delta;
  for (std::size_t k = k_star + 1; k <= L; ++k) {
    std::vector<double> v(s.dims()[k]);
    double n = 0.0;
    while (n == 0.0) {
      for (double& x : v) x = rng.normal();
      n = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    }
    for (double& x : v) x /= n;
    w.push_back(Matrix::column(std::move(v)));
    delta.push_back(rng.uniform(0.0, epsilon0 / 2.0));
  }
  return make_perturbation_family(s, k_star, std::move(w), std::move(delta), epsilon0, tau);
}

namespace {

constexpr double kUnitTolerance = 1e-12;

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kFamilyMismatch, what);
}

}  // namespace

WeightStack build_perturbation(const WeightStack& s, const PerturbationFamily& fam) {
  const std::size_t L = s.depth();
  const std::size_t ks = fam.k_star;
  require(ks >= 1 && ks < L, "k_star must lie in 1..L-1");
  const std::size_t count = L - ks;
  require(fam.u_hats.size() == count, "expected " + std::to_string(count) + " null vectors");
  require(fam.w.size() == count, "expected " + std::to_string(count) + " directions");
  require(fam.delta.size() == count, "expected " + std::to_string(count) + " radii");
  require(fam.epsilon0 > 0.0, "epsilon0 must be positive");

  const TruncatedProducts tp(s);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t k = ks + i;  // u_k
    const Matrix& u = fam.u_hats[i];
    require(u.rows() == s.dims()[k] && u.cols() == 1,
            "u_" + std::to_string(k) + " must be a column of length d_" + std::to_string(k));
    require(std::abs(frobenius_norm(u) - 1.0) <= kUnitTolerance,
            "u_" + std::to_string(k) + " is not a unit vector");
    const Matrix& prefix = tp.minus(k);
    const double leak = frobenius_norm(matmul(transpose(u), prefix));
    const double smax = full_svd(prefix).sigma_max();
    require(leak <= fam.tau * smax,
            "u_" + std::to_string(k) + " is not a left null vector of W_{" + std::to_string(k) +
                ",-} (stale family?)");

    const std::size_t kw = ks + 1 + i;  // w_k, delta_k
    const Matrix& w = fam.w[i];
    require(w.rows() == s.dims()[kw] && w.cols() == 1,
            "w_" + std::to_string(kw) + " must be a column of length d_" + std::to_string(kw));
    require(std::abs(frobenius_norm(w) - 1.0) <= kUnitTolerance,
            "w_" + std::to_string(kw) + " is not a unit vector");
    require(fam.delta[i] >= 0.0 && fam.delta[i] <= fam.epsilon0 / 2.0,
            "delta_" + std::to_string(kw) + " outside [0, epsilon0/2]");
  }

  std::vector<Matrix> layers = s.layers();
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t k = ks + 1 + i;
    if (fam.delta[i] == 0.0) continue;
    layers[k - 1] = layers[k - 1] + scale(outer(fam.w[i], fam.u_hats[i]), fam.delta[i]);
  }
  return WeightStack(s.dims(), std::move(layers));
}

WeightStack transpose_orientation(const WeightStack& s) {
  std::vector<Matrix> layers;
  layers.reserve(s.depth());
  for (std::size_t k = s.depth(); k >= 1; --k) layers.push_back(transpose(s.layer(k)));
  return WeightStack(s.dims().reversed(), std::move(layers));
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kNotCritical: return "NOT_CRITICAL";
    case Verdict::kCriticalSaddleCandidate: return "CRITICAL_SADDLE_CANDIDATE";
    case Verdict::kFirstOrderGlobalCandidate: return "FIRST_ORDER_GLOBAL_CANDIDATE";
    case Verdict::kStructuralViolation: return "STRUCTURAL_VIOLATION";
  }
  return "UNKNOWN";
}

bool CriticalPointReport::critical() const {
  return std::all_of(residuals.begin(), residuals.end(), [&](double r) { return r <= tol_crit; });
}

CriticalPointReport verify_theorem3(const WeightStack& s, const LossSpec& spec,
                                    const VerifierConfig& cfg) {
  CriticalPointReport rep;
  const TruncatedProducts tp(s);
  const Matrix& a = tp.full();
  const Matrix gf = loss_grad(spec, a);

  rep.residuals = analytic_layer_grads(tp, gf).layer_norms();
  rep.value = loss_value(spec, a);
  rep.grad_at_product_norm = frobenius_norm(gf);
  rep.structural_ok = structural_condition(s.dims());
  rep.tol_crit = cfg.tol_crit.value_or(1e-8 * (1.0 + rep.grad_at_product_norm));
  rep.tol_grad = cfg.tol_grad.value_or(1e-6 * (1.0 + spec.target_norm()));

  // The null-vector construction needs d_L >= d_0; otherwise work with
  // g(A) = f(A^T) on the reversed, transposed stack.
  switch (cfg.orientation) {
    case Orientation::kAuto: rep.transposed_orientation = s.dims().output() < s.dims().input(); break;
    case Orientation::kDirect: rep.transposed_orientation = false; break;
    case Orientation::kTransposed: rep.transposed_orientation = true; break;
  }
  const WeightStack oriented = rep.transposed_orientation ? transpose_orientation(s) : s;
  rep.kernel_chain = kernel_chain(oriented, cfg.tau);

  const bool can_probe = rep.kernel_chain.k_star.has_value() && rep.structural_ok &&
                         oriented.dims().output() >= oriented.dims().input() && cfg.n_probe > 0;
  if (can_probe) {
    // Families are drawn up front so the outcome does not depend on how the
    // probes are evaluated.
    Rng rng(cfg.seed);
    std::vector<PerturbationFamily> families;
    for (std::size_t p = 0; p < cfg.n_probe; ++p) {
      families.push_back(
          random_perturbation_family(oriented, *rep.kernel_chain.k_star, cfg.epsilon0, rng, cfg.tau));
    }
    const double scale_a = 1.0 + frobenius_norm(a);
    for (const PerturbationFamily& fam : families) {
      WeightStack moved = build_perturbation(oriented, fam);
      if (rep.transposed_orientation) moved = transpose_orientation(moved);
      const std::vector<double> res = critical_residuals(moved, spec);
      const double worst = *std::max_element(res.begin(), res.end());
      rep.probes.max_residual = std::max(rep.probes.max_residual, worst);
      rep.probes.max_product_change =
          std::max(rep.probes.max_product_change, frobenius_norm(product(moved) - a) / scale_a);
      ++rep.probes.count;
    }
    rep.probes.all_critical = rep.probes.max_residual <= rep.tol_crit;
  }

  if (!rep.structural_ok) {
    rep.verdict = Verdict::kStructuralViolation;
  } else if (!rep.critical()) {
    rep.verdict = Verdict::kNotCritical;
  } else if (rep.grad_at_product_norm <= rep.tol_grad) {
    rep.verdict = Verdict::kFirstOrderGlobalCandidate;
  } else {
    rep.verdict = Verdict::kCriticalSaddleCandidate;
  }

  if (rep.verdict == Verdict::kFirstOrderGlobalCandidate && cfg.certify && spec.convex() &&
      spec.smooth()) {
    const double opt = cfg.known_optimum
                           ? *cfg.known_optimum
                           : convex_optimum(spec, spec.arg_rows(), spec.arg_cols()).value;
    rep.optimum = opt;
    rep.value_gap = rep.value - opt;
    rep.tol_value = cfg.tol_value.value_or(1e-6 * (1.0 + std::abs(opt)));
    rep.certified = *rep.value_gap <= *rep.tol_value;
  }
  return rep;
}

}  // namespace dln

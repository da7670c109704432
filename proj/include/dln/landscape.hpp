#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "dln/gradients.hpp"
#include "dln/linalg.hpp"
#include "dln/losses.hpp"
#include "dln/network.hpp"
#include "dln/random.hpp"

namespace dln {

/// Frobenius norms of the L layer gradients. All zero exactly at a critical
/// point of the factorized problem.
std::vector<double> critical_residuals(const WeightStack& s, const LossSpec& spec);

/// Nullity of the prefix products W_{k,-}, k = 1..L-1.
struct KernelChainReport {
  std::vector<bool> flags;         // index k-1: ker(W_{k,-}) nontrivial at tau
  std::vector<double> sigma_mins;  // index k-1: smallest singular value of W_{k,-}
  std::optional<std::size_t> k_star;
  /// Nested kernels force the flags to be monotone in k. A false value means
  /// tau is mis-set for this stack; the flags are reported as computed.
  bool monotone = true;
  double tau = kDefaultKernelTol;
};

KernelChainReport kernel_chain(const WeightStack& s, double tau = kDefaultKernelTol);

/// Data for the product-preserving perturbation
///   W~_k = W_k                            for k <= k_star
///   W~_k = W_k + delta_k w_k u_{k-1}^T     for k >  k_star
/// where u_k is the d_0-th left singular vector of W_{k,-}.
struct PerturbationFamily {
  std::size_t k_star = 0;
  std::vector<Matrix> u_hats;  // u_{k_star} .. u_{L-1}
  std::vector<Matrix> w;       // w_{k_star+1} .. w_L, unit vectors
  std::vector<double> delta;   // delta_{k_star+1} .. delta_L in [0, epsilon0/2]
  double epsilon0 = 1e-3;
  double tau = kDefaultKernelTol;
};

/// Left null vectors u_{k_star}..u_{L-1} for this stack. Needs d_k >= d_0
/// for every k >= k_star.
std::vector<Matrix> left_null_vectors(const WeightStack& s, std::size_t k_star);

/// Assemble a family for `s` from caller-chosen directions and radii; the
/// null vectors are computed from `s`.
PerturbationFamily make_perturbation_family(const WeightStack& s, std::size_t k_star,
                                            std::vector<Matrix> w, std::vector<double> delta,
                                            double epsilon0, double tau = kDefaultKernelTol);

/// w_k uniform on the unit sphere (normalized Gaussians), delta_k uniform on
/// [0, epsilon0/2].
PerturbationFamily random_perturbation_family(const WeightStack& s, std::size_t k_star,
                                              double epsilon0, Rng& rng,
                                              double tau = kDefaultKernelTol);

/// Applies the family. Throws kFamilyMismatch for wrong shapes, non-unit
/// vectors, radii outside [0, epsilon0/2] or null vectors that do not
/// annihilate this stack's prefix products.
WeightStack build_perturbation(const WeightStack& s, const PerturbationFamily& fam);

/// (W_L^T, ..., W_1^T): the stack whose product is product(s)^T.
WeightStack transpose_orientation(const WeightStack& s);

enum class Verdict {
  kNotCritical,
  kCriticalSaddleCandidate,
  kFirstOrderGlobalCandidate,
  kStructuralViolation,
};

std::string_view to_string(Verdict v);

enum class Orientation { kAuto, kDirect, kTransposed };

struct VerifierConfig {
  // Unset tolerances take their scale-relative defaults:
  //   tol_crit  = 1e-8 (1 + ||grad f(A)||)
  //   tol_grad  = 1e-6 (1 + ||Y||)
  //   tol_value = 1e-6 (1 + |f_opt|)
  std::optional<double> tol_crit;
  std::optional<double> tol_grad;
  std::optional<double> tol_value;
  double tau = kDefaultKernelTol;
  std::size_t n_probe = 8;
  double epsilon0 = 1e-3;
  std::uint64_t seed = 0;
  Orientation orientation = Orientation::kAuto;
  bool certify = true;
  /// Skips the convex solve when the optimum is already known.
  std::optional<double> known_optimum;
};

struct ProbeSummary {
  std::size_t count = 0;
  double max_residual = 0.0;
  double max_product_change = 0.0;  // relative Frobenius
  bool all_critical = true;
};

struct CriticalPointReport {
  std::vector<double> residuals;
  double value = 0.0;
  double grad_at_product_norm = 0.0;
  bool structural_ok = false;
  bool transposed_orientation = false;
  KernelChainReport kernel_chain;
  ProbeSummary probes;
  double tol_crit = 0.0;
  double tol_grad = 0.0;
  std::optional<double> tol_value;
  std::optional<double> optimum;
  std::optional<double> value_gap;
  std::optional<bool> certified;
  Verdict verdict = Verdict::kNotCritical;

  bool critical() const;
};

/// Checks the first-order consequence of local minimality at `s`: residuals,
/// ||grad f(A)||, the kernel chain, random product-preserving probes and,
/// for convex losses at a first-order candidate, the gap to the convex
/// optimum.
CriticalPointReport verify_theorem3(const WeightStack& s, const LossSpec& spec,
                                    const VerifierConfig& cfg = {});

}  // namespace dln

#pragma once

#include <cstddef>
#include <vector>

#include "dln/linalg.hpp"
#include "dln/random.hpp"

namespace dln {

/// Layer widths (d_0, d_1, ..., d_L) with L >= 1 and every width >= 1.
class DimChain {
 public:
  explicit DimChain(std::vector<std::size_t> dims);

  std::size_t depth() const noexcept { return dims_.size() - 1; }
  std::size_t operator[](std::size_t i) const noexcept { return dims_[i]; }
  std::size_t input() const noexcept { return dims_.front(); }
  std::size_t output() const noexcept { return dims_.back(); }
  const std::vector<std::size_t>& values() const noexcept { return dims_; }
  DimChain reversed() const;

  friend bool operator==(const DimChain&, const DimChain&) = default;

 private:
  std::vector<std::size_t> dims_;
};

/// min(d_1..d_{L-1}) >= min(d_0, d_L); vacuously true without hidden layers.
bool structural_condition(const DimChain& dims);

/// The tuple (W_1, ..., W_L); layer k has shape d_k x d_{k-1}.
class WeightStack {
 public:
  WeightStack(DimChain dims, std::vector<Matrix> layers);

  const DimChain& dims() const noexcept { return dims_; }
  std::size_t depth() const noexcept { return layers_.size(); }
  /// 1-based, matching W_1..W_L.
  const Matrix& layer(std::size_t k) const;
  const std::vector<Matrix>& layers() const noexcept { return layers_; }
  WeightStack with_layer(std::size_t k, Matrix m) const;

  friend bool operator==(const WeightStack&, const WeightStack&) = default;

 private:
  DimChain dims_;
  std::vector<Matrix> layers_;
};

/// W_L ... W_1, folded from the input side.
Matrix product(const WeightStack& s);
/// W_L ... W_k for 1 <= k <= L.
Matrix truncated_plus(const WeightStack& s, std::size_t k);
/// W_k ... W_1 for 1 <= k <= L.
Matrix truncated_minus(const WeightStack& s, std::size_t k);

/// All prefix and suffix products of a stack from one sweep each. The empty
/// products are identities: minus(0) = I_{d_0}, plus(L+1) = I_{d_L}.
class TruncatedProducts {
 public:
  explicit TruncatedProducts(const WeightStack& s);

  const Matrix& minus(std::size_t k) const;
  const Matrix& plus(std::size_t k) const;
  const Matrix& full() const { return minus_.back(); }
  std::size_t depth() const noexcept { return minus_.size() - 1; }

 private:
  std::vector<Matrix> minus_;  // index k -> W_{k,-}, k = 0..L
  std::vector<Matrix> plus_;   // index k-1 -> W_{k,+}, k = 1..L+1
};

WeightStack zero_stack(const DimChain& dims);

/// Entries i.i.d. uniform on [-s, s], s = 1/sqrt(d_{l-1}) for layer l.
WeightStack random_stack(const DimChain& dims, Rng& rng);

/// A stack whose product is exactly `target`, built from padded identities.
/// Requires the structural condition.
WeightStack embed_product(const DimChain& dims, const Matrix& target);

}  // namespace dln

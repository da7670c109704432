#include "dln/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dln/error.hpp"

namespace dln {

DimChain::DimChain(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  if (dims_.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "dimension chain needs at least d_0 and d_1");
  }
  for (std::size_t d : dims_) {
    if (d == 0) throw Error(ErrorCode::kInvalidArgument, "layer widths must be >= 1");
  }
}

DimChain DimChain::reversed() const {
  return DimChain(std::vector<std::size_t>(dims_.rbegin(), dims_.rend()));
}

bool structural_condition(const DimChain& dims) {
  const std::size_t bound = std::min(dims.input(), dims.output());
  for (std::size_t l = 1; l < dims.depth(); ++l) {
    if (dims[l] < bound) return false;
  }
  return true;
}

WeightStack::WeightStack(DimChain dims, std::vector<Matrix> layers)
    : dims_(std::move(dims)), layers_(std::move(layers)) {
  if (layers_.size() != dims_.depth()) {
    throw Error(ErrorCode::kDimensionMismatch, "layer count does not match dimension chain");
  }
  for (std::size_t l = 1; l <= layers_.size(); ++l) {
    const Matrix& w = layers_[l - 1];
    if (w.rows() != dims_[l] || w.cols() != dims_[l - 1]) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "layer " + std::to_string(l) + " has shape " + std::to_string(w.rows()) + "x" +
                      std::to_string(w.cols()) + ", expected " + std::to_string(dims_[l]) + "x" +
                      std::to_string(dims_[l - 1]));
    }
  }
}

const Matrix& WeightStack::layer(std::size_t k) const {
  if (k < 1 || k > layers_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "layer index out of range: " + std::to_string(k));
  }
  return layers_[k - 1];
}

WeightStack WeightStack::with_layer(std::size_t k, Matrix m) const {
  layer(k);
  std::vector<Matrix> layers = layers_;
  layers[k - 1] = std::move(m);
  return WeightStack(dims_, std::move(layers));
}

Matrix product(const WeightStack& s) { return truncated_minus(s, s.depth()); }

Matrix truncated_plus(const WeightStack& s, std::size_t k) {
  const std::size_t L = s.depth();
  if (k < 1 || k > L) throw Error(ErrorCode::kInvalidArgument, "truncated_plus: k out of range");
  Matrix acc = s.layer(L);
  for (std::size_t l = L; l-- > k;) acc = matmul(acc, s.layer(l));
  return acc;
}

Matrix truncated_minus(const WeightStack& s, std::size_t k) {
  if (k < 1 || k > s.depth()) {
    throw Error(ErrorCode::kInvalidArgument, "truncated_minus: k out of range");
  }
  Matrix acc = s.layer(1);
  for (std::size_t l = 2; l <= k; ++l) acc = matmul(s.layer(l), acc);
  return acc;
}

TruncatedProducts::TruncatedProducts(const WeightStack& s) {
  const std::size_t L = s.depth();
  minus_.reserve(L + 1);
  minus_.push_back(Matrix::identity(s.dims().input()));
  for (std::size_t k = 1; k <= L; ++k) minus_.push_back(matmul(s.layer(k), minus_.back()));

  std::vector<Matrix> rev;
  rev.reserve(L + 1);
  rev.push_back(Matrix::identity(s.dims().output()));
  for (std::size_t k = L; k >= 1; --k) rev.push_back(matmul(rev.back(), s.layer(k)));
  plus_.assign(rev.rbegin(), rev.rend());
}

const Matrix& TruncatedProducts::minus(std::size_t k) const {
  if (k >= minus_.size()) throw Error(ErrorCode::kInvalidArgument, "minus index out of range");
  return minus_[k];
}

const Matrix& TruncatedProducts::plus(std::size_t k) const {
  if (k < 1 || k > plus_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "plus index out of range");
  }
  return plus_[k - 1];
}

WeightStack zero_stack(const DimChain& dims) {
  std::vector<Matrix> layers;
  for (std::size_t l = 1; l <= dims.depth(); ++l) layers.push_back(Matrix::zeros(dims[l], dims[l - 1]));
  return WeightStack(dims, std::move(layers));
}

WeightStack random_stack(const DimChain& dims, Rng& rng) {
  std::vector<Matrix> layers;
  for (std::size_t l = 1; l <= dims.depth(); ++l) {
    const double s = 1.0 / std::sqrt(static_cast<double>(dims[l - 1]));
    std::vector<double> e(dims[l] * dims[l - 1]);
    for (double& x : e) x = rng.uniform(-s, s);
    layers.emplace_back(dims[l], dims[l - 1], std::move(e));
  }
  return WeightStack(dims, std::move(layers));
}

WeightStack embed_product(const DimChain& dims, const Matrix& target) {
  if (!structural_condition(dims)) {
    throw Error(ErrorCode::kStructuralViolation, "embed_product needs the structural condition");
  }
  if (target.rows() != dims.output() || target.cols() != dims.input()) {
    throw Error(ErrorCode::kDimensionMismatch, "target shape does not match d_L x d_0");
  }
  const std::size_t L = dims.depth();
  if (L == 1) return WeightStack(dims, {target});

  std::vector<Matrix> layers;
  for (std::size_t l = 1; l <= L; ++l) layers.push_back(Matrix::padded_identity(dims[l], dims[l - 1]));
  // Every hidden width is at least min(d_0, d_L), so the padded identities
  // carry that many coordinates through untouched; the target goes on the
  // end whose side is the narrow one.
  if (dims.output() >= dims.input()) {
    layers[L - 1] = matmul(target, Matrix::padded_identity(dims.input(), dims[L - 1]));
  } else {
    layers[0] = matmul(Matrix::padded_identity(dims[1], dims.output()), target);
  }
  return WeightStack(dims, std::move(layers));
}

}  // namespace dln

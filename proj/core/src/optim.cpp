#include "cp3er/optim.hpp"

#include <algorithm>
#include <cmath>

namespace cp3er {

void ParamSet::add(std::string name, Tensor tensor) {
  entries_.push_back(NamedTensor{std::move(name), std::move(tensor)});
}

void ParamSet::extend(const ParamSet& other) {
  entries_.insert(entries_.end(), other.entries_.begin(), other.entries_.end());
}

std::size_t ParamSet::numel() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

const Tensor& ParamSet::get(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  throw ContractError("ParamSet: no parameter named '" + name + "'");
}

void ParamSet::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

void ParamSet::set_requires_grad(bool value) {
  for (auto& e : entries_) e.tensor.set_requires_grad(value);
}

double ParamSet::grad_norm() const {
  double sq = 0.0;
  for (const auto& e : entries_) {
    for (double g : e.tensor.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

ParamSet ParamSet::detached_copy() const {
  ParamSet copy;
  for (const auto& e : entries_) copy.add(e.name, e.tensor.detach());
  return copy;
}

void ParamSet::copy_from(const ParamSet& other) {
  if (other.size() != size()) throw DimensionError("ParamSet::copy_from: size mismatch");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto& dst = entries_[i].tensor;
    const auto& src = other.entries_[i].tensor;
    if (dst.shape() != src.shape()) {
      throw DimensionError("ParamSet::copy_from: shape mismatch for " + entries_[i].name);
    }
    std::ranges::copy(src.data(), dst.data().begin());
  }
}

FreezeGuard::FreezeGuard(ParamSet& params) : params_(params) {
  for (const auto& e : params_.entries()) previous_.push_back(e.tensor.requires_grad());
  params_.set_requires_grad(false);
}

FreezeGuard::~FreezeGuard() {
  auto& entries = params_.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) entries[i].tensor.set_requires_grad(previous_[i]);
}

double clip_grad_norm(ParamSet& params, double max_norm) {
  const double norm = params.grad_norm();
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / (norm + 1e-12);
    for (auto& e : params.entries()) {
      if (!e.tensor.has_grad()) continue;
      for (double& g : e.tensor.grad_buffer()) g *= factor;
    }
  }
  return norm;
}

Adam::Adam(ParamSet params, AdamOptions options) : params_(std::move(params)), options_(options) {
  for (const auto& e : params_.entries()) {
    m_.emplace_back(e.tensor.numel(), 0.0);
    v_.emplace_back(e.tensor.numel(), 0.0);
  }
}

void Adam::step() {
  if (options_.max_grad_norm > 0.0) clip_grad_norm(params_, options_.max_grad_norm);
  ++step_;
  const double t = static_cast<double>(step_);
  const double bc1 = 1.0 - std::pow(options_.beta1, t);
  const double bc2 = 1.0 - std::pow(options_.beta2, t);
  auto& entries = params_.entries();
  for (std::size_t p = 0; p < entries.size(); ++p) {
    Tensor& param = entries[p].tensor;
    if (!param.has_grad()) continue;
    auto values = param.data();
    auto grads = param.grad();
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * grads[i];
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * grads[i] * grads[i];
      values[i] -= options_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + options_.eps);
    }
  }
  params_.zero_grad();
}

}  // namespace cp3er

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cp3er/ndgrad.hpp"

namespace cp3er {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Ordered collection of named parameter tensors (handles).
class ParamSet {
 public:
  void add(std::string name, Tensor tensor);
  void extend(const ParamSet& other);

  std::size_t size() const { return entries_.size(); }
  std::size_t numel() const;
  const std::vector<NamedTensor>& entries() const { return entries_; }
  std::vector<NamedTensor>& entries() { return entries_; }
  const Tensor& get(const std::string& name) const;

  void zero_grad();
  void set_requires_grad(bool value);
  double grad_norm() const;
  // Deep copy with gradients disabled, shapes mirrored.
  ParamSet detached_copy() const;
  // Element-wise copy of values from `other` (same names and shapes).
  void copy_from(const ParamSet& other);

 private:
  std::vector<NamedTensor> entries_;
};

// Disables gradient tracking for a parameter set for the lifetime of the guard.
class FreezeGuard {
 public:
  explicit FreezeGuard(ParamSet& params);
  ~FreezeGuard();
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  ParamSet& params_;
  std::vector<bool> previous_;
};

// Scales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(ParamSet& params, double max_norm);

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Global-norm clip applied before each step; <= 0 disables.
  double max_grad_norm = 10.0;
};

class Adam {
 public:
  Adam(ParamSet params, AdamOptions options);

  // Clips, applies one bias-corrected update, then zeroes the gradients.
  void step();
  void zero_grad() { params_.zero_grad(); }

  std::uint64_t step_count() const { return step_; }
  const AdamOptions& options() const { return options_; }
  const ParamSet& params() const { return params_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  ParamSet params_;
  AdamOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t step_ = 0;
};

}  // namespace cp3er

#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "cp3er/ndgrad.hpp"
#include "cp3er/nets.hpp"
#include "cp3er/optim.hpp"
#include "cp3er/rng.hpp"

namespace cp3er {

// Time discretization on [epsilon, max_time] and the boundary-conditioned
// parameterization of the consistency function.
struct NoiseSchedule {
  double epsilon = 0.002;
  double max_time = 80.0;
  std::size_t num_points = 10;
  double rho = 7.0;
  double sigma_data = 0.5;

  void validate() const;
  // τ_k = (ε^{1/ρ} + (k−1)/(N−1)·(K^{1/ρ} − ε^{1/ρ}))^ρ, endpoints pinned exactly.
  std::vector<double> times() const;
  double c_skip(double tau) const;
  double c_out(double tau) const;
  // Input scaling applied to the noised action before it enters F_θ.
  double c_in(double tau) const;
};

std::vector<double> schedule_times(const NoiseSchedule& schedule);
std::pair<double, double> boundary_fns(const NoiseSchedule& schedule, double tau);

// F_θ(a^τ, τ | s) wrapped in the skip/out parameterization. The network input
// is [state, c_in(τ)·a^τ, log(τ)/4].
class ConsistencyNet {
 public:
  ConsistencyNet(std::size_t state_dim, std::size_t action_dim, std::size_t hidden_dim,
                 std::size_t num_hidden_layers, NoiseSchedule schedule);

  ParamSet init_params(Rng& rng) const;

  // c_skip(τ)·a^τ + c_out(τ)·F_θ(a^τ, τ | s), one τ per row.
  Tensor apply(const ParamSet& params, const Tensor& states, const Tensor& noised,
               std::span<const double> taus, MlpTrace* trace = nullptr) const;
  // F_θ alone, for probing hidden activations.
  Tensor network(const ParamSet& params, const Tensor& states, const Tensor& noised,
                 std::span<const double> taus, MlpTrace* trace = nullptr) const;

  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  const MlpSpec& spec() const { return spec_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  const std::vector<double>& times() const { return times_; }

 private:
  void check_taus(std::span<const double> taus, std::size_t rows) const;

  std::size_t state_dim_;
  std::size_t action_dim_;
  MlpSpec spec_;
  NoiseSchedule schedule_;
  std::vector<double> times_;
};

Tensor consistency_fn(const ConsistencyNet& net, const ParamSet& params, const Tensor& states,
                      const Tensor& noised, std::span<const double> taus);

// Per-row indices k and noise z used by one evaluation of the loss.
struct ConsistencyDraw {
  std::vector<std::size_t> k;  // 1-based, in [1, N−1]
  std::vector<double> z;       // rows × action_dim
};

// Mean over rows of ‖π_θ(s, a + τ_{k+1} z, τ_{k+1}) − π_θ̄(s, a + τ_k z, τ_k)‖²,
// k ~ U{1..N−1}, one shared z per row. The target branch is not differentiated.
Tensor consistency_loss(const ConsistencyNet& net, const ParamSet& online, const ParamSet& target,
                        const Tensor& states, const Tensor& actions, Rng& rng,
                        ConsistencyDraw* draw = nullptr);
Tensor consistency_loss(const ConsistencyNet& net, const ParamSet& online, const ParamSet& target,
                        const Tensor& states, const Tensor& actions, const ConsistencyDraw& draw);

// One- or multi-step generation from a^K ~ N(0, K²I); result clamped to [−1, 1].
// Differentiable with respect to params when a tape is active.
Tensor sample_action(const ConsistencyNet& net, const ParamSet& params, const Tensor& states,
                     Rng& rng, std::size_t steps = 1);

}  // namespace cp3er

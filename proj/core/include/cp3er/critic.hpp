#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "cp3er/ndgrad.hpp"
#include "cp3er/nets.hpp"
#include "cp3er/optim.hpp"
#include "cp3er/rng.hpp"

namespace cp3er {

inline constexpr double kMogStdFloor = 1e-3;

// One state-action value distribution: Σ_j w_j N(μ_j, σ_j²).
struct MoGParams {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> stds;

  std::size_t components() const { return weights.size(); }
  void validate() const;
  double mean() const;
  double variance() const;
};

double mog_log_prob(const MoGParams& dist, double x);
// Categorical component draw followed by a Gaussian draw, count times.
std::vector<double> mog_sample(const MoGParams& dist, Rng& rng, std::size_t count);

// Differentiable batch of mixtures, each tensor [batch×C].
struct MogBatch {
  Tensor log_weights;
  Tensor means;
  Tensor stds;

  std::size_t rows() const { return means.size(0); }
  std::size_t components() const { return means.size(1); }
  MoGParams row(std::size_t r) const;
};

// Raw network output [batch×3C] → (log-softmax weights, means, softplus stds + floor).
MogBatch mog_from_raw(const Tensor& raw, std::size_t components);
// targets [batch×M] → log-probabilities [batch×M].
Tensor mog_log_prob(const MogBatch& dist, const Tensor& targets);
// Σ_j w_j μ_j per row, [batch×1].
Tensor q_mean(const MogBatch& dist);

struct CriticOptions {
  std::size_t hidden_dim = 1024;
  std::size_t num_hidden_layers = 2;
  std::size_t components = 3;
  std::size_t target_samples = 20;  // M
  double ema_rate = 0.01;
  bool zero_final = false;
};

// Single online MoG Q-network with an EMA target copy.
class Critic {
 public:
  Critic(std::size_t state_dim, std::size_t action_dim, const CriticOptions& options, Rng& rng);

  MogBatch forward(const ParamSet& params, const Tensor& states, const Tensor& actions) const;
  MogBatch forward(const Tensor& states, const Tensor& actions) const { return forward(params_, states, actions); }
  MogBatch forward_target(const Tensor& states, const Tensor& actions) const {
    return forward(target_.params(), states, actions);
  }

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  EmaTarget& target() { return target_; }
  const EmaTarget& target() const { return target_; }
  const MlpSpec& spec() const { return spec_; }
  const CriticOptions& options() const { return options_; }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }

 private:
  std::size_t state_dim_;
  std::size_t action_dim_;
  CriticOptions options_;
  MlpSpec spec_;
  ParamSet params_;
  EmaTarget target_;
};

MogBatch critic_forward(const Critic& critic, const ParamSet& params, const Tensor& states,
                        const Tensor& actions);

// Draws one next action per row; called with gradient tracking suspended.
using NextActionSampler = std::function<Tensor(const Tensor& next_states, Rng& rng)>;

struct CriticBatch {
  Tensor states;       // [batch×S], may carry encoder gradients
  Tensor actions;      // [batch×A]
  Tensor next_states;  // [batch×S], treated as constant
  std::vector<double> reward_sums;  // Σ_{i<n} γ^i r_{t+i}
  std::vector<double> discounts;    // γ^n, or 0 after a terminal transition
};

struct CriticLossOutput {
  Tensor loss;
  Tensor targets;  // [batch×M] bootstrapped atoms R + γⁿ z'
};

// −(1/M) Σ_i mean_batch log Z_φ(s,a)(R + γⁿ z'_i), z'_i ~ Z_φ̄(s', a'), a' from the sampler.
CriticLossOutput critic_loss(const Critic& critic, const ParamSet& online, const ParamSet& target,
                             const NextActionSampler& next_action, const CriticBatch& batch,
                             std::size_t samples, Rng& rng);

}  // namespace cp3er

#pragma once

#include <cstddef>
#include <memory>

#include "cp3er/consistency.hpp"
#include "cp3er/critic.hpp"
#include "cp3er/ndgrad.hpp"
#include "cp3er/nets.hpp"
#include "cp3er/optim.hpp"
#include "cp3er/rng.hpp"

namespace cp3er {

// Uniform draw on [−1, 1]^dim for each row.
Tensor uniform_actions(std::size_t rows, std::size_t dim, Rng& rng);

// Stochastic state-conditioned policy.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::size_t state_dim() const = 0;
  virtual std::size_t action_dim() const = 0;
  // Actions in [−1, 1]; differentiable with respect to params() under an active tape.
  virtual Tensor sample(const Tensor& states, Rng& rng) const = 0;
  virtual ParamSet& params() = 0;
  virtual const ParamSet& params() const = 0;
};

struct ConsistencyActorOptions {
  std::size_t hidden_dim = 1024;
  std::size_t num_hidden_layers = 2;
  NoiseSchedule schedule{};
  double eta = 0.05;
  std::size_t sampling_steps = 1;
  double ema_rate = 0.01;
};

class ConsistencyActor : public Policy {
 public:
  ConsistencyActor(std::size_t state_dim, std::size_t action_dim,
                   const ConsistencyActorOptions& options, Rng& rng);

  std::size_t state_dim() const override { return net_.state_dim(); }
  std::size_t action_dim() const override { return net_.action_dim(); }
  Tensor sample(const Tensor& states, Rng& rng) const override;
  ParamSet& params() override { return params_; }
  const ParamSet& params() const override { return params_; }

  const ConsistencyNet& net() const { return net_; }
  EmaTarget& target() { return target_; }
  const EmaTarget& target() const { return target_; }
  double eta() const { return options_.eta; }
  const ConsistencyActorOptions& options() const { return options_; }

 private:
  ConsistencyActorOptions options_;
  ConsistencyNet net_;
  ParamSet params_;
  EmaTarget target_;
};

struct GaussianActorOptions {
  std::size_t hidden_dim = 1024;
  std::size_t num_hidden_layers = 2;
  double temperature = 0.1;
  double log_std_min = -10.0;
  double log_std_max = 2.0;
};

// Tanh-squashed diagonal Gaussian policy used as the max-entropy comparator.
class GaussianActor : public Policy {
 public:
  GaussianActor(std::size_t state_dim, std::size_t action_dim, const GaussianActorOptions& options,
                Rng& rng);

  struct Draw {
    Tensor actions;    // [batch×A], tanh(u)
    Tensor log_probs;  // [batch×1], includes the tanh Jacobian
    Tensor means;      // [batch×A]
    Tensor log_stds;   // [batch×A], within [log_std_min, log_std_max]
  };

  Draw draw(const Tensor& states, Rng& rng) const;
  // Log-density of tanh-squashed actions given pre-squash means and log-stds (1-row helper).
  static double log_prob(double action, double mean, double log_std);

  std::size_t state_dim() const override { return spec_.input_dim; }
  std::size_t action_dim() const override { return action_dim_; }
  Tensor sample(const Tensor& states, Rng& rng) const override { return draw(states, rng).actions; }
  ParamSet& params() override { return params_; }
  const ParamSet& params() const override { return params_; }
  double temperature() const { return options_.temperature; }
  const GaussianActorOptions& options() const { return options_; }
  const MlpSpec& spec() const { return spec_; }

 private:
  std::size_t action_dim_;
  GaussianActorOptions options_;
  MlpSpec spec_;
  ParamSet params_;
};

// a ~ uniform on [−1,1]^d while exploring, otherwise one policy draw.
Tensor act(const Policy& policy, const Tensor& states, Rng& rng, bool explore);

// −mean Q(s, a), a drawn from the policy with gradients through the action.
// Critic parameters are frozen for the duration of the call.
Tensor q_loss(const Policy& policy, Critic& critic, const Tensor& states, Rng& rng);

struct ActorLoss {
  Tensor total;
  double q_loss = 0.0;
  double consistency_loss = 0.0;
};

// q_loss(states) + η · consistency_loss(reg_states, reg_actions); RNG order: q term first.
ActorLoss regularized_loss(const ConsistencyActor& actor, Critic& critic, const Tensor& states,
                           const Tensor& reg_states, const Tensor& reg_actions, Rng& rng);

// Consistency loss against the actor's EMA target only (no Q term).
Tensor actor_consistency_loss(const ConsistencyActor& actor, const Tensor& states,
                              const Tensor& actions, Rng& rng);

// −E[Q(s, a) − temperature·log π(a|s)] with reparameterized samples.
Tensor gaussian_maxent_loss(const GaussianActor& actor, Critic& critic, const Tensor& states, Rng& rng);

}  // namespace cp3er

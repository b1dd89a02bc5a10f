#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "cp3er/actor.hpp"
#include "cp3er/checkpoint.hpp"
#include "cp3er/config.hpp"
#include "cp3er/critic.hpp"
#include "cp3er/diagnostics.hpp"
#include "cp3er/envs.hpp"
#include "cp3er/nets.hpp"
#include "cp3er/optim.hpp"
#include "cp3er/replay.hpp"

namespace cp3er {

enum class Variant { kCp3er, kConsistencyAc, kMaxentCpUniform, kCp3erUrb, kGaussianMaxent };

Variant parse_variant(const std::string& name);
const char* variant_name(Variant v);

struct UpdateInfo {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  std::optional<double> consistency_loss;
  double q_mean = 0.0;
};

// Encoder, MoG critic and policy of one run plus their optimizers.
class Agent {
 public:
  Agent(const Config& config, const EnvSpec& env, Rng& rng);

  Variant variant() const { return variant_; }
  bool pixels() const { return encoder_.has_value(); }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }

  // observations [batch×obs_size] → actor/critic inputs [batch×state_dim].
  Tensor encode(const Tensor& observations, bool augment, Rng& rng) const;

  std::vector<double> act(std::span<const double> observation, Rng& rng, bool explore) const;
  // `count` policy draws for a single observation, flattened row-major.
  std::vector<double> sample_actions(std::span<const double> observation, std::size_t count, Rng& rng) const;

  // One critic update followed by one actor update on a PPE batch.
  UpdateInfo update(const ReplayBuffer& buffer, Rng& rng);
  // Policy-MLP dormant ratio on PPE-sampled states.
  DormantReport dormant(const ReplayBuffer& buffer, Rng& rng) const;

  // PPE draw restricted to indices whose n-step window is complete.
  std::vector<std::size_t> sample_ready(const ReplayBuffer& buffer, std::size_t count, Rng& rng) const;

  Policy& policy() { return *policy_; }
  const Policy& policy() const { return *policy_; }
  Critic& critic() { return *critic_; }
  const ConsistencyActor* consistency_actor() const { return consistency_; }
  std::uint64_t updates() const { return updates_; }
  std::uint64_t q_loss_calls() const { return q_loss_calls_; }

  void save(Checkpoint& ckpt) const;
  void load(const Checkpoint& ckpt);

 private:
  Tensor observation_tensor(std::span<const double> obs, std::size_t rows) const;
  Tensor gather_observations(const ReplayBuffer& buffer, std::span<const std::size_t> indices) const;

  Config config_;
  Variant variant_;
  EnvSpec env_;
  std::size_t state_dim_;
  std::size_t action_dim_;
  std::optional<ConvEncoderSpec> encoder_;
  ParamSet encoder_params_;
  std::unique_ptr<Critic> critic_;
  std::unique_ptr<Policy> policy_;
  ConsistencyActor* consistency_ = nullptr;
  GaussianActor* gaussian_ = nullptr;
  std::unique_ptr<Adam> critic_opt_;
  std::unique_ptr<Adam> actor_opt_;
  std::uint64_t updates_ = 0;
  std::uint64_t q_loss_calls_ = 0;
};

}  // namespace cp3er

#include "cp3er/agent.hpp"

#include <algorithm>

namespace cp3er {

Variant parse_variant(const std::string& name) {
  if (name == "cp3er") return Variant::kCp3er;
  if (name == "consistency_ac") return Variant::kConsistencyAc;
  if (name == "maxent_cp_uniform") return Variant::kMaxentCpUniform;
  if (name == "cp3er_urb") return Variant::kCp3erUrb;
  if (name == "gaussian_maxent") return Variant::kGaussianMaxent;
  throw ConfigError("unknown actor variant '" + name + "'");
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kCp3er: return "cp3er";
    case Variant::kConsistencyAc: return "consistency_ac";
    case Variant::kMaxentCpUniform: return "maxent_cp_uniform";
    case Variant::kCp3erUrb: return "cp3er_urb";
    case Variant::kGaussianMaxent: return "gaussian_maxent";
  }
  return "?";
}

Agent::Agent(const Config& config, const EnvSpec& env, Rng& rng)
    : config_(config), variant_(parse_variant(config.actor_variant)), env_(env), action_dim_(env.action_dim) {
  config_.validate();
  if (env.kind == ObservationKind::kPixels) {
    ConvEncoderSpec spec;
    spec.channels = env.observation_shape.at(0);
    spec.height = env.observation_shape.at(1);
    spec.width = env.observation_shape.at(2);
    spec.feature_dim = config.feature_dim;
    encoder_ = spec;
    encoder_params_ = init_encoder_params(spec, rng);
    state_dim_ = spec.feature_dim;
  } else {
    state_dim_ = env.observation_size();
  }

  CriticOptions copts;
  copts.hidden_dim = config.hidden_dim;
  copts.num_hidden_layers = config.num_hidden_layers;
  copts.components = config.mog_components;
  copts.target_samples = config.mog_samples;
  copts.ema_rate = config.tau_ema;
  critic_ = std::make_unique<Critic>(state_dim_, action_dim_, copts, rng);

  if (variant_ == Variant::kGaussianMaxent) {
    GaussianActorOptions gopts;
    gopts.hidden_dim = config.hidden_dim;
    gopts.num_hidden_layers = config.num_hidden_layers;
    gopts.temperature = config.gaussian_temperature;
    auto actor = std::make_unique<GaussianActor>(state_dim_, action_dim_, gopts, rng);
    gaussian_ = actor.get();
    policy_ = std::move(actor);
  } else {
    ConsistencyActorOptions aopts;
    aopts.hidden_dim = config.hidden_dim;
    aopts.num_hidden_layers = config.num_hidden_layers;
    aopts.eta = variant_ == Variant::kConsistencyAc ? 0.0 : config.eta;
    aopts.sampling_steps = config.sampling_steps;
    aopts.ema_rate = config.tau_ema;
    auto actor = std::make_unique<ConsistencyActor>(state_dim_, action_dim_, aopts, rng);
    consistency_ = actor.get();
    policy_ = std::move(actor);
  }

  AdamOptions opt;
  opt.lr = config.lr;
  opt.max_grad_norm = config.grad_clip;
  ParamSet critic_side = critic_->params();
  critic_side.extend(encoder_params_);
  critic_opt_ = std::make_unique<Adam>(critic_side, opt);
  actor_opt_ = std::make_unique<Adam>(policy_->params(), opt);
}

Tensor Agent::observation_tensor(std::span<const double> obs, std::size_t rows) const {
  const std::size_t size = env_.observation_size();
  std::vector<double> data(obs.begin(), obs.end());
  if (data.size() != rows * size) throw DimensionError("agent: observation size mismatch");
  if (encoder_) {
    Shape shape{rows};
    shape.insert(shape.end(), env_.observation_shape.begin(), env_.observation_shape.end());
    return Tensor(std::move(shape), std::move(data));
  }
  return Tensor({rows, size}, std::move(data));
}

Tensor Agent::encode(const Tensor& observations, bool augment, Rng& rng) const {
  if (!encoder_) return observations;
  Tensor frames = observations;
  if (frames.dim() == 2) {
    Shape shape{frames.size(0)};
    shape.insert(shape.end(), env_.observation_shape.begin(), env_.observation_shape.end());
    frames = reshape(frames, shape);
  }
  if (augment) frames = random_shift_aug(frames, rng);
  return encoder_forward(*encoder_, encoder_params_, frames);
}

std::vector<double> Agent::act(std::span<const double> observation, Rng& rng, bool explore) const {
  Tape::Pause pause;
  if (explore) {
    Tensor a = uniform_actions(1, action_dim_, rng);
    return {a.data().begin(), a.data().end()};
  }
  Tensor state = encode(observation_tensor(observation, 1), false, rng);
  Tensor a = policy_->sample(state, rng);
  return {a.data().begin(), a.data().end()};
}

std::vector<double> Agent::sample_actions(std::span<const double> observation, std::size_t count,
                                          Rng& rng) const {
  Tape::Pause pause;
  Tensor state = encode(observation_tensor(observation, 1), false, rng);
  Tensor a = policy_->sample(repeat_rows(state, count), rng);
  return {a.data().begin(), a.data().end()};
}

std::vector<std::size_t> Agent::sample_ready(const ReplayBuffer& buffer, std::size_t count, Rng& rng) const {
  std::vector<std::size_t> out;
  out.reserve(count);
  std::size_t attempts = 0;
  while (out.size() < count) {
    if (++attempts > 64) throw InsufficientDataError("agent: no complete n-step windows to sample");
    for (std::size_t i : buffer.sample_ppe(config_.alpha, count - out.size(), rng)) {
      if (buffer.nstep_ready(i, config_.n_step)) out.push_back(i);
    }
  }
  return out;
}

Tensor Agent::gather_observations(const ReplayBuffer& buffer, std::span<const std::size_t> indices) const {
  const std::size_t size = buffer.observation_size();
  std::vector<double> data;
  data.reserve(indices.size() * size);
  for (std::size_t i : indices) {
    auto o = buffer.observation(i);
    data.insert(data.end(), o.begin(), o.end());
  }
  return Tensor({indices.size(), size}, std::move(data));
}

UpdateInfo Agent::update(const ReplayBuffer& buffer, Rng& rng) {
  UpdateInfo info;
  const std::vector<std::size_t> indices = sample_ready(buffer, config_.batch_size, rng);
  NStepBatch nb = buffer.assemble_nstep(indices, config_.n_step, config_.gamma);

  Tensor states;
  {
    Tape tape;
    Tape::Scope scope(tape);
    states = encode(nb.observations, true, rng);
    Tensor next_states;
    {
      Tape::Pause pause;
      next_states = encode(nb.next_observations, true, rng).detach();
    }
    CriticBatch cb{states, nb.actions, next_states, nb.reward_sums, nb.discounts};
    const Policy& policy = *policy_;
    NextActionSampler next = [&policy](const Tensor& s, Rng& r) { return policy.sample(s, r); };
    CriticLossOutput out = critic_loss(*critic_, critic_->params(), critic_->target().params(), next, cb,
                                       config_.mog_samples, rng);
    tape.backward(out.loss);
    critic_opt_->step();
    critic_->target().update(critic_->params());
    info.critic_loss = out.loss.item();
    double total = 0.0;
    for (double v : out.targets.data()) total += v;
    info.q_mean = total / static_cast<double>(out.targets.numel());
  }

  Tensor actor_states = states.detach();
  {
    Tape tape;
    Tape::Scope scope(tape);
    Tensor loss;
    if (gaussian_ != nullptr) {
      ++q_loss_calls_;
      loss = gaussian_maxent_loss(*gaussian_, *critic_, actor_states, rng);
    } else if (config_.consistency_only) {
      loss = actor_consistency_loss(*consistency_, actor_states, nb.actions, rng);
      info.consistency_loss = loss.item();
    } else if (consistency_->eta() == 0.0) {
      ++q_loss_calls_;
      loss = q_loss(*consistency_, *critic_, actor_states, rng);
    } else {
      Tensor reg_states = actor_states;
      Tensor reg_actions = nb.actions;
      if (variant_ == Variant::kMaxentCpUniform) {
        reg_actions = uniform_actions(nb.actions.size(0), action_dim_, rng);
      } else if (variant_ == Variant::kCp3erUrb) {
        const std::vector<std::size_t> uni = buffer.sample_uniform(config_.batch_size, rng);
        Tape::Pause pause;
        reg_states = encode(gather_observations(buffer, uni), true, rng).detach();
        std::vector<double> acts;
        acts.reserve(uni.size() * action_dim_);
        for (std::size_t i : uni) {
          auto a = buffer.action(i);
          acts.insert(acts.end(), a.begin(), a.end());
        }
        reg_actions = Tensor({uni.size(), action_dim_}, std::move(acts));
      }
      ++q_loss_calls_;
      ActorLoss al = regularized_loss(*consistency_, *critic_, actor_states, reg_states, reg_actions, rng);
      loss = al.total;
      info.consistency_loss = al.consistency_loss;
    }
    tape.backward(loss);
    actor_opt_->step();
    if (consistency_ != nullptr) consistency_->target().update(consistency_->params());
    info.actor_loss = loss.item();
  }
  critic_->params().zero_grad();
  encoder_params_.zero_grad();
  ++updates_;
  return info;
}

DormantReport Agent::dormant(const ReplayBuffer& buffer, Rng& rng) const {
  Tape::Pause pause;
  const std::vector<std::size_t> idx = buffer.sample_ppe(config_.alpha, config_.dormant_probe, rng);
  Tensor states = encode(gather_observations(buffer, idx), false, rng);
  if (consistency_ != nullptr) {
    return dormant_ratio(consistency_->net(), consistency_->params(), states, rng, config_.tau_d);
  }
  return dormant_ratio(gaussian_->spec(), gaussian_->params(), states, config_.tau_d);
}

void Agent::save(Checkpoint& ckpt) const {
  ckpt.add_params("critic", critic_->params());
  ckpt.add_params("critic_target", critic_->target().params());
  ckpt.add_params("actor", policy_->params());
  if (consistency_ != nullptr) ckpt.add_params("actor_target", consistency_->target().params());
  if (encoder_) ckpt.add_params("encoder", encoder_params_);
  ckpt.set_meta("updates", std::to_string(updates_));
}

void Agent::load(const Checkpoint& ckpt) {
  ckpt.restore_params("critic", critic_->params());
  ckpt.restore_params("critic_target", critic_->target().params());
  ckpt.restore_params("actor", policy_->params());
  if (consistency_ != nullptr) {
    ckpt.restore_params("actor_target", consistency_->target().params());
  }
  if (encoder_) ckpt.restore_params("encoder", encoder_params_);
  if (ckpt.has_meta("updates")) updates_ = std::stoull(ckpt.meta("updates"));
}

}  // namespace cp3er

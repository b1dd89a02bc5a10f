#include "cp3er/critic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace cp3er {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

}  // namespace

void MoGParams::validate() const {
  const std::size_t c = weights.size();
  if (c == 0 || means.size() != c || stds.size() != c) {
    throw DimensionError("MoGParams: component arrays must be non-empty and equal length");
  }
  double total = 0.0;
  for (std::size_t j = 0; j < c; ++j) {
    if (weights[j] < 0.0) throw ContractError("MoGParams: negative weight");
    if (!(stds[j] > 0.0)) throw ContractError("MoGParams: non-positive std");
    total += weights[j];
  }
  if (std::abs(total - 1.0) > 1e-9) throw ContractError("MoGParams: weights do not sum to 1");
}

double MoGParams::mean() const {
  double m = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) m += weights[j] * means[j];
  return m;
}

double MoGParams::variance() const {
  const double m = mean();
  double second = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    second += weights[j] * (stds[j] * stds[j] + means[j] * means[j]);
  }
  return second - m * m;
}

double mog_log_prob(const MoGParams& dist, double x) {
  dist.validate();
  double peak = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(dist.components());
  for (std::size_t j = 0; j < terms.size(); ++j) {
    const double z = (x - dist.means[j]) / dist.stds[j];
    terms[j] = std::log(dist.weights[j]) - 0.5 * z * z - std::log(dist.stds[j]) - kHalfLog2Pi;
    peak = std::max(peak, terms[j]);
  }
  if (!std::isfinite(peak)) return peak;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - peak);
  return peak + std::log(acc);
}

std::vector<double> mog_sample(const MoGParams& dist, Rng& rng, std::size_t count) {
  dist.validate();
  std::vector<double> out(count);
  for (double& v : out) {
    double u = rng.uniform();
    std::size_t j = 0;
    while (j + 1 < dist.components() && u >= dist.weights[j]) {
      u -= dist.weights[j];
      ++j;
    }
    v = dist.means[j] + dist.stds[j] * rng.normal();
  }
  return out;
}

MoGParams MogBatch::row(std::size_t r) const {
  const std::size_t c = components();
  MoGParams p;
  auto lw = log_weights.data();
  auto mu = means.data();
  auto sd = stds.data();
  for (std::size_t j = 0; j < c; ++j) {
    p.weights.push_back(std::exp(lw[r * c + j]));
    p.means.push_back(mu[r * c + j]);
    p.stds.push_back(sd[r * c + j]);
  }
  double total = 0.0;
  for (double w : p.weights) total += w;
  for (double& w : p.weights) w /= total;
  return p;
}

MogBatch mog_from_raw(const Tensor& raw, std::size_t components) {
  if (raw.dim() != 2 || raw.size(1) != 3 * components) {
    throw DimensionError("mog_from_raw: expected [batch×" + std::to_string(3 * components) +
                         "], got " + shape_str(raw.shape()));
  }
  const std::size_t rows = raw.size(0);
  Tensor logits = slice_cols(raw, 0, components);
  Tensor lse = expand(log_sum_exp(logits, 1), rows, components);
  MogBatch out;
  out.log_weights = sub(logits, lse);
  out.means = slice_cols(raw, components, 2 * components);
  out.stds = add_scalar(softplus(slice_cols(raw, 2 * components, 3 * components)), kMogStdFloor);
  return out;
}

Tensor mog_log_prob(const MogBatch& dist, const Tensor& targets) {
  const std::size_t rows = dist.rows();
  const std::size_t c = dist.components();
  if (targets.dim() != 2 || targets.size(0) != rows) {
    throw DimensionError("mog_log_prob: targets must be [" + std::to_string(rows) + "×M]");
  }
  const std::size_t m = targets.size(1);
  Tensor x = expand(reshape(targets, {rows * m, 1}), rows * m, c);
  Tensor mu = repeat_rows(dist.means, m);
  Tensor sd = repeat_rows(dist.stds, m);
  Tensor lw = repeat_rows(dist.log_weights, m);
  Tensor z = div(sub(x, mu), sd);
  Tensor comp = sub(sub(lw, scale(square(z), 0.5)), add_scalar(log(sd), kHalfLog2Pi));
  return reshape(log_sum_exp(comp, 1), {rows, m});
}

Tensor q_mean(const MogBatch& dist) { return sum(mul(exp(dist.log_weights), dist.means), 1); }

Critic::Critic(std::size_t state_dim, std::size_t action_dim, const CriticOptions& options, Rng& rng)
    : state_dim_(state_dim),
      action_dim_(action_dim),
      options_(options),
      spec_{state_dim + action_dim, options.hidden_dim, options.num_hidden_layers,
            3 * options.components, Activation::kIdentity, options.zero_final},
      params_(init_mlp_params(spec_, rng)),
      target_(params_, options.ema_rate) {
  if (options.components == 0) throw ContractError("Critic: need at least one mixture component");
}

MogBatch Critic::forward(const ParamSet& params, const Tensor& states, const Tensor& actions) const {
  if (actions.dim() != 2 || actions.size(1) != action_dim_) {
    throw DimensionError("critic_forward: actions must be [batch×" + std::to_string(action_dim_) +
                         "], got " + shape_str(actions.shape()));
  }
  if (states.dim() != 2 || states.size(0) != actions.size(0) || states.size(1) != state_dim_) {
    throw DimensionError("critic_forward: states must be [batch×" + std::to_string(state_dim_) +
                         "], got " + shape_str(states.shape()));
  }
  Tensor raw = mlp_forward(spec_, params, concat_cols({states, actions}));
  return mog_from_raw(raw, options_.components);
}

MogBatch critic_forward(const Critic& critic, const ParamSet& params, const Tensor& states,
                        const Tensor& actions) {
  return critic.forward(params, states, actions);
}

CriticLossOutput critic_loss(const Critic& critic, const ParamSet& online, const ParamSet& target,
                             const NextActionSampler& next_action, const CriticBatch& batch,
                             std::size_t samples, Rng& rng) {
  if (samples < 1) throw ContractError("critic_loss: need at least one target sample");
  const std::size_t rows = batch.actions.size(0);
  if (batch.reward_sums.size() != rows || batch.discounts.size() != rows) {
    throw DimensionError("critic_loss: reward/discount vectors do not match batch");
  }
  std::vector<double> atoms(rows * samples);
  {
    Tape::Pause pause;
    Tensor next_states = batch.next_states.detach();
    Tensor next_actions = next_action(next_states, rng);
    MogBatch next = critic.forward(target, next_states, next_actions);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto draws = mog_sample(next.row(r), rng, samples);
      for (std::size_t i = 0; i < samples; ++i) {
        atoms[r * samples + i] = batch.reward_sums[r] + batch.discounts[r] * draws[i];
      }
    }
  }
  Tensor targets({rows, samples}, std::move(atoms));
  MogBatch dist = critic.forward(online, batch.states, batch.actions);
  Tensor log_probs = mog_log_prob(dist, targets);
  return {neg(mean(log_probs)), targets};
}

}  // namespace cp3er

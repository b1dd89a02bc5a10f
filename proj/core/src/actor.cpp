#include "cp3er/actor.hpp"

#include <cmath>
#include <numbers>

namespace cp3er {

Tensor uniform_actions(std::size_t rows, std::size_t dim, Rng& rng) {
  std::vector<double> values(rows * dim);
  for (double& v : values) v = rng.uniform(-1.0, 1.0);
  return Tensor({rows, dim}, std::move(values));
}

ConsistencyActor::ConsistencyActor(std::size_t state_dim, std::size_t action_dim,
                                   const ConsistencyActorOptions& options, Rng& rng)
    : options_(options),
      net_(state_dim, action_dim, options.hidden_dim, options.num_hidden_layers, options.schedule),
      params_(net_.init_params(rng)),
      target_(params_, options.ema_rate) {
  if (options.eta < 0.0) throw ContractError("ConsistencyActor: eta must be non-negative");
  if (options.sampling_steps == 0) throw ContractError("ConsistencyActor: sampling_steps must be >= 1");
}

Tensor ConsistencyActor::sample(const Tensor& states, Rng& rng) const {
  return sample_action(net_, params_, states, rng, options_.sampling_steps);
}

GaussianActor::GaussianActor(std::size_t state_dim, std::size_t action_dim,
                             const GaussianActorOptions& options, Rng& rng)
    : action_dim_(action_dim),
      options_(options),
      spec_{state_dim, options.hidden_dim, options.num_hidden_layers, 2 * action_dim,
            Activation::kIdentity, false},
      params_(init_mlp_params(spec_, rng)) {
  if (options.temperature < 0.0) throw ContractError("GaussianActor: temperature must be non-negative");
}

GaussianActor::Draw GaussianActor::draw(const Tensor& states, Rng& rng) const {
  const std::size_t rows = states.size(0);
  const std::size_t dim = action_dim_;
  Tensor out = mlp_forward(spec_, params_, states);
  Draw d;
  d.means = slice_cols(out, 0, dim);
  // Soft clamp of the log-std into [min, max].
  const double lo = options_.log_std_min, hi = options_.log_std_max;
  d.log_stds = add_scalar(scale(add_scalar(tanh(slice_cols(out, dim, 2 * dim)), 1.0), 0.5 * (hi - lo)), lo);
  std::vector<double> eps(rows * dim);
  for (double& v : eps) v = rng.normal();
  Tensor noise({rows, dim}, eps);
  Tensor pre = add(d.means, mul(exp(d.log_stds), noise));
  d.actions = tanh(pre);
  // log N(u; μ, σ) − log(1 − tanh²u), with log(1 − tanh²u) = 2(log 2 − u − softplus(−2u)).
  std::vector<double> half_sq(rows * dim);
  for (std::size_t i = 0; i < eps.size(); ++i) half_sq[i] = -0.5 * eps[i] * eps[i] - 0.5 * std::log(2.0 * std::numbers::pi);
  Tensor gauss = sub(Tensor({rows, dim}, std::move(half_sq)), d.log_stds);
  Tensor log_jac = scale(sub(add_scalar(neg(pre), std::numbers::ln2), softplus(scale(pre, -2.0))), 2.0);
  d.log_probs = sum(sub(gauss, log_jac), 1);
  return d;
}

double GaussianActor::log_prob(double action, double mean, double log_std) {
  const double u = std::atanh(action);
  const double sd = std::exp(log_std);
  const double z = (u - mean) / sd;
  return -0.5 * z * z - log_std - 0.5 * std::log(2.0 * std::numbers::pi) - std::log1p(-action * action);
}

Tensor act(const Policy& policy, const Tensor& states, Rng& rng, bool explore) {
  if (explore) return uniform_actions(states.size(0), policy.action_dim(), rng);
  Tape::Pause pause;
  return policy.sample(states, rng);
}

Tensor q_loss(const Policy& policy, Critic& critic, const Tensor& states, Rng& rng) {
  Tensor actions = policy.sample(states, rng);
  FreezeGuard freeze(critic.params());
  return neg(mean(q_mean(critic.forward(states, actions))));
}

Tensor actor_consistency_loss(const ConsistencyActor& actor, const Tensor& states,
                              const Tensor& actions, Rng& rng) {
  return consistency_loss(actor.net(), actor.params(), actor.target().params(), states, actions, rng);
}

ActorLoss regularized_loss(const ConsistencyActor& actor, Critic& critic, const Tensor& states,
                           const Tensor& reg_states, const Tensor& reg_actions, Rng& rng) {
  Tensor q = q_loss(actor, critic, states, rng);
  Tensor c = actor_consistency_loss(actor, reg_states, reg_actions, rng);
  ActorLoss out;
  out.q_loss = q.item();
  out.consistency_loss = c.item();
  out.total = add(q, scale(c, actor.eta()));
  return out;
}

Tensor gaussian_maxent_loss(const GaussianActor& actor, Critic& critic, const Tensor& states, Rng& rng) {
  GaussianActor::Draw d = actor.draw(states, rng);
  FreezeGuard freeze(critic.params());
  Tensor q = q_mean(critic.forward(states, d.actions));
  return neg(mean(sub(q, scale(d.log_probs, actor.temperature()))));
}

}  // namespace cp3er

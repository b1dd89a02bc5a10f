#include "cp3er/consistency.hpp"

#include <cmath>
#include <string>

namespace cp3er {

void NoiseSchedule::validate() const {
  if (num_points < 2) throw ContractError("NoiseSchedule: N must be at least 2");
  if (!(epsilon > 0.0) || !(max_time > epsilon)) {
    throw ContractError("NoiseSchedule: require 0 < epsilon < K");
  }
  if (!(rho > 0.0) || !(sigma_data > 0.0)) throw ContractError("NoiseSchedule: rho and sigma_data must be positive");
}

std::vector<double> NoiseSchedule::times() const {
  validate();
  const double lo = std::pow(epsilon, 1.0 / rho);
  const double hi = std::pow(max_time, 1.0 / rho);
  std::vector<double> out(num_points);
  for (std::size_t k = 0; k < num_points; ++k) {
    const double frac = static_cast<double>(k) / static_cast<double>(num_points - 1);
    out[k] = std::pow(lo + frac * (hi - lo), rho);
  }
  out.front() = epsilon;
  out.back() = max_time;
  return out;
}

double NoiseSchedule::c_skip(double tau) const {
  if (tau < epsilon) throw ContractError("c_skip: tau below epsilon");
  const double shifted = tau - epsilon;
  const double s2 = sigma_data * sigma_data;
  return s2 / (shifted * shifted + s2);
}

double NoiseSchedule::c_out(double tau) const {
  if (tau < epsilon) throw ContractError("c_out: tau below epsilon");
  return sigma_data * (tau - epsilon) / std::sqrt(sigma_data * sigma_data + tau * tau);
}

double NoiseSchedule::c_in(double tau) const {
  return 1.0 / std::sqrt(sigma_data * sigma_data + tau * tau);
}

std::vector<double> schedule_times(const NoiseSchedule& schedule) { return schedule.times(); }

std::pair<double, double> boundary_fns(const NoiseSchedule& schedule, double tau) {
  return {schedule.c_skip(tau), schedule.c_out(tau)};
}

ConsistencyNet::ConsistencyNet(std::size_t state_dim, std::size_t action_dim, std::size_t hidden_dim,
                               std::size_t num_hidden_layers, NoiseSchedule schedule)
    : state_dim_(state_dim), action_dim_(action_dim), schedule_(schedule), times_(schedule.times()) {
  if (action_dim == 0) throw DimensionError("ConsistencyNet: action_dim must be positive");
  spec_.input_dim = state_dim + action_dim + 1;
  spec_.hidden_dim = hidden_dim;
  spec_.num_hidden_layers = num_hidden_layers;
  spec_.output_dim = action_dim;
  spec_.validate();
}

ParamSet ConsistencyNet::init_params(Rng& rng) const { return init_mlp_params(spec_, rng); }

void ConsistencyNet::check_taus(std::span<const double> taus, std::size_t rows) const {
  if (taus.size() != rows) {
    throw DimensionError("consistency_fn: " + std::to_string(taus.size()) + " taus for " +
                         std::to_string(rows) + " rows");
  }
  for (double t : taus) {
    if (!(t >= schedule_.epsilon && t <= schedule_.max_time)) {
      throw ContractError("consistency_fn: tau " + std::to_string(t) + " outside [epsilon, K]");
    }
  }
}

Tensor ConsistencyNet::network(const ParamSet& params, const Tensor& states, const Tensor& noised,
                               std::span<const double> taus, MlpTrace* trace) const {
  if (noised.dim() != 2 || noised.size(1) != action_dim_) {
    throw DimensionError("consistency_fn: noised action must be [batch×" +
                         std::to_string(action_dim_) + "], got " + shape_str(noised.shape()));
  }
  const std::size_t rows = noised.size(0);
  if (states.dim() != 2 || states.size(0) != rows || states.size(1) != state_dim_) {
    throw DimensionError("consistency_fn: states must be [" + std::to_string(rows) + "×" +
                         std::to_string(state_dim_) + "], got " + shape_str(states.shape()));
  }
  check_taus(taus, rows);
  std::vector<double> scale_in(rows * action_dim_), embed(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double cin = schedule_.c_in(taus[r]);
    for (std::size_t d = 0; d < action_dim_; ++d) scale_in[r * action_dim_ + d] = cin;
    embed[r] = std::log(taus[r]) / 4.0;
  }
  Tensor scaled = mul(noised, Tensor({rows, action_dim_}, std::move(scale_in)));
  Tensor input = concat_cols({states, scaled, Tensor({rows, 1}, std::move(embed))});
  return mlp_forward(spec_, params, input, trace);
}

Tensor ConsistencyNet::apply(const ParamSet& params, const Tensor& states, const Tensor& noised,
                             std::span<const double> taus, MlpTrace* trace) const {
  Tensor f = network(params, states, noised, taus, trace);
  const std::size_t rows = noised.size(0);
  std::vector<double> skip(rows * action_dim_), out(rows * action_dim_);
  for (std::size_t r = 0; r < rows; ++r) {
    const double cs = schedule_.c_skip(taus[r]);
    const double co = schedule_.c_out(taus[r]);
    for (std::size_t d = 0; d < action_dim_; ++d) {
      skip[r * action_dim_ + d] = cs;
      out[r * action_dim_ + d] = co;
    }
  }
  return add(mul(Tensor({rows, action_dim_}, std::move(skip)), noised),
             mul(Tensor({rows, action_dim_}, std::move(out)), f));
}

Tensor consistency_fn(const ConsistencyNet& net, const ParamSet& params, const Tensor& states,
                      const Tensor& noised, std::span<const double> taus) {
  return net.apply(params, states, noised, taus);
}

Tensor consistency_loss(const ConsistencyNet& net, const ParamSet& online, const ParamSet& target,
                        const Tensor& states, const Tensor& actions, Rng& rng, ConsistencyDraw* draw) {
  if (actions.dim() != 2 || actions.size(0) == 0) throw ContractError("consistency_loss: empty batch");
  const std::size_t rows = actions.size(0);
  const std::size_t dim = net.action_dim();
  const auto n = static_cast<std::int64_t>(net.times().size());
  ConsistencyDraw local;
  local.k.resize(rows);
  local.z.resize(rows * dim);
  for (std::size_t r = 0; r < rows; ++r) local.k[r] = static_cast<std::size_t>(rng.integer(1, n - 1));
  for (double& v : local.z) v = rng.normal();
  Tensor loss = consistency_loss(net, online, target, states, actions, local);
  if (draw) *draw = std::move(local);
  return loss;
}

Tensor consistency_loss(const ConsistencyNet& net, const ParamSet& online, const ParamSet& target,
                        const Tensor& states, const Tensor& actions, const ConsistencyDraw& draw) {
  if (actions.dim() != 2 || actions.size(0) == 0) throw ContractError("consistency_loss: empty batch");
  const std::size_t rows = actions.size(0);
  const std::size_t dim = net.action_dim();
  if (actions.size(1) != dim) throw DimensionError("consistency_loss: action width mismatch");
  if (draw.k.size() != rows || draw.z.size() != rows * dim) {
    throw DimensionError("consistency_loss: draw does not match batch");
  }
  const auto& times = net.times();
  std::vector<double> tau_hi(rows), tau_lo(rows);
  std::vector<double> noised_hi(rows * dim), noised_lo(rows * dim);
  auto a = actions.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t k = draw.k[r];
    if (k < 1 || k + 1 > times.size()) throw ContractError("consistency_loss: k out of range");
    tau_lo[r] = times[k - 1];
    tau_hi[r] = times[k];
    for (std::size_t d = 0; d < dim; ++d) {
      const std::size_t i = r * dim + d;
      noised_hi[i] = a[i] + tau_hi[r] * draw.z[i];
      noised_lo[i] = a[i] + tau_lo[r] * draw.z[i];
    }
  }
  Tensor pred = net.apply(online, states, Tensor({rows, dim}, std::move(noised_hi)), tau_hi);
  Tensor goal;
  {
    Tape::Pause pause;
    goal = net.apply(target, states.detach(), Tensor({rows, dim}, std::move(noised_lo)), tau_lo);
  }
  return scale(sum(square(sub(pred, goal))), 1.0 / static_cast<double>(rows));
}

Tensor sample_action(const ConsistencyNet& net, const ParamSet& params, const Tensor& states,
                     Rng& rng, std::size_t steps) {
  if (steps == 0) throw ContractError("sample_action: steps must be at least 1");
  if (states.dim() != 2) throw DimensionError("sample_action: states must be rank 2");
  const std::size_t rows = states.size(0);
  const std::size_t dim = net.action_dim();
  const auto& times = net.times();
  const NoiseSchedule& sched = net.schedule();

  std::vector<double> noise(rows * dim);
  for (double& v : noise) v = sched.max_time * rng.normal();
  std::vector<double> taus(rows, sched.max_time);
  Tensor x = clamp(net.apply(params, states, Tensor({rows, dim}, std::move(noise)), taus), -1.0, 1.0);

  // Re-noise to decreasing intermediate times on the schedule and denoise again.
  const std::size_t last = times.size() - 1;
  for (std::size_t s = 1; s < steps; ++s) {
    const std::size_t idx = last * (steps - s) / steps;
    if (idx == 0) break;
    const double tau = times[idx];
    const double spread = std::sqrt(tau * tau - sched.epsilon * sched.epsilon);
    std::vector<double> fresh(rows * dim);
    for (double& v : fresh) v = spread * rng.normal();
    Tensor noised = add(x, Tensor({rows, dim}, std::move(fresh)));
    std::fill(taus.begin(), taus.end(), tau);
    x = clamp(net.apply(params, states, noised, taus), -1.0, 1.0);
  }
  return x;
}

}  // namespace cp3er

#include "cp3er/replay.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cp3er {

namespace {

constexpr std::uint8_t kBoundary = 1;
constexpr std::uint8_t kTerminal = 2;

}  // namespace

double ppe_weight(double alpha, double delta_t, double capacity) {
  if (!(delta_t > 0.0)) throw ContractError("ppe_weight: delta_t must be positive");
  return 1.0 / (1.0 + std::exp(2.0 * alpha - alpha * 2.0 * capacity / delta_t));
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t observation_size, std::size_t action_dim)
    : capacity_(capacity), obs_size_(observation_size), action_dim_(action_dim) {
  if (capacity == 0 || observation_size == 0 || action_dim == 0) {
    throw ContractError("ReplayBuffer: capacity and dimensions must be positive");
  }
}

std::size_t ReplayBuffer::slot(std::size_t index) const {
  return size_ < capacity_ ? index : (cursor_ + index) % capacity_;
}

void ReplayBuffer::check_index(std::size_t index) const {
  if (index >= size_) {
    throw ContractError("ReplayBuffer: index " + std::to_string(index) + " out of range (size " +
                        std::to_string(size_) + ")");
  }
}

void ReplayBuffer::push(Transition t) {
  if (t.observation.size() != obs_size_ || t.action.size() != action_dim_) {
    throw DimensionError("ReplayBuffer::push: transition does not match buffer dimensions");
  }
  if (t.boundary && t.final_observation.size() != obs_size_) {
    throw DimensionError("ReplayBuffer::push: boundary transition needs a final observation");
  }
  if (t.terminal && !t.boundary) throw ContractError("ReplayBuffer::push: terminal implies boundary");
  if (any_pushed_ && t.insert_step < last_insert_) {
    throw ContractError("ReplayBuffer::push: insert_step must not decrease");
  }
  for (double a : t.action) {
    if (!(a >= -1.0 && a <= 1.0)) throw ContractError("ReplayBuffer::push: action outside [-1, 1]");
  }
  const std::uint8_t flags = (t.boundary ? kBoundary : 0) | (t.terminal ? kTerminal : 0);
  if (size_ < capacity_) {
    obs_.insert(obs_.end(), t.observation.begin(), t.observation.end());
    actions_.insert(actions_.end(), t.action.begin(), t.action.end());
    rewards_.push_back(t.reward);
    flags_.push_back(flags);
    insert_steps_.push_back(t.insert_step);
    final_obs_.push_back(t.boundary ? std::move(t.final_observation) : std::vector<double>{});
    ++size_;
    cursor_ = size_ % capacity_;
  } else {
    const std::size_t s = cursor_;
    std::ranges::copy(t.observation, obs_.begin() + static_cast<std::ptrdiff_t>(s * obs_size_));
    std::ranges::copy(t.action, actions_.begin() + static_cast<std::ptrdiff_t>(s * action_dim_));
    rewards_[s] = t.reward;
    flags_[s] = flags;
    insert_steps_[s] = t.insert_step;
    final_obs_[s] = t.boundary ? std::move(t.final_observation) : std::vector<double>{};
    cursor_ = (cursor_ + 1) % capacity_;
  }
  any_pushed_ = true;
  last_insert_ = t.insert_step;
  current_step_ = std::max(current_step_, t.insert_step);
}

void ReplayBuffer::set_current_step(std::uint64_t step) { current_step_ = step; }

std::span<const double> ReplayBuffer::observation(std::size_t index) const {
  check_index(index);
  return {obs_.data() + slot(index) * obs_size_, obs_size_};
}

std::span<const double> ReplayBuffer::action(std::size_t index) const {
  check_index(index);
  return {actions_.data() + slot(index) * action_dim_, action_dim_};
}

double ReplayBuffer::reward(std::size_t index) const {
  check_index(index);
  return rewards_[slot(index)];
}

bool ReplayBuffer::boundary(std::size_t index) const {
  check_index(index);
  return (flags_[slot(index)] & kBoundary) != 0;
}

bool ReplayBuffer::terminal(std::size_t index) const {
  check_index(index);
  return (flags_[slot(index)] & kTerminal) != 0;
}

std::uint64_t ReplayBuffer::insert_step(std::size_t index) const {
  check_index(index);
  return insert_steps_[slot(index)];
}

std::span<const double> ReplayBuffer::final_observation(std::size_t index) const {
  check_index(index);
  return final_obs_[slot(index)];
}

std::uint64_t ReplayBuffer::age(std::size_t index) const {
  const std::uint64_t inserted = insert_step(index);
  return current_step_ > inserted ? current_step_ - inserted : 1;
}

std::vector<double> ReplayBuffer::ppe_weights(double alpha) const {
  std::vector<double> w(size_);
  const double cap = static_cast<double>(capacity_);
  for (std::size_t i = 0; i < size_; ++i) w[i] = ppe_weight(alpha, static_cast<double>(age(i)), cap);
  return w;
}

std::vector<std::size_t> ReplayBuffer::sample_ppe(double alpha, std::size_t batch_size, Rng& rng) const {
  if (size_ == 0) {
    throw InsufficientDataError("sample_ppe: buffer holds " + std::to_string(size_) +
                                " items, batch needs " + std::to_string(batch_size));
  }
  std::vector<double> cumulative = ppe_weights(alpha);
  for (std::size_t i = 1; i < cumulative.size(); ++i) cumulative[i] += cumulative[i - 1];
  const double total = cumulative.back();
  std::vector<std::size_t> out(batch_size);
  for (auto& idx : out) {
    const double u = rng.uniform(0.0, total);
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    idx = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), size_ - 1);
  }
  return out;
}

std::vector<std::size_t> ReplayBuffer::sample_uniform(std::size_t batch_size, Rng& rng) const {
  if (size_ == 0) {
    throw InsufficientDataError("sample_uniform: buffer holds " + std::to_string(size_) +
                                " items, batch needs " + std::to_string(batch_size));
  }
  std::vector<std::size_t> out(batch_size);
  for (auto& idx : out) idx = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(size_) - 1));
  return out;
}

bool ReplayBuffer::nstep_ready(std::size_t index, std::size_t n) const {
  if (index >= size_ || n == 0) return false;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t i = index + j;
    if (i >= size_) return false;
    if (boundary(i)) return true;
  }
  return index + n < size_;
}

NStepBatch ReplayBuffer::assemble_nstep(std::span<const std::size_t> indices, std::size_t n,
                                        double gamma) const {
  if (n == 0) throw ContractError("assemble_nstep: n must be at least 1");
  const std::size_t rows = indices.size();
  NStepBatch out;
  out.indices.assign(indices.begin(), indices.end());
  std::vector<double> obs(rows * obs_size_), act(rows * action_dim_), next(rows * obs_size_);
  out.reward_sums.resize(rows);
  out.discounts.resize(rows);
  out.steps.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t index = indices[r];
    if (!nstep_ready(index, n)) {
      throw ContractError("assemble_nstep: index " + std::to_string(index) +
                          " has no complete n-step window");
    }
    std::ranges::copy(observation(index), obs.begin() + static_cast<std::ptrdiff_t>(r * obs_size_));
    std::ranges::copy(action(index), act.begin() + static_cast<std::ptrdiff_t>(r * action_dim_));
    double total = 0.0, discount = 1.0;
    std::size_t taken = 0;
    bool ended = false, dead = false;
    for (; taken < n; ++taken) {
      const std::size_t i = index + taken;
      total += discount * reward(i);
      discount *= gamma;
      if (boundary(i)) {
        ended = true;
        dead = terminal(i);
        ++taken;
        break;
      }
    }
    std::span<const double> after = ended ? final_observation(index + taken - 1)
                                          : observation(index + taken);
    std::ranges::copy(after, next.begin() + static_cast<std::ptrdiff_t>(r * obs_size_));
    out.reward_sums[r] = total;
    out.discounts[r] = dead ? 0.0 : discount;
    out.steps[r] = taken;
  }
  out.observations = Tensor({rows, obs_size_}, std::move(obs));
  out.actions = Tensor({rows, action_dim_}, std::move(act));
  out.next_observations = Tensor({rows, obs_size_}, std::move(next));
  return out;
}

void ReplayBuffer::save_to(Checkpoint& ckpt, const std::string& prefix) const {
  std::vector<double> obs, act, rew, flags, steps, final_index, final_obs;
  for (std::size_t i = 0; i < size_; ++i) {
    auto o = observation(i);
    obs.insert(obs.end(), o.begin(), o.end());
    auto a = action(i);
    act.insert(act.end(), a.begin(), a.end());
    rew.push_back(reward(i));
    flags.push_back(static_cast<double>(flags_[slot(i)]));
    steps.push_back(static_cast<double>(insert_step(i)));
    if (boundary(i)) {
      final_index.push_back(static_cast<double>(i));
      auto f = final_observation(i);
      final_obs.insert(final_obs.end(), f.begin(), f.end());
    }
  }
  ckpt.set_meta(prefix + ".capacity", std::to_string(capacity_));
  ckpt.set_meta(prefix + ".current_step", std::to_string(current_step_));
  ckpt.add_array({prefix + "/observations", {size_, obs_size_}, std::move(obs)});
  ckpt.add_array({prefix + "/actions", {size_, action_dim_}, std::move(act)});
  ckpt.add_array({prefix + "/rewards", {size_}, std::move(rew)});
  ckpt.add_array({prefix + "/flags", {size_}, std::move(flags)});
  ckpt.add_array({prefix + "/insert_steps", {size_}, std::move(steps)});
  const std::size_t finals = final_index.size();
  ckpt.add_array({prefix + "/final_index", {finals}, std::move(final_index)});
  ckpt.add_array({prefix + "/final_observations", {finals, obs_size_}, std::move(final_obs)});
}

void ReplayBuffer::load_from(const Checkpoint& ckpt, const std::string& prefix) {
  const auto& obs = ckpt.array(prefix + "/observations");
  const auto& act = ckpt.array(prefix + "/actions");
  const auto& rew = ckpt.array(prefix + "/rewards");
  const auto& flags = ckpt.array(prefix + "/flags");
  const auto& steps = ckpt.array(prefix + "/insert_steps");
  const auto& final_index = ckpt.array(prefix + "/final_index");
  const auto& final_obs = ckpt.array(prefix + "/final_observations");
  if (obs.shape.size() != 2 || obs.shape[1] != obs_size_ || act.shape[1] != action_dim_) {
    throw DimensionError("ReplayBuffer::load_from: stored dimensions differ");
  }
  ReplayBuffer fresh(capacity_, obs_size_, action_dim_);
  const std::size_t count = obs.shape[0];
  std::size_t next_final = 0;
  for (std::size_t i = 0; i < count; ++i) {
    Transition t;
    t.observation.assign(obs.data.begin() + static_cast<std::ptrdiff_t>(i * obs_size_),
                         obs.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * obs_size_));
    t.action.assign(act.data.begin() + static_cast<std::ptrdiff_t>(i * action_dim_),
                    act.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * action_dim_));
    t.reward = rew.data[i];
    const auto f = static_cast<std::uint8_t>(flags.data[i]);
    t.boundary = (f & kBoundary) != 0;
    t.terminal = (f & kTerminal) != 0;
    t.insert_step = static_cast<std::uint64_t>(steps.data[i]);
    if (t.boundary) {
      if (next_final >= final_index.data.size() ||
          static_cast<std::size_t>(final_index.data[next_final]) != i) {
        throw CheckpointError("ReplayBuffer::load_from: final observation index mismatch");
      }
      t.final_observation.assign(
          final_obs.data.begin() + static_cast<std::ptrdiff_t>(next_final * obs_size_),
          final_obs.data.begin() + static_cast<std::ptrdiff_t>((next_final + 1) * obs_size_));
      ++next_final;
    }
    fresh.push(std::move(t));
  }
  fresh.current_step_ = std::stoull(ckpt.meta(prefix + ".current_step"));
  *this = std::move(fresh);
}

}  // namespace cp3er

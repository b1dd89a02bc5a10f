#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cp3er/checkpoint.hpp"
#include "cp3er/ndgrad.hpp"
#include "cp3er/rng.hpp"

namespace cp3er {

struct Transition {
  std::vector<double> observation;
  std::vector<double> action;
  double reward = 0.0;
  // The episode ended after this transition.
  bool boundary = false;
  // The episode ended in a true terminal state; no bootstrap past it.
  bool terminal = false;
  // Observation following a boundary transition; required when boundary is set.
  std::vector<double> final_observation;
  std::uint64_t insert_step = 0;
};

// β = 1 / (1 + exp(2α − α·2|B|/Δt)); Δt > 0.
double ppe_weight(double alpha, double delta_t, double capacity);

class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NStepBatch {
  std::vector<std::size_t> indices;
  Tensor observations;       // [batch×obs_size]
  Tensor actions;            // [batch×action_dim]
  Tensor next_observations;  // [batch×obs_size], o_{t+n_eff}
  std::vector<double> reward_sums;
  std::vector<double> discounts;        // γ^{n_eff}, 0 after a terminal
  std::vector<std::size_t> steps;       // n_eff per row
};

// Ring storage addressed by logical index: 0 is the oldest entry, size()−1 the newest.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t observation_size, std::size_t action_dim);

  void push(Transition transition);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t observation_size() const { return obs_size_; }
  std::size_t action_dim() const { return action_dim_; }

  // Global step used for Δt; advanced automatically by push.
  std::uint64_t current_step() const { return current_step_; }
  void set_current_step(std::uint64_t step);

  std::span<const double> observation(std::size_t index) const;
  std::span<const double> action(std::size_t index) const;
  double reward(std::size_t index) const;
  bool boundary(std::size_t index) const;
  bool terminal(std::size_t index) const;
  std::uint64_t insert_step(std::size_t index) const;
  std::span<const double> final_observation(std::size_t index) const;

  // Δt_i = max(1, current_step − insert_step_i).
  std::uint64_t age(std::size_t index) const;
  std::vector<double> ppe_weights(double alpha) const;

  // With replacement, probability ∝ ppe_weight(α, Δt_i, capacity).
  std::vector<std::size_t> sample_ppe(double alpha, std::size_t batch_size, Rng& rng) const;
  std::vector<std::size_t> sample_uniform(std::size_t batch_size, Rng& rng) const;

  // True when the n-step window at index is fully stored.
  bool nstep_ready(std::size_t index, std::size_t n) const;
  // Throws ContractError for indices that are not nstep_ready.
  NStepBatch assemble_nstep(std::span<const std::size_t> indices, std::size_t n, double gamma) const;

  void save_to(Checkpoint& ckpt, const std::string& prefix = "replay") const;
  void load_from(const Checkpoint& ckpt, const std::string& prefix = "replay");

 private:
  std::size_t slot(std::size_t index) const;
  void check_index(std::size_t index) const;

  std::size_t capacity_;
  std::size_t obs_size_;
  std::size_t action_dim_;
  std::size_t size_ = 0;
  std::size_t cursor_ = 0;  // next slot to write
  std::uint64_t current_step_ = 0;
  bool any_pushed_ = false;
  std::uint64_t last_insert_ = 0;

  std::vector<double> obs_;
  std::vector<double> actions_;
  std::vector<double> rewards_;
  std::vector<std::uint8_t> flags_;
  std::vector<std::uint64_t> insert_steps_;
  std::vector<std::vector<double>> final_obs_;
};

}  // namespace cp3er

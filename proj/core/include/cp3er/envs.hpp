#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cp3er/ndgrad.hpp"
#include "cp3er/rng.hpp"

namespace cp3er {

enum class ObservationKind { kVector, kPixels };

struct EnvSpec {
  std::string id;
  ObservationKind kind = ObservationKind::kVector;
  Shape observation_shape;
  std::size_t action_dim = 1;
  std::size_t episode_length = 1;  // in underlying env ticks
  std::size_t action_repeat = 1;
  std::size_t frame_stack = 1;

  std::size_t observation_size() const { return shape_numel(observation_shape); }
};

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool done = false;
  // done because of a true terminal state, not a time limit
  bool terminal = false;
  bool success = false;
  // underlying env ticks consumed
  std::size_t frames = 1;
};

class Env {
 public:
  virtual ~Env() = default;
  virtual EnvSpec spec() const = 0;
  virtual std::vector<double> reset() = 0;
  virtual StepResult step(std::span<const double> action) = 0;
};

// ---- 1D continuous bandit ------------------------------------------------

// 1.0 on [0.70, 0.80], 0.5 on [−0.60, −0.20], 0 elsewhere.
double bandit_reward(double action);
StepResult bandit_step(double action);

class Bandit1D : public Env {
 public:
  EnvSpec spec() const override;
  std::vector<double> reset() override { return {0.0}; }
  StepResult step(std::span<const double> action) override;
  std::size_t clamp_events() const { return clamp_events_; }

 private:
  std::size_t clamp_events_ = 0;
};

// ---- point mass ------------------------------------------------------------

struct PointMassState {
  double px = 0.0, py = 0.0, vx = 0.0, vy = 0.0;
};

inline constexpr double kPointMassGoalX = 0.7;
inline constexpr double kPointMassGoalY = 0.7;
inline constexpr std::size_t kPointMassEpisodeLength = 200;
inline constexpr std::size_t kCanvasSize = 32;

// pos' = pos + 0.05·vel, vel' = 0.9·vel + 0.1·action, both clamped to [−1, 1]².
PointMassState pointmass_dynamics(const PointMassState& state, std::span<const double> action);
double pointmass_reward(const PointMassState& state);
bool pointmass_success(const PointMassState& state);
// Advances the state in place; done is left to the episode wrapper.
StepResult pointmass_step(PointMassState& state, std::span<const double> action);
// 1×32×32 grayscale: goal block 0.5, agent block 1.0 drawn on top.
std::vector<double> render_pixels(const PointMassState& state);
// Canvas pixel index for a coordinate in [−1, 1], clamped so a 3×3 block fits.
std::size_t canvas_index(double coord);

class PointMass : public Env {
 public:
  PointMass(std::uint64_t seed, bool pixels);

  EnvSpec spec() const override;
  std::vector<double> reset() override;
  StepResult step(std::span<const double> action) override;

  const PointMassState& state() const { return state_; }
  void set_state(const PointMassState& state) { state_ = state; }

 private:
  std::vector<double> observe() const;

  Rng rng_;
  bool pixels_;
  PointMassState state_;
  std::size_t t_ = 0;
};

// ---- wrappers ----------------------------------------------------------------

// Repeats each action k ticks, summing rewards and stopping early on done.
class ActionRepeat : public Env {
 public:
  ActionRepeat(std::unique_ptr<Env> inner, std::size_t k);
  EnvSpec spec() const override;
  std::vector<double> reset() override { return inner_->reset(); }
  StepResult step(std::span<const double> action) override;

 private:
  std::unique_ptr<Env> inner_;
  std::size_t k_;
};

// Concatenates the last k frames channel-wise; the first frame fills every slot at reset.
class FrameStack : public Env {
 public:
  FrameStack(std::unique_ptr<Env> inner, std::size_t k);
  EnvSpec spec() const override;
  std::vector<double> reset() override;
  StepResult step(std::span<const double> action) override;

 private:
  std::vector<double> stacked() const;

  std::unique_ptr<Env> inner_;
  std::size_t k_;
  std::deque<std::vector<double>> frames_;
};

// Env ids: "bandit1d", "pointmass", "pointmass-pixels".
std::unique_ptr<Env> make_env(const std::string& id, std::uint64_t seed, std::size_t action_repeat,
                              std::size_t frame_stack = 3);
bool is_known_env(const std::string& id);

// ---- augmentation --------------------------------------------------------------

// Replicate-pads by `pad` and crops the window offset by (dx, dy) ∈ [−pad, pad]².
// frames: [c×h×w] or [batch×c×h×w]; one shift per observation.
Tensor shift_frames(const Tensor& frames, int dx, int dy, std::size_t pad = 4);
// Uniformly random shift per observation, shared by all stacked frames of it.
Tensor random_shift_aug(const Tensor& frames, Rng& rng, std::size_t pad = 4);

}  // namespace cp3er

#include "cp3er/envs.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace cp3er {

double bandit_reward(double action) {
  if (action >= 0.70 && action <= 0.80) return 1.0;
  if (action >= -0.60 && action <= -0.20) return 0.5;
  return 0.0;
}

StepResult bandit_step(double action) {
  StepResult r;
  r.observation = {0.0};
  r.reward = bandit_reward(std::clamp(action, -1.0, 1.0));
  r.done = true;
  r.terminal = true;
  r.success = r.reward == 1.0;
  return r;
}

EnvSpec Bandit1D::spec() const {
  return EnvSpec{"bandit1d", ObservationKind::kVector, {1}, 1, 1, 1, 1};
}

StepResult Bandit1D::step(std::span<const double> action) {
  if (action.size() != 1) throw DimensionError("bandit1d: action must be 1-dimensional");
  double a = action[0];
  if (a < -1.0 || a > 1.0) {
    if (clamp_events_++ == 0) std::clog << "bandit1d: clamping out-of-range action " << a << '\n';
    a = std::clamp(a, -1.0, 1.0);
  }
  return bandit_step(a);
}

PointMassState pointmass_dynamics(const PointMassState& s, std::span<const double> action) {
  if (action.size() != 2) throw DimensionError("pointmass: action must be 2-dimensional");
  const double fx = std::clamp(action[0], -1.0, 1.0);
  const double fy = std::clamp(action[1], -1.0, 1.0);
  PointMassState n;
  n.px = std::clamp(s.px + 0.05 * s.vx, -1.0, 1.0);
  n.py = std::clamp(s.py + 0.05 * s.vy, -1.0, 1.0);
  n.vx = std::clamp(0.9 * s.vx + 0.1 * fx, -1.0, 1.0);
  n.vy = std::clamp(0.9 * s.vy + 0.1 * fy, -1.0, 1.0);
  return n;
}

double pointmass_reward(const PointMassState& s) {
  const double dx = s.px - kPointMassGoalX, dy = s.py - kPointMassGoalY;
  return std::exp(-8.0 * (dx * dx + dy * dy));
}

bool pointmass_success(const PointMassState& s) {
  const double dx = s.px - kPointMassGoalX, dy = s.py - kPointMassGoalY;
  return std::sqrt(dx * dx + dy * dy) < 0.1;
}

StepResult pointmass_step(PointMassState& state, std::span<const double> action) {
  state = pointmass_dynamics(state, action);
  StepResult r;
  r.observation = {state.px, state.py, state.vx, state.vy};
  r.reward = pointmass_reward(state);
  r.success = pointmass_success(state);
  return r;
}

std::size_t canvas_index(double coord) {
  const double scaled = std::floor((std::clamp(coord, -1.0, 1.0) + 1.0) / 2.0 * kCanvasSize);
  return static_cast<std::size_t>(std::clamp(scaled, 1.0, static_cast<double>(kCanvasSize - 2)));
}

std::vector<double> render_pixels(const PointMassState& s) {
  std::vector<double> canvas(kCanvasSize * kCanvasSize, 0.0);
  auto block = [&](double x, double y, double value) {
    const std::size_t col = canvas_index(x), row = canvas_index(y);
    for (std::size_t r = row - 1; r <= row + 1; ++r)
      for (std::size_t c = col - 1; c <= col + 1; ++c) canvas[r * kCanvasSize + c] = value;
  };
  block(kPointMassGoalX, kPointMassGoalY, 0.5);
  block(s.px, s.py, 1.0);
  return canvas;
}

PointMass::PointMass(std::uint64_t seed, bool pixels) : rng_(seed), pixels_(pixels) {}

EnvSpec PointMass::spec() const {
  EnvSpec s;
  s.id = pixels_ ? "pointmass-pixels" : "pointmass";
  s.kind = pixels_ ? ObservationKind::kPixels : ObservationKind::kVector;
  s.observation_shape = pixels_ ? Shape{1, kCanvasSize, kCanvasSize} : Shape{4};
  s.action_dim = 2;
  s.episode_length = kPointMassEpisodeLength;
  return s;
}

std::vector<double> PointMass::observe() const {
  if (pixels_) return render_pixels(state_);
  return {state_.px, state_.py, state_.vx, state_.vy};
}

std::vector<double> PointMass::reset() {
  state_ = PointMassState{rng_.uniform(-1.0, 1.0), rng_.uniform(-1.0, 1.0), 0.0, 0.0};
  t_ = 0;
  return observe();
}

StepResult PointMass::step(std::span<const double> action) {
  StepResult r = pointmass_step(state_, action);
  ++t_;
  r.done = t_ >= kPointMassEpisodeLength;
  if (pixels_) r.observation = observe();
  return r;
}

ActionRepeat::ActionRepeat(std::unique_ptr<Env> inner, std::size_t k) : inner_(std::move(inner)), k_(k) {
  if (k == 0) throw ContractError("ActionRepeat: k must be positive");
}

EnvSpec ActionRepeat::spec() const {
  EnvSpec s = inner_->spec();
  s.action_repeat *= k_;
  return s;
}

StepResult ActionRepeat::step(std::span<const double> action) {
  StepResult total;
  total.frames = 0;
  for (std::size_t i = 0; i < k_; ++i) {
    StepResult r = inner_->step(action);
    total.reward += r.reward;
    total.frames += r.frames;
    total.success = total.success || r.success;
    total.observation = std::move(r.observation);
    total.done = r.done;
    total.terminal = r.terminal;
    if (r.done) break;
  }
  return total;
}

FrameStack::FrameStack(std::unique_ptr<Env> inner, std::size_t k) : inner_(std::move(inner)), k_(k) {
  if (k == 0) throw ContractError("FrameStack: k must be positive");
}

EnvSpec FrameStack::spec() const {
  EnvSpec s = inner_->spec();
  if (s.observation_shape.empty()) throw DimensionError("FrameStack: inner env has no shape");
  s.observation_shape[0] *= k_;
  s.frame_stack *= k_;
  return s;
}

std::vector<double> FrameStack::stacked() const {
  std::vector<double> out;
  for (const auto& f : frames_) out.insert(out.end(), f.begin(), f.end());
  return out;
}

std::vector<double> FrameStack::reset() {
  std::vector<double> first = inner_->reset();
  frames_.assign(k_, first);
  return stacked();
}

StepResult FrameStack::step(std::span<const double> action) {
  StepResult r = inner_->step(action);
  frames_.pop_front();
  frames_.push_back(r.observation);
  r.observation = stacked();
  return r;
}

bool is_known_env(const std::string& id) {
  return id == "bandit1d" || id == "pointmass" || id == "pointmass-pixels";
}

std::unique_ptr<Env> make_env(const std::string& id, std::uint64_t seed, std::size_t action_repeat,
                              std::size_t frame_stack) {
  std::unique_ptr<Env> env;
  if (id == "bandit1d") {
    env = std::make_unique<Bandit1D>();
  } else if (id == "pointmass") {
    env = std::make_unique<PointMass>(seed, false);
  } else if (id == "pointmass-pixels") {
    env = std::make_unique<PointMass>(seed, true);
    if (frame_stack > 1) env = std::make_unique<FrameStack>(std::move(env), frame_stack);
  } else {
    throw ContractError("unknown env id '" + id + "' (expected bandit1d, pointmass or pointmass-pixels)");
  }
  if (action_repeat > 1) env = std::make_unique<ActionRepeat>(std::move(env), action_repeat);
  return env;
}

Tensor shift_frames(const Tensor& frames, int dx, int dy, std::size_t pad) {
  if (frames.dim() != 3 && frames.dim() != 4) throw DimensionError("shift_frames: expected [c×h×w] or [b×c×h×w]");
  const auto p = static_cast<int>(pad);
  if (dx < -p || dx > p || dy < -p || dy > p) throw ContractError("shift_frames: shift exceeds padding");
  const bool batched = frames.dim() == 4;
  const std::size_t batch = batched ? frames.size(0) : 1;
  const std::size_t planes = batch * frames.shape()[batched ? 1 : 0];
  const std::size_t h = frames.shape()[batched ? 2 : 1], w = frames.shape()[batched ? 3 : 2];
  std::vector<double> out(frames.numel());
  auto src = frames.data();
  for (std::size_t c = 0; c < planes; ++c) {
    const double* in = src.data() + c * h * w;
    double* dst = out.data() + c * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      const auto sy = static_cast<std::size_t>(std::clamp<long>(static_cast<long>(y) + dy, 0, static_cast<long>(h) - 1));
      for (std::size_t x = 0; x < w; ++x) {
        const auto sx = static_cast<std::size_t>(std::clamp<long>(static_cast<long>(x) + dx, 0, static_cast<long>(w) - 1));
        dst[y * w + x] = in[sy * w + sx];
      }
    }
  }
  return Tensor(frames.shape(), std::move(out));
}

Tensor random_shift_aug(const Tensor& frames, Rng& rng, std::size_t pad) {
  const auto p = static_cast<std::int64_t>(pad);
  if (frames.dim() == 3) {
    const int dx = static_cast<int>(rng.integer(-p, p));
    const int dy = static_cast<int>(rng.integer(-p, p));
    return shift_frames(frames, dx, dy, pad);
  }
  if (frames.dim() != 4) throw DimensionError("random_shift_aug: expected [c×h×w] or [b×c×h×w]");
  const std::size_t batch = frames.size(0);
  const std::size_t per = frames.numel() / std::max<std::size_t>(batch, 1);
  Shape one(frames.shape().begin() + 1, frames.shape().end());
  std::vector<double> out(frames.numel());
  auto src = frames.data();
  for (std::size_t b = 0; b < batch; ++b) {
    Tensor img(one, std::vector<double>(src.begin() + static_cast<std::ptrdiff_t>(b * per),
                                        src.begin() + static_cast<std::ptrdiff_t>((b + 1) * per)));
    const int dx = static_cast<int>(rng.integer(-p, p));
    const int dy = static_cast<int>(rng.integer(-p, p));
    Tensor shifted = shift_frames(img, dx, dy, pad);
    std::ranges::copy(shifted.data(), out.begin() + static_cast<std::ptrdiff_t>(b * per));
  }
  return Tensor(frames.shape(), std::move(out));
}

}  // namespace cp3er

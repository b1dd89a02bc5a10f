#include "cp3er/trainer.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "cp3er/checkpoint.hpp"
#include "cp3er/replay.hpp"

namespace cp3er {
namespace {

constexpr std::uint64_t kEvalSeedOffset = 0x9e3779b97f4a7c15ULL;

struct Window {
  double loss_actor = 0.0, loss_critic = 0.0, loss_consistency = 0.0, q = 0.0;
  std::size_t updates = 0, consistency_updates = 0;
  double returns = 0.0, successes = 0.0;
  std::size_t episodes = 0;

  void add(const UpdateInfo& u) {
    loss_actor += u.actor_loss;
    loss_critic += u.critic_loss;
    q += u.q_mean;
    ++updates;
    if (u.consistency_loss) {
      loss_consistency += *u.consistency_loss;
      ++consistency_updates;
    }
  }
};

std::optional<double> mean_of(double total, std::size_t n) {
  if (n == 0) return std::nullopt;
  return total / static_cast<double>(n);
}

}  // namespace

EvalResult evaluate(const Agent& agent, Env& env, std::size_t episodes, Rng& rng) {
  EvalResult r;
  r.episodes = episodes;
  if (episodes == 0) return r;
  double returns = 0.0, successes = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    std::vector<double> obs = env.reset();
    bool success = false;
    for (;;) {
      StepResult s = env.step(agent.act(obs, rng, false));
      returns += s.reward;
      success = success || s.success;
      if (s.done) break;
      obs = std::move(s.observation);
    }
    successes += success ? 1.0 : 0.0;
  }
  r.mean_return = returns / static_cast<double>(episodes);
  r.success_rate = successes / static_cast<double>(episodes);
  return r;
}

std::vector<std::size_t> action_histogram(std::span<const double> actions, std::size_t action_dim,
                                          std::size_t bins) {
  std::vector<std::size_t> counts(bins, 0);
  for (std::size_t i = 0; i < actions.size(); i += action_dim) {
    const double a = std::clamp(actions[i], -1.0, 1.0);
    auto bin = static_cast<std::size_t>((a + 1.0) / 2.0 * static_cast<double>(bins));
    counts[std::min(bin, bins - 1)] += 1;
  }
  return counts;
}

void write_histogram(const std::filesystem::path& path, const std::vector<std::size_t>& counts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MetricsIoError("cannot write " + path.string());
  out << "bin_lo,bin_hi,count\n";
  const double width = 2.0 / static_cast<double>(counts.size());
  for (std::size_t b = 0; b < counts.size(); ++b) {
    out << fmt::format("{:.4f},{:.4f},{}\n", -1.0 + width * static_cast<double>(b),
                       -1.0 + width * static_cast<double>(b + 1), counts[b]);
  }
}

std::vector<std::size_t> read_histogram(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MetricsIoError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::size_t> counts;
  while (std::getline(in, line)) {
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) continue;
    counts.push_back(std::stoull(line.substr(comma + 1)));
  }
  return counts;
}

RunRecord train(const Config& config, const std::filesystem::path& out_dir) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  std::filesystem::create_directories(out_dir);
  write_config_snapshot(config, out_dir / kSnapshotFile);

  RunRecord record;
  record.config = config;
  record.directory = out_dir;
  if (config.steps == 0) return record;

  std::unique_ptr<Env> env = make_env(config.env, config.seed, config.action_repeat, config.frame_stack);
  const EnvSpec spec = env->spec();
  Rng root(config.seed);
  Rng init_rng = root.split();
  Rng act_rng = root.split();
  Rng update_rng = root.split();
  Rng probe_rng = root.split();

  Agent agent(config, spec, init_rng);
  ReplayBuffer buffer(config.capacity, spec.observation_size(), spec.action_dim);
  MetricsLog log(out_dir / kMetricsFile);

  std::uint64_t frame = 0;
  std::uint64_t next_log = config.log_interval;
  std::uint64_t next_hist = config.hist_interval;
  std::uint64_t fps_frame = 0;
  auto fps_clock = std::chrono::steady_clock::now();
  Window window;
  std::optional<double> last_dormant;
  std::optional<double> pending_dormant;

  std::vector<double> obs = env->reset();
  double ep_return = 0.0;
  bool ep_success = false;

  auto write_hist = [&](std::uint64_t step) {
    std::vector<double> actions = agent.sample_actions(obs, config.hist_samples, probe_rng);
    auto path = out_dir / fmt::format("hist_{}.csv", step);
    write_histogram(path, action_histogram(actions, spec.action_dim, config.hist_bins));
    record.histograms.emplace_back(step, path);
  };

  auto emit = [&](bool force_dormant) {
    MetricsRow row;
    row.step = frame;
    row.episode = record.episode_returns.size();
    row.episode_return = mean_of(window.returns, window.episodes);
    row.success = mean_of(window.successes, window.episodes);
    row.actor_loss = mean_of(window.loss_actor, window.updates);
    row.critic_loss = mean_of(window.loss_critic, window.updates);
    row.consistency_loss = mean_of(window.loss_consistency, window.consistency_updates);
    row.q_mean = mean_of(window.q, window.updates);
    if (force_dormant && buffer.size() >= config.dormant_probe) {
      last_dormant = agent.dormant(buffer, probe_rng).ratio;
      pending_dormant = last_dormant;
    }
    row.dormant_ratio = pending_dormant;
    pending_dormant.reset();
    if (buffer.size() > 0) {
      const std::vector<double> w = buffer.ppe_weights(config.alpha);
      double total = 0.0;
      for (double v : w) total += v;
      row.beta_mean = total / static_cast<double>(w.size());
    }
    if (config.log_fps) {
      const auto now = std::chrono::steady_clock::now();
      const double secs = std::chrono::duration<double>(now - fps_clock).count();
      if (secs > 0.0) row.fps = static_cast<double>(frame - fps_frame) / secs;
      fps_clock = now;
      fps_frame = frame;
    }
    log.append(row);
    record.rows.push_back(row);
    window = Window{};
  };

  while (frame < config.steps) {
    const bool explore = frame < config.exploration_steps;
    std::vector<double> action = agent.act(obs, act_rng, explore);
    StepResult r = env->step(action);
    frame += r.frames;

    Transition t;
    t.observation = obs;
    t.action = action;
    t.reward = r.reward;
    t.boundary = r.done;
    t.terminal = r.terminal;
    if (r.done) t.final_observation = r.observation;
    t.insert_step = frame;
    buffer.push(std::move(t));

    ep_return += r.reward;
    ep_success = ep_success || r.success;
    if (r.done) {
      record.episode_returns.push_back(ep_return);
      record.episode_success.push_back(ep_success);
      window.returns += ep_return;
      window.successes += ep_success ? 1.0 : 0.0;
      ++window.episodes;
      ep_return = 0.0;
      ep_success = false;
      obs = env->reset();
    } else {
      obs = std::move(r.observation);
    }

    if (frame >= config.seed_frames) {
      window.add(agent.update(buffer, update_rng));
      if (config.dormant_interval > 0 && agent.updates() % config.dormant_interval == 0 &&
          buffer.size() >= config.dormant_probe) {
        last_dormant = agent.dormant(buffer, probe_rng).ratio;
        pending_dormant = last_dormant;
      }
    }

    if (config.hist_interval > 0 && frame >= next_hist) {
      write_hist(frame);
      while (next_hist <= frame) next_hist += config.hist_interval;
    }
    if (frame >= next_log || frame >= config.steps) {
      emit(frame >= config.steps);
      while (next_log <= frame) next_log += config.log_interval;
    }
  }
  log.flush();

  Checkpoint ckpt;
  agent.save(ckpt);
  std::unique_ptr<Env> eval_env =
      make_env(config.env, config.seed ^ kEvalSeedOffset, config.action_repeat, config.frame_stack);
  Rng eval_rng(config.seed ^ kEvalSeedOffset);
  record.final_eval = evaluate(agent, *eval_env, config.eval_episodes, eval_rng);
  ckpt.set_meta("config", config_to_text(config));
  ckpt.set_meta("frames", std::to_string(frame));
  ckpt.set_meta("eval_return", fmt::format("{}", record.final_eval->mean_return));
  ckpt.set_meta("eval_success", fmt::format("{}", record.final_eval->success_rate));
  if (last_dormant) ckpt.set_meta("dormant_ratio", fmt::format("{}", *last_dormant));
  ckpt.save(out_dir / kCheckpointFile);

  record.checkpoint = out_dir / kCheckpointFile;
  record.frames = frame;
  record.updates = agent.updates();
  record.q_loss_calls = agent.q_loss_calls();
  record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return record;
}

LoadedRun load_run(const std::filesystem::path& checkpoint) {
  Checkpoint ckpt = Checkpoint::load(checkpoint);
  LoadedRun run;
  apply_settings(run.config, parse_config_text(ckpt.meta("config")));
  run.config.validate();
  std::unique_ptr<Env> env = make_env(run.config.env, run.config.seed, run.config.action_repeat,
                                      run.config.frame_stack);
  Rng rng(run.config.seed);
  run.agent = std::make_unique<Agent>(run.config, env->spec(), rng);
  run.agent->load(ckpt);
  return run;
}

}  // namespace cp3er

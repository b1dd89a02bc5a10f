#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "cp3er/agent.hpp"
#include "cp3er/config.hpp"
#include "cp3er/diagnostics.hpp"

namespace cp3er {

inline constexpr const char* kSnapshotFile = "config.snapshot";
inline constexpr const char* kMetricsFile = "metrics.csv";
inline constexpr const char* kCheckpointFile = "final.ckpt";

struct EvalResult {
  double mean_return = 0.0;
  double success_rate = 0.0;
  std::size_t episodes = 0;
};

struct RunRecord {
  Config config;
  std::filesystem::path directory;
  std::vector<MetricsRow> rows;
  std::vector<double> episode_returns;
  std::vector<bool> episode_success;
  std::vector<std::pair<std::uint64_t, std::filesystem::path>> histograms;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<EvalResult> final_eval;
  std::uint64_t frames = 0;
  std::uint64_t updates = 0;
  std::uint64_t q_loss_calls = 0;
  double wall_seconds = 0.0;
};

// Policy rollouts without exploration, augmentation or learning.
EvalResult evaluate(const Agent& agent, Env& env, std::size_t episodes, Rng& rng);

// Action histogram over [−1, 1] for a single observation; first action dimension.
std::vector<std::size_t> action_histogram(std::span<const double> actions, std::size_t action_dim,
                                          std::size_t bins);
void write_histogram(const std::filesystem::path& path, const std::vector<std::size_t>& counts);
std::vector<std::size_t> read_histogram(const std::filesystem::path& path);

// Full training run writing config.snapshot, metrics.csv, hist_<step>.csv and final.ckpt.
RunRecord train(const Config& config, const std::filesystem::path& out_dir);

// Rebuilds the agent stored in a final checkpoint.
struct LoadedRun {
  Config config;
  std::unique_ptr<Agent> agent;
};
LoadedRun load_run(const std::filesystem::path& checkpoint);

}  // namespace cp3er

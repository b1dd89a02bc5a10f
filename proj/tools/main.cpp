#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cp3er/config.hpp"
#include "cp3er/presets.hpp"
#include "cp3er/trainer.hpp"

namespace fs = std::filesystem;

namespace {

int run_train(const std::string& env, const std::string& variant, std::uint64_t seed, std::uint64_t steps,
              const std::optional<std::string>& config_path, const std::string& out) {
  cp3er::Config config;
  config.action_repeat = cp3er::default_action_repeat(env);
  if (config_path) config = cp3er::load_config(*config_path, config);
  config.env = env;
  config.actor_variant = variant;
  config.seed = seed;
  config.steps = steps;
  config.validate();

  const cp3er::RunRecord record = cp3er::train(config, out);
  std::printf("frames %llu  updates %llu  episodes %zu  wall %.1fs\n",
              static_cast<unsigned long long>(record.frames), static_cast<unsigned long long>(record.updates),
              record.episode_returns.size(), record.wall_seconds);
  if (record.final_eval) {
    std::printf("eval return %.4f  success %.3f\n", record.final_eval->mean_return, record.final_eval->success_rate);
  }
  std::printf("outputs in %s\n", fs::absolute(out).string().c_str());
  return 0;
}

int run_preset(const std::string& name, const std::string& out, std::size_t seeds) {
  cp3er::preset_run(name, out, seeds, [&](const cp3er::PresetJob& job, const cp3er::RunRecord& r) {
    std::printf("%-40s eval %.4f  (%.0fs)\n", job.relative_dir().string().c_str(),
                r.final_eval ? r.final_eval->mean_return : 0.0, r.wall_seconds);
    std::fflush(stdout);
  });
  return 0;
}

int run_eval(const std::string& ckpt, std::size_t episodes) {
  cp3er::LoadedRun run = cp3er::load_run(ckpt);
  const cp3er::Config& c = run.config;
  auto env = cp3er::make_env(c.env, c.seed + 1, c.action_repeat, c.frame_stack);
  cp3er::Rng rng(c.seed + 1);
  const cp3er::EvalResult r = cp3er::evaluate(*run.agent, *env, episodes, rng);
  std::printf("env %s  variant %s  episodes %zu\n", c.env.c_str(), c.actor_variant.c_str(), r.episodes);
  std::printf("mean return %.4f  success rate %.3f\n", r.mean_return, r.success_rate);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cp3er: consistency-policy actor-critic lab"};
  app.require_subcommand(1);

  std::string env, variant = "cp3er", out = "runs/latest";
  std::uint64_t seed = 0, steps = 0;
  std::optional<std::string> config_path;
  auto* train = app.add_subcommand("train", "Train one agent");
  train->add_option("--env", env, "bandit1d | pointmass | pointmass-pixels")->required();
  train->add_option("--variant", variant, "cp3er | consistency_ac | maxent_cp_uniform | cp3er_urb | gaussian_maxent")
      ->required();
  train->add_option("--seed", seed)->required();
  train->add_option("--steps", steps, "env frames")->required();
  train->add_option("--config", config_path, "key = value file")->check(CLI::ExistingFile);
  train->add_option("--out", out);

  std::string preset_name, preset_out = "runs";
  std::size_t seeds = cp3er::kPresetSeeds;
  auto* preset = app.add_subcommand("preset", "Run a named multi-seed batch");
  preset->add_option("--name", preset_name, "toy-bandit-compare | dormant-study | ablations")->required();
  preset->add_option("--out", preset_out)->required();
  preset->add_option("--seeds", seeds);

  std::string ckpt;
  std::size_t episodes = 10;
  auto* eval = app.add_subcommand("eval", "Evaluate a final checkpoint");
  eval->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
  eval->add_option("--episodes", episodes)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return run_train(env, variant, seed, steps, config_path, out);
    if (*preset) return run_preset(preset_name, preset_out, seeds);
    if (*eval) return run_eval(ckpt, episodes);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

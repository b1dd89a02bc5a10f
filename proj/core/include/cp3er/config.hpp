#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace cp3er {

inline constexpr const char* kVariantNames[] = {"cp3er", "consistency_ac", "maxent_cp_uniform", "cp3er_urb",
                                                "gaussian_maxent"};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Config {
  std::string env = "pointmass";
  std::uint64_t seed = 0;
  std::uint64_t steps = 100000;  // env frames
  std::size_t capacity = 100000;
  std::size_t batch_size = 256;
  double gamma = 0.99;
  std::size_t n_step = 3;
  double lr = 1e-4;
  double tau_ema = 0.01;
  std::size_t hidden_dim = 1024;
  std::size_t num_hidden_layers = 2;
  std::size_t feature_dim = 50;
  std::size_t mog_components = 3;
  std::size_t mog_samples = 20;
  double alpha = 2.0;
  double eta = 0.05;
  double tau_d = 0.025;
  std::uint64_t seed_frames = 4000;
  std::uint64_t exploration_steps = 10000;
  std::string actor_variant = "cp3er";
  std::size_t sampling_steps = 1;
  std::uint64_t log_interval = 1000;

  std::size_t action_repeat = 2;
  std::size_t frame_stack = 3;
  double grad_clip = 10.0;
  double gaussian_temperature = 0.1;
  // Actor trained by the consistency loss on replayed actions alone.
  bool consistency_only = false;
  std::uint64_t dormant_interval = 1000;  // updates
  std::size_t dormant_probe = 512;
  std::size_t eval_episodes = 10;
  // Action histograms are written every hist_interval frames; 0 disables.
  std::uint64_t hist_interval = 0;
  std::size_t hist_samples = 2048;
  std::size_t hist_bins = 200;
  bool log_fps = false;

  void validate() const;
};

// Default action repeat for an env id (1 for the single-step bandit).
std::size_t default_action_repeat(const std::string& env);

// Applies `key = value` pairs; unknown keys and malformed values throw ConfigError.
void apply_setting(Config& config, const std::string& key, const std::string& value);
void apply_settings(Config& config, const std::map<std::string, std::string>& settings);
// Parses flat TOML-style text: `key = value`, `#` comments, optional quotes on strings.
std::map<std::string, std::string> parse_config_text(const std::string& text);
Config load_config(const std::filesystem::path& path, Config base = {});

// Every field as `key = value`, one per line, in declaration order.
std::string config_to_text(const Config& config);
void write_config_snapshot(const Config& config, const std::filesystem::path& path);

// Keys whose values differ between two configs.
std::vector<std::string> config_diff(const Config& a, const Config& b);

}  // namespace cp3er

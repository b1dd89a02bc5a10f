#include "cp3er/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <fmt/format.h>

#include "cp3er/envs.hpp"

namespace cp3er {
namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("config: bad value for '" + key + "': " + value);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config: bad boolean for '" + key + "': " + value);
}

std::string fmt_double(double v) { return fmt::format("{}", v); }

struct Field {
  const char* name;
  std::function<void(Config&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

#define CP3ER_UINT(member)                                                                  \
  Field {                                                                                   \
    #member, [](Config& c, const std::string& v) { c.member = parse_number<decltype(c.member)>(#member, v); }, \
        [](const Config& c) { return std::to_string(c.member); }                           \
  }
#define CP3ER_DOUBLE(member)                                                                \
  Field {                                                                                   \
    #member, [](Config& c, const std::string& v) { c.member = parse_number<double>(#member, v); }, \
        [](const Config& c) { return fmt_double(c.member); }                               \
  }
#define CP3ER_STRING(member)                                                                \
  Field {                                                                                   \
    #member, [](Config& c, const std::string& v) { c.member = v; },                         \
        [](const Config& c) { return "\"" + c.member + "\""; }                              \
  }
#define CP3ER_BOOL(member)                                                                  \
  Field {                                                                                   \
    #member, [](Config& c, const std::string& v) { c.member = parse_bool(#member, v); },    \
        [](const Config& c) { return std::string(c.member ? "true" : "false"); }           \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      CP3ER_STRING(env),
      CP3ER_UINT(seed),
      CP3ER_UINT(steps),
      CP3ER_UINT(capacity),
      CP3ER_UINT(batch_size),
      CP3ER_DOUBLE(gamma),
      CP3ER_UINT(n_step),
      CP3ER_DOUBLE(lr),
      CP3ER_DOUBLE(tau_ema),
      CP3ER_UINT(hidden_dim),
      CP3ER_UINT(num_hidden_layers),
      CP3ER_UINT(feature_dim),
      CP3ER_UINT(mog_components),
      CP3ER_UINT(mog_samples),
      CP3ER_DOUBLE(alpha),
      CP3ER_DOUBLE(eta),
      CP3ER_DOUBLE(tau_d),
      CP3ER_UINT(seed_frames),
      CP3ER_UINT(exploration_steps),
      CP3ER_STRING(actor_variant),
      CP3ER_UINT(sampling_steps),
      CP3ER_UINT(log_interval),
      CP3ER_UINT(action_repeat),
      CP3ER_UINT(frame_stack),
      CP3ER_DOUBLE(grad_clip),
      CP3ER_DOUBLE(gaussian_temperature),
      CP3ER_BOOL(consistency_only),
      CP3ER_UINT(dormant_interval),
      CP3ER_UINT(dormant_probe),
      CP3ER_UINT(eval_episodes),
      CP3ER_UINT(hist_interval),
      CP3ER_UINT(hist_samples),
      CP3ER_UINT(hist_bins),
      CP3ER_BOOL(log_fps),
  };
  return table;
}

#undef CP3ER_UINT
#undef CP3ER_DOUBLE
#undef CP3ER_STRING
#undef CP3ER_BOOL

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError("config: " + message);
}

}  // namespace

void Config::validate() const {
  require(is_known_env(env), "unknown env '" + env + "'");
  require(std::ranges::find(kVariantNames, actor_variant) != std::end(kVariantNames),
          "unknown actor_variant '" + actor_variant + "'");
  require(capacity > 0, "capacity must be positive");
  require(batch_size > 0, "batch_size must be positive");
  require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
  require(n_step > 0, "n_step must be positive");
  require(lr > 0.0, "lr must be positive");
  require(tau_ema > 0.0 && tau_ema <= 1.0, "tau_ema must lie in (0, 1]");
  require(hidden_dim > 0 && num_hidden_layers > 0, "network sizes must be positive");
  require(feature_dim > 0, "feature_dim must be positive");
  require(mog_components > 0 && mog_samples > 0, "mixture sizes must be positive");
  require(alpha > 0.0, "alpha must be positive");
  require(eta >= 0.0, "eta must be non-negative");
  require(tau_d >= 0.0, "tau_d must be non-negative");
  require(sampling_steps > 0, "sampling_steps must be positive");
  require(log_interval > 0, "log_interval must be positive");
  require(action_repeat > 0 && frame_stack > 0, "action_repeat and frame_stack must be positive");
  require(gaussian_temperature >= 0.0, "gaussian_temperature must be non-negative");
  require(dormant_probe > 0, "dormant_probe must be positive");
  require(hist_bins > 0 && hist_samples > 0, "histogram sizes must be positive");
  require(!consistency_only || actor_variant != "gaussian_maxent",
          "consistency_only requires a consistency actor");
}

std::size_t default_action_repeat(const std::string& env) { return env == "bandit1d" ? 1 : 2; }

void apply_setting(Config& config, const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (key == f.name) {
      f.set(config, value);
      return;
    }
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

void apply_settings(Config& config, const std::map<std::string, std::string>& settings) {
  for (const auto& [k, v] : settings) apply_setting(config, k, v);
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string body = line;
    bool quoted = false;
    for (std::size_t i = 0; i < body.size(); ++i) {
      if (body[i] == '"') quoted = !quoted;
      if (body[i] == '#' && !quoted) {
        body.resize(i);
        break;
      }
    }
    body = trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("config line {}: expected key = value", lineno));
    std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw ConfigError(fmt::format("config line {}: empty key", lineno));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    out[key] = value;
  }
  return out;
}

Config load_config(const std::filesystem::path& path, Config base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_settings(base, parse_config_text(ss.str()));
  return base;
}

std::string config_to_text(const Config& config) {
  std::string out;
  for (const Field& f : fields()) out += fmt::format("{} = {}\n", f.name, f.get(config));
  return out;
}

void write_config_snapshot(const Config& config, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("config: cannot write " + path.string());
  out << config_to_text(config);
}

std::vector<std::string> config_diff(const Config& a, const Config& b) {
  std::vector<std::string> keys;
  for (const Field& f : fields()) {
    if (f.get(a) != f.get(b)) keys.emplace_back(f.name);
  }
  return keys;
}

}  // namespace cp3er

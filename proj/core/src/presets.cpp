#include "cp3er/presets.hpp"

#include <algorithm>

namespace cp3er {

std::filesystem::path PresetJob::relative_dir() const {
  return std::filesystem::path(group) / ("seed_" + std::to_string(config.seed));
}

Config bandit_base_config() {
  Config c;
  c.env = "bandit1d";
  c.action_repeat = default_action_repeat(c.env);
  c.steps = 30000;
  c.lr = 1e-3;
  c.hidden_dim = 64;
  c.batch_size = 64;
  c.log_interval = 1000;
  c.hist_interval = 5000;
  c.eval_episodes = 100;
  return c;
}

Config pointmass_base_config() {
  Config c;
  c.env = "pointmass";
  c.steps = 50000;
  c.capacity = 25000;
  c.hidden_dim = 128;
  c.batch_size = 64;
  c.log_interval = 2000;
  c.eval_episodes = 10;
  return c;
}

Config pixels_base_config() {
  Config c = pointmass_base_config();
  c.env = "pointmass-pixels";
  return c;
}

std::vector<PresetJob> preset_jobs(const std::string& name, std::size_t seeds) {
  std::vector<PresetJob> jobs;
  auto add = [&](const std::string& group, Config base) {
    for (std::size_t s = 0; s < seeds; ++s) {
      base.seed = s + 1;
      jobs.push_back({group, base});
    }
  };
  if (name == "toy-bandit-compare") {
    for (const char* v : {"consistency_ac", "maxent_cp_uniform", "gaussian_maxent"}) {
      Config c = bandit_base_config();
      c.actor_variant = v;
      if (c.actor_variant == "maxent_cp_uniform") c.eta = 10.0;
      add(v, c);
    }
  } else if (name == "dormant-study") {
    for (const Config& base : {pointmass_base_config(), pixels_base_config()}) {
      for (bool consistency_only : {true, false}) {
        Config c = base;
        c.actor_variant = "consistency_ac";
        c.consistency_only = consistency_only;
        add(c.env + (consistency_only ? "_consistency_only" : "_q_loss"), c);
      }
    }
  } else if (name == "ablations") {
    for (const char* v : {"cp3er", "consistency_ac", "maxent_cp_uniform", "cp3er_urb"}) {
      Config c = pixels_base_config();
      c.actor_variant = v;
      add(v, c);
    }
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected toy-bandit-compare, dormant-study or ablations)");
  }
  return jobs;
}

std::vector<RunRecord> preset_run(const std::string& name, const std::filesystem::path& out_dir,
                                  std::size_t seeds, const RunCallback& on_done) {
  std::vector<RunRecord> records;
  for (const PresetJob& job : preset_jobs(name, seeds)) {
    records.push_back(train(job.config, out_dir / job.relative_dir()));
    if (on_done) on_done(job, records.back());
  }
  return records;
}

}  // namespace cp3er

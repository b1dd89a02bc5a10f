#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cp3er/config.hpp"
#include "cp3er/trainer.hpp"

namespace cp3er {

inline constexpr const char* kPresetNames[] = {"toy-bandit-compare", "dormant-study", "ablations"};
inline constexpr std::size_t kPresetSeeds = 4;

struct PresetJob {
  std::string group;  // e.g. "maxent_cp_uniform" or "pointmass-pixels_consistency_only"
  Config config;
  // <out>/<group>/seed_<n>
  std::filesystem::path relative_dir() const;
};

// Desk-scale base configurations shared by the presets.
Config bandit_base_config();
Config pixels_base_config();
Config pointmass_base_config();

// Throws ConfigError for unknown names.
std::vector<PresetJob> preset_jobs(const std::string& name, std::size_t seeds = kPresetSeeds);

using RunCallback = std::function<void(const PresetJob&, const RunRecord&)>;

// Runs every job sequentially, each in its own directory.
std::vector<RunRecord> preset_run(const std::string& name, const std::filesystem::path& out_dir,
                                  std::size_t seeds = kPresetSeeds, const RunCallback& on_done = {});

}  // namespace cp3er

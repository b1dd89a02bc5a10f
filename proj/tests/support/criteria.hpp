#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace cp3er::testing {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

CriterionResult criterion_gradients();
CriterionResult criterion_ppe_weights();
CriterionResult criterion_boundary();
CriterionResult criterion_mog_recovery();
CriterionResult criterion_dormant_oracle();
CriterionResult criterion_bandit(const std::filesystem::path& work_dir);
CriterionResult criterion_dormant_trend(const std::filesystem::path& work_dir);
CriterionResult criterion_ablation_order(const std::filesystem::path& work_dir);
CriterionResult criterion_determinism(const std::filesystem::path& work_dir);
CriterionResult criterion_nstep();

// Runs the criterion, fills id/title/seconds and converts exceptions into failures.
CriterionResult run_criterion(int id, const std::function<CriterionResult()>& body);

}  // namespace cp3er::testing

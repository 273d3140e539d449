#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mba/lp.hpp"

namespace mba {

struct ConstantsConfig {
  double eps = 0.1;  // saturation slack of step 1
  double eps1 = 0.02, eps2 = 0.03, eps3 = 0.04, eps4 = 0.05, eps5 = 0.06,
         eps6 = 0.08;
  double mu = 0.05, nu = 0.05, delta = 0.1, lambda = 0.05;
  double beta = 1.0 / 3.0;
  /// Starting fractional solution: "assignment" or "configuration".
  std::string start = "assignment";
  double config_accuracy = 1e-4;
  /// Also round the starting solution directly and keep the better result.
  bool best_of_plain_st = true;
};

/// Violated constraints, empty when the constants are usable.
std::vector<std::string> validate_config(const ConstantsConfig& cfg);

nlohmann::json constants_to_json(const ConstantsConfig& cfg);
/// Unknown keys raise PipelineError.
ConstantsConfig constants_from_json(const nlohmann::json& j,
                                    ConstantsConfig base = {});
/// Applies one "key=value" override.
void apply_override(ConstantsConfig& cfg, const std::string& assignment);

/// A finite distribution over integral allocations of a solution's instance.
struct WeightedAllocation {
  double prob = 0.0;
  std::vector<std::optional<PlayerIdx>> owner;
};
using AllocationDistribution = std::vector<WeightedAllocation>;

/// Pluggable rounder: maps a fractional solution to a distribution.
using Rounder = std::function<AllocationDistribution(const AssignmentSolution&)>;

/// The ST rounder expressed as a Rounder.
AllocationDistribution st_rounder(const AssignmentSolution& sol);

struct FakeItem {
  std::string id;
  std::string player;
  double price = 0.0;
  double x = 0.0;
  bool big = false;
  int step = 0;
};

struct StepRecord {
  int step = 0;
  std::string name;
  std::string branch;  // "round" or "trim"
  double statistic = 0.0;
  double threshold = 0.0;
  double value_before = 0.0;  // working LP value
  double value_after = 0.0;
  double real_before = 0.0;  // value on the original instance, real items
  double real_after = 0.0;
  double loss = 0.0;          // real_before - real_after
  double loss_cap = 0.0;      // allowed loss as a fraction of Opt
  std::size_t players_removed = 0;
  std::size_t items_removed = 0;
  std::vector<FakeItem> fakes;
  std::vector<std::string> notes;
};

struct Certificate {
  std::string name;
  std::string kind;  // "proved", "empirical" or "external"
  double value = 0.0;
};

struct PipelineReport {
  std::uint64_t seed = 0;
  double opt = 0.0;
  std::string start;
  std::vector<StepRecord> steps;
  int terminal_step = 0;
  std::string rounder;
  Certificate certificate;
  /// Exact expectations of the terminal rounding.
  double expected_working_value = 0.0;
  double current_value = 0.0;  // working LP value that was rounded
  double expected_real_value = 0.0;
  double plain_st_expected_value = 0.0;
  std::string selected;  // "pipeline" or "plain_st"
  double final_expected_value = 0.0;
  double ratio = 0.0;  // final_expected_value / opt
  double allocation_value = 0.0;
  std::vector<std::string> condition_violations;
};

struct PipelineResult {
  Allocation allocation;  // over the original instance
  PipelineReport report;
};

struct PipelineSlots {
  /// Rounder for solutions that are not well structured.
  Rounder non_well_structured = st_rounder;
  /// Terminal rounder once all conditions of the final step hold.
  Rounder terminal = st_rounder;
};

/// Runs the seven-step case analysis from a solution of the original
/// instance. Opt is the objective of `start`.
PipelineResult run_pipeline(const AssignmentSolution& start,
                            const ConstantsConfig& cfg, std::uint64_t seed,
                            const PipelineSlots& slots = {});

/// Same, starting from the relaxation selected in `cfg.start`.
PipelineResult run_pipeline(const Instance& inst, const ConstantsConfig& cfg,
                            std::uint64_t seed,
                            const PipelineSlots& slots = {});

nlohmann::json report_to_json(const Instance& inst, const PipelineResult& r);

/// Path of step numbers followed by the branch taken, e.g. "1t2t3t4r".
std::string branch_path(const PipelineReport& r);

}  // namespace mba

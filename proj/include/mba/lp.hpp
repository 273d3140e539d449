#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "mba/instance.hpp"

namespace mba {

enum class ItemOrigin { Real, Fake };

/// Fractional solution of the Assignment-LP. x is stored densely, row-major
/// by player. Items inserted by the pipeline for bookkeeping are Fake.
struct AssignmentSolution {
  std::shared_ptr<const Instance> instance;
  std::vector<double> x;
  std::vector<ItemOrigin> origin;

  const Instance& inst() const { return *instance; }
  double get(PlayerIdx i, ItemIdx j) const {
    return x[i * instance->num_items() + j];
  }
  double& at(PlayerIdx i, ItemIdx j) { return x[i * instance->num_items() + j]; }

  /// Σ_j x_ij p_ij.
  double assigned_value(PlayerIdx i) const;
  /// Σ_i x_ij.
  double item_mass(ItemIdx j) const;
  /// Σ_i min(B_i, Σ_j x_ij p_ij).
  double objective() const;
  bool is_fake(ItemIdx j) const { return origin[j] == ItemOrigin::Fake; }
};

AssignmentSolution make_zero_solution(std::shared_ptr<const Instance> inst);

/// Violated feasibility conditions, empty when feasible.
std::vector<std::string> check_feasible(const AssignmentSolution& sol,
                                        double tol = 1e-9);

struct ConfigColumn {
  PlayerIdx player = 0;
  std::vector<ItemIdx> items;  // ascending
  double weight = 0.0;
};

struct ConfigSolution {
  std::shared_ptr<const Instance> instance;
  std::vector<ConfigColumn> columns;
  double objective = 0.0;
  /// Upper bound on the Configuration-LP optimum from the final duals.
  double dual_bound = 0.0;
  std::size_t iterations = 0;
  /// Master objective after each column generation round.
  std::vector<double> history;
};

/// min(B_i, Σ_{j∈C} p_ij).
double config_value(const Instance& inst, PlayerIdx i,
                    const std::vector<ItemIdx>& items);

struct LpOptions {
  double tol = 1e-7;
  std::size_t max_iterations = 200'000;
  std::ostream* trace = nullptr;
};

/// Optimal Assignment-LP solution, normalized so no budget is exceeded.
AssignmentSolution solve_assignment_lp(std::shared_ptr<const Instance> inst,
                                       const LpOptions& opts = {});
AssignmentSolution solve_assignment_lp(const Instance& inst,
                                       const LpOptions& opts = {});

/// Scales each over-budget player down to Σ_j x_ij p_ij = B_i.
AssignmentSolution normalize_saturation(const AssignmentSolution& sol);

struct PricingOptions {
  std::size_t enumeration_cap = 20;
  /// Grid resolution of the dynamic program, as a fraction of B_i.
  double grid = 1e-4;
};

struct PricedConfig {
  std::vector<ItemIdx> items;  // ascending
  double reduced_value = 0.0;
};

/// Best configuration for player i against item duals (indexed by item):
/// maximizes min(Σ p, B_i) - Σ dual.
PricedConfig price_configuration(const Instance& inst, PlayerIdx i,
                                 const std::vector<double>& item_duals,
                                 const PricingOptions& opts = {});

struct ColumnGenerationOptions {
  std::size_t max_rounds = 500;
  PricingOptions pricing;
  LpOptions lp;
};

ConfigSolution solve_configuration_lp(std::shared_ptr<const Instance> inst,
                                      double accuracy,
                                      const ColumnGenerationOptions& opts = {});
ConfigSolution solve_configuration_lp(const Instance& inst, double accuracy,
                                      const ColumnGenerationOptions& opts = {});

struct Projection {
  AssignmentSolution solution;
  double config_value = 0.0;
  double untrimmed_value = 0.0;
  double trimming_loss = 0.0;
};

/// Marginals of y, then each small x_ij capped so that x_ij plus the big
/// mass of player i is at most 1. Throws ProjectionError when the cap costs
/// more than `max_relative_loss` of the configuration objective.
Projection project_to_assignment(const ConfigSolution& y,
                                 double max_relative_loss = 1e-6);

nlohmann::json assignment_to_json(const AssignmentSolution& sol);
nlohmann::json config_to_json(const ConfigSolution& y);

}  // namespace mba

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mba/lp.hpp"

namespace mba {

struct PlayerStats {
  double alpha = 0.0;  // Σ_j x_ij p_ij / B_i
  double b = 0.0;      // big mass
  double S = 0.0;      // value from small items
  double val = 0.0;    // Σ_j x_ij p_ij
};

struct ItemStats {
  double x = 0.0;
  double xB = 0.0;
  double xS = 0.0;
  double w = 0.0;  // average price, 0 when x = 0
};

struct SolutionStats {
  std::vector<PlayerStats> players;
  std::vector<ItemStats> items;
};

SolutionStats compute_stats(const AssignmentSolution& sol);

struct CanonicalCheck {
  bool ok = true;
  std::vector<std::string> violations;
};

/// Every supported big price equals B_i, and big and small items each
/// contribute B_i/2, all within tol * B_i.
CanonicalCheck is_canonical(const AssignmentSolution& sol, double tol = 1e-6);

/// B·α(1 - α/4) for α <= 2, B beyond.
double bound_alpha(double B, double alpha);

/// B·(α - w(α - w)).
double bound_intermediate(double B, double alpha, double w);

/// b·B + (1 - b)·S when S/B <= (1 + b)/2, nothing otherwise.
std::optional<double> bound_big_small(double B, double b, double S);

/// One row per player, then one row per item.
std::string player_stats_csv(const AssignmentSolution& sol,
                             const SolutionStats& stats);
std::string item_stats_csv(const AssignmentSolution& sol,
                           const SolutionStats& stats);

}  // namespace mba

#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "mba/analysis.hpp"

namespace mba {

enum class PriceSide { High, Low };

struct UnequalItem {
  ItemIdx item = 0;
  PriceSide side = PriceSide::High;
  double w = 0.0;
  /// Players whose mass moves (gainers on the high side, losers on the
  /// low side) and the players on the other end of the transfer.
  std::vector<PlayerIdx> H, L;
  double h = 0.0, l = 0.0;
};

struct UnequalPriceReport {
  std::vector<UnequalItem> items;
};

struct NubpOptions {
  /// Players taking part; empty means all. Inactive players must hold no
  /// mass and are exempt from the saturation check.
  std::vector<bool> active;
  double saturation_tol = 1e-6;
};

/// Items whose high-priced (or low-priced) assignments carry at least a mu
/// fraction of their value. Throws TransformError if an active player is
/// not saturated.
UnequalPriceReport find_unequally_priced(const AssignmentSolution& sol,
                                         double mu, const NubpOptions& opts = {});

enum class Phase { Nubp, Preprocess, Main };
const char* to_string(Phase p);

struct Move {
  Phase phase = Phase::Nubp;
  ItemIdx item = 0;
  PlayerIdx from = 0, to = 0;
  double delta = 0.0;
  /// Change of the logged functional when delta leaves `from` (minus) and
  /// then reaches `to` (plus), applied one move at a time.
  double gain_minus = 0.0, gain_plus = 0.0;
  /// Pairwise gain lower bound for price-balancing moves.
  double g = 0.0;
};

struct TransformTrace {
  /// "alpha" for Σ B α(1 - α/4), "big_small" for Σ bB + (1 - b)S.
  std::string functional;
  std::vector<Move> moves;
  double st_before = 0.0, st_after = 0.0;
  std::vector<std::string> warnings;
};

/// Σ_i B_i α_i (1 - α_i/4).
double st_alpha_functional(const AssignmentSolution& sol);
/// Σ_i b_i B_i + (1 - b_i) S_i.
double st_big_small_functional(const AssignmentSolution& sol);

struct NubpResult {
  AssignmentSolution solution;
  TransformTrace trace;
  UnequalPriceReport report;
};

/// Moves mass of every unequally priced item toward its higher prices.
NubpResult apply_nubp(const AssignmentSolution& sol, double mu,
                      const NubpOptions& opts = {});

/// Items with mu x_j <= xB_j <= (1 - mu) x_j and x_j > 0.
std::set<ItemIdx> find_big_small(const AssignmentSolution& sol, double mu);

enum class Color { R, G };

struct Partition {
  std::vector<Color> color;
  std::uint64_t seed = 0;
};

Partition sample_partition(std::size_t num_players, std::uint64_t seed);

struct NupOptions {
  /// Enforce one price per item across its supported players.
  bool require_unique_prices = true;
  double tol = 1e-6;
};

/// Violated preconditions of the big-small transform, empty when it applies.
std::vector<std::string> check_nup_restrictions(const AssignmentSolution& sol,
                                                const NupOptions& opts = {});

struct NupResult {
  AssignmentSolution solution;
  TransformTrace trace;
};

/// Shifts big mass from G players to R players and small mass of R players
/// toward R players holding the item as big. Fake items do not move.
NupResult nup_preprocess(const AssignmentSolution& sol, const Partition& part,
                         const NupOptions& opts = {});

/// Main phase over `items`, with ratios taken from x1.
NupResult nup_main(const AssignmentSolution& x1, const Partition& part,
                   const std::set<ItemIdx>& items, double mu);

std::string trace_csv(const AssignmentSolution& sol, const TransformTrace& t);

}  // namespace mba

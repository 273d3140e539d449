#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mba/st_rounding.hpp"

namespace mba {

/// D equally likely configurations of one player. Slot l of a configuration
/// holds at most one item drawn from bucket l.
struct Arrangement {
  std::shared_ptr<const Instance> instance;
  PlayerIdx player = 0;
  std::size_t D = 0;
  std::size_t k = 0;
  std::vector<std::vector<std::optional<ItemIdx>>> configs;

  double slot_price(std::size_t c, std::size_t l) const {
    const auto& s = configs[c][l];
    return s ? instance->price(player, *s) : 0.0;
  }
  double total(std::size_t c) const;
  double V(std::size_t c) const;  // min(B, total)
  double W(std::size_t c) const;  // total - V
  double expected_value() const;
};

/// Lays each bucket's fill order over D slots: the item covering fill
/// interval [u0, u1) takes slots [round(u0 D), round(u1 D)). Every edge
/// marginal is off by at most 1/D.
Arrangement initial_arrangement(const BucketGraph& g, PlayerIdx player,
                                std::size_t D = 1000);

/// (count of configs using the edge) / D, per edge of the player's buckets,
/// in graph edge order; other edges are reported as 0.
std::vector<double> arrangement_marginals(const Arrangement& arr,
                                          const BucketGraph& g);

struct WorsenResult {
  Arrangement arrangement;
  std::size_t swaps = 0;
  /// Expected value before the run and after each swap pass.
  std::vector<double> history;
};

/// Swaps slot items from a configuration with a smaller total into one with
/// a larger total until no such swap raises the spread. Throws Error if the
/// swap guard D^2 k^2 is exceeded.
WorsenResult worsen_arrangement(const Arrangement& arr);

struct ArrangementStats {
  double w = 0.0;       // mass of configs at or above budget
  double v = 0.0;       // mass of small-only configs at or above budget
  double b_mass = 0.0;  // mass of configs holding a big item
  std::optional<double> L, L_B, L_S, G;
  double expected_value = 0.0;
};

ArrangementStats arrangement_stats(const Arrangement& arr);

/// Discretization slack k * max price / D.
double arrangement_slack(const Arrangement& arr);

std::string arrangement_csv(const Arrangement& arr);

}  // namespace mba

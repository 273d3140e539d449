#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mba/lp.hpp"

namespace mba {

struct BucketEdge {
  std::size_t bucket = 0;
  ItemIdx item = 0;
  double f = 0.0;
};

struct Bucket {
  PlayerIdx player = 0;
  std::size_t index = 0;           // 0-based position within the player
  std::vector<std::size_t> edges;  // fill order
};

/// Bipartite graph between item nodes and unit-capacity player buckets.
/// Each player's items are poured into its buckets by non-increasing price.
struct BucketGraph {
  std::shared_ptr<const Instance> instance;
  std::vector<ItemOrigin> origin;
  std::vector<Bucket> buckets;
  std::vector<BucketEdge> edges;
  /// Buckets of player i are [first_bucket[i], first_bucket[i + 1]).
  std::vector<std::size_t> first_bucket;

  const Instance& inst() const { return *instance; }
  std::size_t num_buckets(PlayerIdx i) const {
    return first_bucket[i + 1] - first_bucket[i];
  }
};

BucketGraph build_bucket_graph(const AssignmentSolution& sol);

/// Violated graph invariants, empty when the graph is well formed.
std::vector<std::string> check_bucket_graph(const BucketGraph& g,
                                            double tol = 1e-9);

struct Matching {
  std::vector<std::size_t> edges;  // indices into BucketGraph::edges
  double lambda = 0.0;
};

struct MatchingDistribution {
  BucketGraph graph;
  std::vector<Matching> matchings;

  /// Matchings with at least one edge.
  std::size_t support_size() const;
};

/// Convex combination of matchings whose edge marginals equal the edge
/// fractions. At most |E| nonempty matchings carry positive weight.
MatchingDistribution decompose_matchings(const BucketGraph& g);

/// Σ_m λ_m Pr[e ∈ m] per edge.
std::vector<double> edge_marginals(const MatchingDistribution& dist);

struct ExpectedValue {
  double total = 0.0;
  std::vector<double> per_player;
  /// Same with fake items contributing nothing.
  double real_total = 0.0;
  std::vector<double> real_per_player;
};

ExpectedValue exact_expected_value(const MatchingDistribution& dist);

struct SampledAllocation {
  /// Over the graph's instance; fake items are left unassigned.
  Allocation allocation;
  /// Fake items the drawn matching handed out, as (item, player).
  std::vector<std::pair<ItemIdx, PlayerIdx>> fake_assignments;
  std::size_t matching = 0;
};

SampledAllocation sample_allocation(const MatchingDistribution& dist,
                                    std::uint64_t seed);

std::string bucket_graph_dot(const BucketGraph& g);
std::string distribution_csv(const MatchingDistribution& dist);

}  // namespace mba

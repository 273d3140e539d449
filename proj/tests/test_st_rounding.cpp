#include <cmath>
#include <set>

#include "doctest.h"
#include "mba/analysis.hpp"
#include "mba/error.hpp"
#include "mba/random.hpp"
#include "mba/st_rounding.hpp"

using namespace mba;

namespace {

AssignmentSolution one_player(double B, std::vector<std::pair<double, double>> px) {
  InstanceSpec s;
  s.players = {{"p", B}};
  for (std::size_t k = 0; k < px.size(); ++k) {
    s.items.push_back("j" + std::to_string(k));
    s.prices.push_back({"p", s.items.back(), px[k].first});
  }
  auto sol = make_zero_solution(std::make_shared<const Instance>(s));
  for (std::size_t k = 0; k < px.size(); ++k) sol.at(0, k) = px[k].second;
  return sol;
}

// Pair marginals Σ λ [j -> i] gathered straight from the matchings.
std::vector<double> pair_marginals(const MatchingDistribution& d) {
  const Instance& inst = d.graph.inst();
  std::vector<double> out(inst.num_players() * inst.num_items(), 0.0);
  for (const auto& m : d.matchings) {
    for (std::size_t e : m.edges) {
      const auto& edge = d.graph.edges[e];
      out[d.graph.buckets[edge.bucket].player * inst.num_items() + edge.item] += m.lambda;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("bucket fill follows price order") {
  const auto sol = one_player(5.0, {{0.9, 0.6}, {0.5, 0.6}, {0.2, 0.3}});
  const auto g = build_bucket_graph(sol);
  REQUIRE(g.num_buckets(0) == 2);
  REQUIRE(g.buckets[0].edges.size() == 2);
  REQUIRE(g.buckets[1].edges.size() == 2);
  const auto& b1 = g.buckets[0].edges;
  const auto& b2 = g.buckets[1].edges;
  CHECK(g.edges[b1[0]].item == 0);
  CHECK(g.edges[b1[0]].f == doctest::Approx(0.6));
  CHECK(g.edges[b1[1]].item == 1);
  CHECK(g.edges[b1[1]].f == doctest::Approx(0.4));
  CHECK(g.edges[b2[0]].item == 1);
  CHECK(g.edges[b2[0]].f == doctest::Approx(0.2));
  CHECK(g.edges[b2[1]].item == 2);
  CHECK(g.edges[b2[1]].f == doctest::Approx(0.3));
  CHECK(check_bucket_graph(g).empty());

  const auto single = build_bucket_graph(one_player(1.0, {{0.5, 1.0}}));
  CHECK(single.buckets.size() == 1);
  CHECK(single.edges.size() == 1);

  const auto tie = build_bucket_graph(one_player(1.0, {{0.5, 0.5}, {0.5, 0.5}}));
  REQUIRE(tie.buckets.size() == 1);
  CHECK(tie.edges[tie.buckets[0].edges[0]].item == 0);
  CHECK(tie.edges[tie.buckets[0].edges[1]].item == 1);
}

TEST_CASE("bucket graph invariants on random solutions") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const auto sol = solve_assignment_lp(gen_random_instance(seed, 3, 8, PriceModel::General));
    const auto g = build_bucket_graph(sol);
    CHECK(check_bucket_graph(g).empty());
    const Instance& inst = sol.inst();
    for (PlayerIdx i = 0; i < inst.num_players(); ++i) {
      for (std::size_t t = g.first_bucket[i]; t + 1 < g.first_bucket[i + 1]; ++t) {
        double low = 1e300, high = 0.0;
        for (std::size_t e : g.buckets[t].edges) low = std::min(low, inst.price(i, g.edges[e].item));
        for (std::size_t e : g.buckets[t + 1].edges) high = std::max(high, inst.price(i, g.edges[e].item));
        CHECK(low >= high);
      }
    }
  }
}

TEST_CASE("decomposition of tiny graphs") {
  const auto one = decompose_matchings(build_bucket_graph(one_player(1.0, {{0.5, 1.0}})));
  REQUIRE(one.support_size() == 1);
  CHECK(one.matchings[0].lambda == doctest::Approx(1.0));

  const auto two = decompose_matchings(build_bucket_graph(one_player(1.0, {{0.5, 0.5}, {0.4, 0.5}})));
  CHECK(two.support_size() == 2);
  for (const auto& m : two.matchings) {
    if (!m.edges.empty()) CHECK(m.lambda == doctest::Approx(0.5));
  }
}

TEST_CASE("decomposition rejects points outside the matching polytope") {
  auto g = build_bucket_graph(one_player(1.0, {{0.5, 0.5}, {0.4, 0.5}}));
  g.edges[0].f = 0.9;
  CHECK_THROWS_AS(decompose_matchings(g), DecompositionError);
  g.edges[0].f = -0.1;
  CHECK_THROWS_AS(decompose_matchings(g), DecompositionError);
}

TEST_CASE("marginals, support and values on random instances") {
  for (std::uint64_t seed = 100; seed < 140; ++seed) {
    const auto model = seed % 2 ? PriceModel::General : PriceModel::UniformPrices;
    const auto sol = solve_assignment_lp(gen_random_instance(seed, 2 + seed % 4, 4 + seed % 7, model));
    const auto d = decompose_matchings(build_bucket_graph(sol));
    const Instance& inst = sol.inst();
    CHECK(d.support_size() <= d.graph.edges.size());
    double total = 0.0;
    for (const auto& m : d.matchings) {
      CHECK(m.lambda > 0.0);
      total += m.lambda;
      std::set<std::size_t> buckets;
      std::set<ItemIdx> items;
      for (std::size_t e : m.edges) {
        CHECK(buckets.insert(d.graph.edges[e].bucket).second);
        CHECK(items.insert(d.graph.edges[e].item).second);
      }
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    const auto pm = pair_marginals(d);
    for (std::size_t k = 0; k < pm.size(); ++k) CHECK(std::fabs(pm[k] - sol.x[k]) <= 1e-9);
    const auto em = edge_marginals(d);
    for (std::size_t e = 0; e < em.size(); ++e) CHECK(std::fabs(em[e] - d.graph.edges[e].f) <= 1e-9);

    // Expected value straight from the matchings.
    double oracle = 0.0;
    for (const auto& m : d.matchings) {
      std::vector<std::optional<PlayerIdx>> owner(inst.num_items());
      for (std::size_t e : m.edges) owner[d.graph.edges[e].item] = d.graph.buckets[d.graph.edges[e].bucket].player;
      oracle += m.lambda * allocation_value(inst, owner);
    }
    const auto ev = exact_expected_value(d);
    CHECK(ev.total == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(ev.real_total == doctest::Approx(ev.total).epsilon(1e-12));
    const auto st = compute_stats(sol);
    for (PlayerIdx i = 0; i < inst.num_players(); ++i) {
      CHECK(ev.per_player[i] >= bound_alpha(inst.budget(i), st.players[i].alpha) - 1e-6);
    }
  }
}

TEST_CASE("expected value examples") {
  const auto gap = solve_assignment_lp(gen_gap_instance());
  CHECK(exact_expected_value(decompose_matchings(build_bucket_graph(gap))).total ==
        doctest::Approx(1.5).epsilon(1e-9));
  // Configurations {a} and {b} with probability 1/2 each.
  const auto half = one_player(1.0, {{1.0, 0.5}, {0.5, 0.5}});
  CHECK(exact_expected_value(decompose_matchings(build_bucket_graph(half))).total ==
        doctest::Approx(0.75));
}

TEST_CASE("fake items count toward budgets but not toward real value") {
  auto sol = one_player(1.0, {{0.8, 1.0}, {0.6, 1.0}});
  sol.origin[1] = ItemOrigin::Fake;
  const auto d = decompose_matchings(build_bucket_graph(sol));
  const auto ev = exact_expected_value(d);
  CHECK(ev.total == doctest::Approx(1.0));
  CHECK(ev.real_total == doctest::Approx(0.8));
  const auto s = sample_allocation(d, 3);
  CHECK_FALSE(s.allocation.owner[1].has_value());
  REQUIRE(s.fake_assignments.size() == 1);
  CHECK(s.fake_assignments[0].first == 1);
}

TEST_CASE("sampling is deterministic and matches marginals") {
  const auto sol = solve_assignment_lp(gen_random_instance(9, 3, 6, PriceModel::General));
  const auto d = decompose_matchings(build_bucket_graph(sol));
  CHECK(sample_allocation(d, 5).allocation.owner == sample_allocation(d, 5).allocation.owner);
  const Instance& inst = sol.inst();
  const int draws = 20000;
  std::vector<double> hits(sol.x.size(), 0.0);
  for (int s = 0; s < draws; ++s) {
    const auto a = sample_allocation(d, derive_seed(77, s));
    for (ItemIdx j = 0; j < inst.num_items(); ++j) {
      if (a.allocation.owner[j]) hits[*a.allocation.owner[j] * inst.num_items() + j] += 1;
    }
  }
  for (std::size_t k = 0; k < hits.size(); ++k) {
    const double p = sol.x[k];
    const double sigma = std::sqrt(std::max(p * (1 - p), 1e-4) / draws);
    CHECK(std::fabs(hits[k] / draws - p) <= 4 * sigma);
  }
}

TEST_CASE("debug exports") {
  const auto sol = solve_assignment_lp(gen_gap_instance());
  const auto g = build_bucket_graph(sol);
  CHECK(bucket_graph_dot(g).rfind("graph", 0) == 0);
  const std::string csv = distribution_csv(decompose_matchings(g));
  CHECK(csv.find("lambda") != std::string::npos);
}

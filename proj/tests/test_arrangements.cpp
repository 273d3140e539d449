#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "mba/analysis.hpp"
#include "mba/arrangements.hpp"
#include "mba/fixtures.hpp"

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

// Sorting every bucket's slot prices and pairing them by rank gives the
// arrangement where larger totals dominate slot by slot.
std::vector<double> comonotone_totals(const Arrangement& a) {
  std::vector<double> totals(a.D, 0.0);
  for (std::size_t l = 0; l < a.k; ++l) {
    std::vector<double> p(a.D);
    for (std::size_t c = 0; c < a.D; ++c) p[c] = a.slot_price(c, l);
    std::sort(p.begin(), p.end());
    for (std::size_t c = 0; c < a.D; ++c) totals[c] += p[c];
  }
  return totals;
}

double capped_mean(const std::vector<double>& totals, double B) {
  double s = 0.0;
  for (double t : totals) s += std::min(B, t);
  return s / static_cast<double>(totals.size());
}

std::size_t count_item(const Arrangement& a, std::size_t l, ItemIdx j) {
  std::size_t n = 0;
  for (const auto& c : a.configs) n += c[l] == j;
  return n;
}

}  // namespace

TEST_CASE("initial arrangement slot counts") {
  const auto one = build_bucket_graph(one_player(1.0, {{0.5, 1.0}}));
  CHECK(count_item(initial_arrangement(one, 0, 100), 0, 0) == 100);

  const auto half = build_bucket_graph(one_player(1.0, {{0.5, 0.5}, {0.4, 0.5}}));
  const auto a = initial_arrangement(half, 0, 100);
  CHECK(count_item(a, 0, 0) == 50);
  CHECK(count_item(a, 0, 1) == 50);

  const auto thirds = build_bucket_graph(one_player(1.0, {{0.5, 2.0 / 3.0}, {0.4, 1.0 / 3.0}}));
  const auto b = initial_arrangement(thirds, 0, 99);
  CHECK(count_item(b, 0, 0) == 66);
  CHECK(count_item(b, 0, 1) == 33);
}

TEST_CASE("arrangement marginals stay within 1/D") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto sol = solve_assignment_lp(gen_random_instance(seed, 3, 8, PriceModel::General));
    const auto g = build_bucket_graph(sol);
    for (PlayerIdx i = 0; i < sol.inst().num_players(); ++i) {
      if (g.num_buckets(i) == 0) continue;
      const auto a = initial_arrangement(g, i, 1000);
      const auto m = arrangement_marginals(a, g);
      for (std::size_t l = 0; l < a.k; ++l) {
        for (std::size_t e : g.buckets[g.first_bucket[i] + l].edges) {
          CHECK(std::fabs(m[e] - g.edges[e].f) <= 1.0 / 1000 + 1e-9);
        }
      }
      for (const auto& c : a.configs) CHECK(c.size() == a.k);
    }
  }
}

TEST_CASE("worsening reaches the comonotone arrangement") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto sol = canonical_player_fixture(seed, seed % 2);
    const auto g = build_bucket_graph(sol);
    const auto a = initial_arrangement(g, 0, 200);
    const auto w = worsen_arrangement(a);
    const double B = sol.inst().budget(0);
    CHECK(w.arrangement.expected_value() == doctest::Approx(capped_mean(comonotone_totals(a), B)).epsilon(1e-12));
    for (std::size_t h = 1; h < w.history.size(); ++h) CHECK(w.history[h] <= w.history[h - 1] + 1e-12);
    // Swaps only permute slot contents, so marginals do not move.
    CHECK(arrangement_marginals(w.arrangement, g) == arrangement_marginals(a, g));
    // Fixed point: a strictly smaller total never holds a pricier slot.
    const auto& r = w.arrangement;
    bool inverted = false;
    for (std::size_t l = 0; l < r.k; ++l) {
      for (std::size_t c = 0; c < r.D; ++c) {
        for (std::size_t d = 0; d < r.D; ++d) {
          inverted = inverted || (r.slot_price(c, l) > r.slot_price(d, l) &&
                                  r.total(c) < r.total(d) - 1e-12);
        }
      }
    }
    CHECK_FALSE(inverted);
    // Worsening an already worsened arrangement changes nothing.
    CHECK(worsen_arrangement(r).swaps == 0);
  }
}

TEST_CASE("two crossing configurations are sorted by one swap") {
  InstanceSpec s;
  s.players = {{"p", 1.0}};
  s.items = {"a", "b", "c", "d"};
  s.prices = {{"p", "a", 0.9}, {"p", "b", 0.3}, {"p", "c", 0.5}, {"p", "d", 0.4}};
  Arrangement arr;
  arr.instance = std::make_shared<const Instance>(s);
  arr.D = 2;
  arr.k = 2;
  arr.configs = {{ItemIdx{2}, ItemIdx{3}}, {ItemIdx{0}, ItemIdx{1}}};
  // Totals 0.9 and 1.2 while bucket 2 holds 0.4 against 0.3.
  const double before = arr.expected_value();
  const auto w = worsen_arrangement(arr);
  CHECK(w.swaps == 1);
  CHECK(w.arrangement.expected_value() <= before);
  CHECK(w.arrangement.total(1) == doctest::Approx(1.3));
  CHECK(w.arrangement.expected_value() == doctest::Approx(0.9));
}

TEST_CASE("arrangement statistics") {
  const auto under = build_bucket_graph(one_player(2.0, {{0.5, 1.0}}));
  const auto st = arrangement_stats(initial_arrangement(under, 0, 100));
  CHECK(st.w == 0.0);
  CHECK_FALSE(st.L.has_value());
  CHECK(*st.G == doctest::Approx(st.expected_value));

  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto sol = canonical_player_fixture(seed, seed % 2 == 0);
    const auto w = worsen_arrangement(initial_arrangement(build_bucket_graph(sol), 0, 1000));
    const auto s = arrangement_stats(w.arrangement);
    const double B = sol.inst().budget(0);
    CHECK(s.w >= 0.5 - 1e-3);
    CHECK(s.expected_value >= bound_intermediate(B, 1.0, s.w) - arrangement_slack(w.arrangement));
    // Mean over overfull configurations is B, so the split must add up.
    double over = 0.0;
    for (std::size_t c = 0; c < w.arrangement.D; ++c) {
      if (w.arrangement.total(c) >= B * (1 - 1e-12)) over += B;
    }
    const double split = over / 1000.0 + (1 - s.w) * s.G.value_or(0.0);
    CHECK(s.expected_value == doctest::Approx(split).epsilon(1e-9));
  }
}

TEST_CASE("csv export") {
  const auto g = build_bucket_graph(one_player(1.0, {{0.5, 0.5}, {0.4, 0.5}}));
  const std::string csv = arrangement_csv(initial_arrangement(g, 0, 10));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);
  CHECK(csv.rfind("config,bucket1,total,V,W", 0) == 0);
}

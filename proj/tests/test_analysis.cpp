#include <algorithm>

#include "doctest.h"
#include "mba/analysis.hpp"
#include "mba/error.hpp"
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

}  // namespace

TEST_CASE("stats on hand examples") {
  const auto sol = one_player(1.0, {{1.0, 0.5}, {0.5, 1.0}});
  const auto st = compute_stats(sol);
  CHECK(st.players[0].alpha == doctest::Approx(1.0));
  CHECK(st.players[0].b == doctest::Approx(0.5));
  CHECK(st.players[0].S == doctest::Approx(0.5));
  CHECK(st.items[0].xB == 0.5);
  CHECK(st.items[1].xS == 1.0);

  const auto zero = compute_stats(make_zero_solution(sol.instance));
  CHECK(zero.players[0].val == 0.0);
  CHECK(zero.items[0].w == 0.0);

  const auto gap = solve_assignment_lp(gen_gap_instance());
  const auto gs = compute_stats(gap);
  const ItemIdx h = *gap.inst().find_item("h");
  CHECK(gs.items[h].x == doctest::Approx(1.0));
  CHECK(gs.items[h].xB == doctest::Approx(1.0));
  CHECK(gs.items[h].xS == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("stats invariants on random LP solutions") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto sol = solve_assignment_lp(gen_random_instance(seed, 3, 6, PriceModel::General));
    const auto st = compute_stats(sol);
    const Instance& inst = sol.inst();
    double total = 0.0, direct = 0.0;
    for (PlayerIdx i = 0; i < inst.num_players(); ++i) {
      const auto& p = st.players[i];
      CHECK(p.alpha * inst.budget(i) == doctest::Approx(p.val));
      double big = 0.0;
      for (ItemIdx j : inst.items_of(i)) {
        direct += sol.get(i, j) * inst.price(i, j);
        if (inst.is_big(i, j)) big += sol.get(i, j) * inst.price(i, j);
      }
      CHECK(p.val == doctest::Approx(p.S + big));
      total += p.val;
    }
    CHECK(total == doctest::Approx(direct));
    for (ItemIdx j = 0; j < inst.num_items(); ++j) {
      const auto& it = st.items[j];
      CHECK(it.xB + it.xS == doctest::Approx(it.x));
      CHECK(it.x <= 1 + 1e-9);
      if (it.x > 0) {
        double lo = 1e300, hi = 0.0;
        for (PlayerIdx i : inst.players_of(j)) {
          if (sol.get(i, j) > 0) {
            lo = std::min(lo, inst.price(i, j));
            hi = std::max(hi, inst.price(i, j));
          }
        }
        CHECK(it.w >= lo - 1e-12);
        CHECK(it.w <= hi + 1e-12);
      }
    }
  }
}

TEST_CASE("compute_stats is additive over disjoint supports") {
  auto inst = std::make_shared<const Instance>(gen_random_instance(5, 3, 6, PriceModel::General));
  const auto full = solve_assignment_lp(inst);
  auto a = make_zero_solution(inst), b = make_zero_solution(inst);
  for (ItemIdx j = 0; j < inst->num_items(); ++j) {
    for (PlayerIdx i = 0; i < inst->num_players(); ++i) (j % 2 ? a : b).at(i, j) = full.get(i, j);
  }
  const auto sf = compute_stats(full), sa = compute_stats(a), sb = compute_stats(b);
  for (PlayerIdx i = 0; i < inst->num_players(); ++i) {
    CHECK(sf.players[i].val == doctest::Approx(sa.players[i].val + sb.players[i].val));
    CHECK(sf.players[i].b == doctest::Approx(sa.players[i].b + sb.players[i].b));
    CHECK(sf.players[i].S == doctest::Approx(sa.players[i].S + sb.players[i].S));
  }
}

TEST_CASE("canonical check") {
  CHECK(is_canonical(one_player(1.0, {{1.0, 0.5}, {0.5, 0.6}, {0.25, 0.8}})).ok);
  const auto low_b = is_canonical(one_player(1.0, {{1.0, 0.4}, {0.5, 1.0}}));
  CHECK_FALSE(low_b.ok);
  CHECK(low_b.violations.front().rfind("(b)", 0) == 0);
  const auto cheap_big = is_canonical(one_player(1.0, {{0.9, 5.0 / 9.0}, {0.5, 1.0}}));
  CHECK_FALSE(cheap_big.ok);
  CHECK(cheap_big.violations.front().rfind("(a)", 0) == 0);
  CHECK(is_canonical(level_fixture(3, 3, 4)).ok);
}

TEST_CASE("bound functions") {
  CHECK(bound_alpha(1.0, 1.0) == 0.75);
  CHECK(bound_alpha(1.0, 0.0) == 0.0);
  CHECK(bound_alpha(1.0, 2.0) == 1.0);
  CHECK(bound_alpha(2.0, 3.0) == 2.0);
  CHECK_THROWS_AS(bound_alpha(1.0, -0.1), Error);

  CHECK(bound_intermediate(1.0, 1.0, 0.5) == 0.75);
  CHECK(bound_intermediate(2.0, 0.8, 0.0) == doctest::Approx(1.6));
  CHECK(bound_intermediate(1.0, 0.6, 0.6) == doctest::Approx(0.6));
  CHECK_THROWS_AS(bound_intermediate(1.0, 1.0, 1.5), Error);

  CHECK(*bound_big_small(1.0, 0.5, 0.5) == 0.75);
  CHECK(*bound_big_small(1.0, 0.4, 0.6) == doctest::Approx(0.76));
  CHECK_FALSE(bound_big_small(1.0, 0.5, 0.9).has_value());
  CHECK_THROWS_AS(bound_big_small(1.0, -0.5, 0.1), Error);
}

TEST_CASE("bound_alpha against its 3/4 envelope and the intermediate bound") {
  for (int k = 0; k <= 400; ++k) {
    const double alpha = k / 100.0;
    const double v = bound_alpha(1.0, alpha);
    if (alpha <= 1.0) CHECK(v >= 0.75 * alpha - 1e-12);
    if (alpha >= 1.0) CHECK(v >= 0.75 - 1e-12);
    if (alpha <= 2.0) {
      // Minimum over w in [0, min(alpha, 1)] of the intermediate bound.
      double lo = 1e300;
      const double top = std::min(alpha, 1.0);
      for (int t = 0; t <= 2000; ++t) lo = std::min(lo, bound_intermediate(1.0, alpha, top * t / 2000.0));
      CHECK(lo == doctest::Approx(v).epsilon(1e-6));
    }
  }
}

TEST_CASE("csv exports carry one row per player and item") {
  const auto sol = solve_assignment_lp(gen_gap_instance());
  const auto st = compute_stats(sol);
  const std::string p = player_stats_csv(sol, st), i = item_stats_csv(sol, st);
  CHECK(std::count(p.begin(), p.end(), '\n') == 3);
  CHECK(std::count(i.begin(), i.end(), '\n') == 4);
  CHECK(p.rfind("player,budget,alpha", 0) == 0);
}

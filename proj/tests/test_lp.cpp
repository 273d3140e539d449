#include <cmath>

#include "doctest.h"
#include "mba/error.hpp"
#include "mba/lp.hpp"
#include "mba/random.hpp"
#include "mba/simplex.hpp"

using namespace mba;

namespace {

std::shared_ptr<const Instance> make(const InstanceSpec& s) {
  return std::make_shared<const Instance>(s);
}

// Best min(B, Σp) - Σdual over every subset of the player's items.
double brute_pricing(const Instance& inst, PlayerIdx i, const std::vector<double>& d) {
  const auto& items = inst.items_of(i);
  double best = 0.0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << items.size()); ++mask) {
    double p = 0.0, cost = 0.0;
    for (std::size_t k = 0; k < items.size(); ++k) {
      if (mask >> k & 1) {
        p += inst.price(i, items[k]);
        cost += d[items[k]];
      }
    }
    best = std::max(best, std::min(inst.budget(i), p) - cost);
  }
  return best;
}

// Configuration LP with every column written out.
double full_configuration_lp(const Instance& inst) {
  LinearProgram lp;
  std::vector<std::vector<std::pair<std::size_t, double>>> prow(inst.num_players()),
      irow(inst.num_items());
  for (PlayerIdx i = 0; i < inst.num_players(); ++i) {
    const auto& items = inst.items_of(i);
    for (std::size_t mask = 1; mask < (std::size_t{1} << items.size()); ++mask) {
      double p = 0.0;
      const std::size_t v = lp.num_vars++;
      for (std::size_t k = 0; k < items.size(); ++k) {
        if (mask >> k & 1) {
          p += inst.price(i, items[k]);
          irow[items[k]].push_back({v, 1.0});
        }
      }
      lp.objective.push_back(std::min(inst.budget(i), p));
      prow[i].push_back({v, 1.0});
    }
  }
  for (auto& r : prow) lp.add_row(r, RowSense::Le, 1.0);
  for (auto& r : irow) lp.add_row(r, RowSense::Le, 1.0);
  return solve_lp(lp).objective;
}

// Assignment LP written with one variable per present pair and a value
// variable per player bounded by both the budget and the assigned price.
double direct_assignment_lp(const Instance& inst) {
  LinearProgram lp;
  const std::size_t n = inst.num_players();
  lp.num_vars = n;
  lp.objective.assign(n, 1.0);
  std::vector<std::vector<std::pair<std::size_t, double>>> vrow(n), irow(inst.num_items());
  for (PlayerIdx i = 0; i < n; ++i) {
    vrow[i].push_back({i, 1.0});
    for (ItemIdx j : inst.items_of(i)) {
      const std::size_t v = lp.num_vars++;
      lp.objective.push_back(0.0);
      vrow[i].push_back({v, -inst.price(i, j)});
      irow[j].push_back({v, 1.0});
    }
    lp.add_row({{i, 1.0}}, RowSense::Le, inst.budget(i));
  }
  for (auto& r : vrow) lp.add_row(r, RowSense::Le, 0.0);
  for (auto& r : irow) lp.add_row(r, RowSense::Le, 1.0);
  return solve_lp(lp).objective;
}

}  // namespace

TEST_CASE("assignment LP on small hand instances") {
  const auto gap = solve_assignment_lp(gen_gap_instance());
  CHECK(gap.objective() == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(check_feasible(gap).empty());

  InstanceSpec one;
  one.players = {{"1", 1.0}};
  one.items = {"j"};
  one.prices = {{"1", "j", 0.4}};
  const auto x = solve_assignment_lp(make(one));
  CHECK(x.get(0, 0) == doctest::Approx(1.0));
  CHECK(x.objective() == doctest::Approx(0.4));

  InstanceSpec cheap;
  cheap.players = {{"1", 5.0}, {"2", 5.0}};
  cheap.items = {"a", "b", "c"};
  cheap.prices = {{"1", "a", 0.3}, {"1", "b", 0.2}, {"2", "c", 0.6}};
  const auto y = solve_assignment_lp(make(cheap));
  CHECK(y.objective() == doctest::Approx(1.1));
  for (auto [i, j] : {std::pair{0, 0}, {0, 1}, {1, 2}}) CHECK(y.get(i, j) == doctest::Approx(1.0));
}

TEST_CASE("assignment LP matches a direct formulation and stays normalized") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const auto model = seed % 2 ? PriceModel::General : PriceModel::UniformPrices;
    auto inst = std::make_shared<const Instance>(gen_random_instance(seed, 2 + seed % 4, 3 + seed % 6, model));
    const auto x = solve_assignment_lp(inst);
    CHECK(check_feasible(x).empty());
    CHECK(x.objective() == doctest::Approx(direct_assignment_lp(*inst)).epsilon(1e-7));
    for (PlayerIdx i = 0; i < inst->num_players(); ++i) {
      CHECK(x.assigned_value(i) <= inst->budget(i) * (1 + 1e-12));
    }
  }
}

TEST_CASE("normalize_saturation truncates without losing value") {
  InstanceSpec s;
  s.players = {{"1", 1.0}};
  s.items = {"a", "b"};
  s.prices = {{"1", "a", 1.0}, {"1", "b", 0.5}};
  auto inst = make(s);
  AssignmentSolution x = make_zero_solution(inst);
  x.at(0, 0) = 1.0;
  x.at(0, 1) = 1.0;
  const auto y = normalize_saturation(x);
  CHECK(y.assigned_value(0) == doctest::Approx(1.0));
  CHECK(y.objective() == doctest::Approx(x.objective()));
  CHECK(y.get(0, 0) <= x.get(0, 0));
  CHECK(normalize_saturation(y).x == y.x);
  const auto z = make_zero_solution(inst);
  CHECK(normalize_saturation(z).x == z.x);
}

TEST_CASE("check_feasible reports broken constraints") {
  auto inst = std::make_shared<const Instance>(gen_gap_instance());
  auto x = make_zero_solution(inst);
  x.at(0, *inst->find_item("h")) = 0.7;
  x.at(1, *inst->find_item("h")) = 0.7;
  x.at(1, *inst->find_item("s1")) = 0.5;
  CHECK(check_feasible(x).size() == 2);
}

TEST_CASE("pricing examples") {
  InstanceSpec s;
  s.players = {{"1", 1.0}};
  s.items = {"a", "b"};
  s.prices = {{"1", "a", 0.6}, {"1", "b", 0.6}};
  Instance inst(s);
  auto pc = price_configuration(inst, 0, {0.0, 0.0});
  CHECK(pc.items == std::vector<ItemIdx>{0, 1});
  CHECK(pc.reduced_value == doctest::Approx(1.0));
  pc = price_configuration(inst, 0, {1.0, 1.0});
  CHECK(pc.items.empty());
  CHECK(pc.reduced_value == 0.0);

  InstanceSpec t;
  t.players = {{"1", 1.0}};
  t.items = {"j"};
  t.prices = {{"1", "j", 0.5}};
  pc = price_configuration(Instance(t), 0, {0.2});
  CHECK(pc.reduced_value == doctest::Approx(0.3));
  CHECK_THROWS_AS(price_configuration(Instance(t), 0, {-0.1}), LpError);
}

TEST_CASE("pricing by enumeration equals brute force; the grid DP comes close") {
  Rng rng(7);
  for (int t = 0; t < 60; ++t) {
    const std::size_t m = 2 + rng.below(11);
    const Instance inst = gen_random_instance(rng.next(), 1, m, PriceModel::General);
    std::vector<double> d(m);
    for (double& v : d) v = rng.bernoulli(0.3) ? 0.0 : rng.uniform(0.0, 0.5);
    const double oracle = brute_pricing(inst, 0, d);
    const auto exact = price_configuration(inst, 0, d);
    CHECK(exact.reduced_value == doctest::Approx(oracle).epsilon(1e-12));
    double check = config_value(inst, 0, exact.items);
    for (ItemIdx j : exact.items) check -= d[j];
    CHECK(check == doctest::Approx(exact.reduced_value).epsilon(1e-12));

    PricingOptions dp;
    dp.enumeration_cap = 0;
    const auto approx = price_configuration(inst, 0, d, dp);
    CHECK(approx.reduced_value <= oracle + 1e-12);
    CHECK(approx.reduced_value >= oracle - 1e-3 * inst.budget(0));
  }
}

TEST_CASE("configuration LP by column generation") {
  const Instance gap = gen_gap_instance();
  const auto y = solve_configuration_lp(gap, 1e-4);
  // Each player mixes {h, s_i} and {s_i} at weight 1/2, worth 3/4 apiece:
  // the configuration LP closes the gap the assignment LP leaves open.
  CHECK(full_configuration_lp(gap) == doctest::Approx(1.5));
  CHECK(y.objective >= 1.5 * (1 - 1e-4));
  CHECK(y.objective <= 1.5 + 1e-6);

  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const auto model = seed % 2 ? PriceModel::General : PriceModel::UniformPrices;
    const Instance inst = gen_random_instance(seed, 2 + seed % 3, 3 + seed % 5, model);
    const auto c = solve_configuration_lp(inst, 1e-4);
    const double full = full_configuration_lp(inst);
    CHECK(c.objective >= (1 - 1e-4) * full - 1e-9);
    CHECK(c.objective <= full + 1e-7);
    CHECK(c.dual_bound >= full - 1e-7);
    CHECK(c.objective <= solve_assignment_lp(inst).objective() + 1e-6);
    for (std::size_t r = 1; r < c.history.size(); ++r) CHECK(c.history[r] >= c.history[r - 1] - 1e-9);
    // Feasibility of the weights.
    std::vector<double> per_player(inst.num_players(), 0.0), per_item(inst.num_items(), 0.0);
    for (const auto& col : c.columns) {
      per_player[col.player] += col.weight;
      for (ItemIdx j : col.items) per_item[j] += col.weight;
    }
    for (double v : per_player) CHECK(v <= 1 + 1e-9);
    for (double v : per_item) CHECK(v <= 1 + 1e-9);
  }
  CHECK_THROWS_AS(solve_configuration_lp(gap, 0.0), LpError);
}

TEST_CASE("projection to an assignment solution") {
  InstanceSpec s;
  s.players = {{"1", 2.0}};
  s.items = {"a", "b", "c", "d"};
  s.prices = {{"1", "a", 0.5}, {"1", "b", 0.5}, {"1", "c", 0.4}, {"1", "d", 0.4}};
  ConfigSolution y;
  y.instance = make(s);
  y.columns = {{0, {0, 1}, 1.0}};
  auto p = project_to_assignment(y);
  CHECK(p.solution.get(0, 0) == 1.0);
  CHECK(p.solution.get(0, 1) == 1.0);

  y.columns = {{0, {0, 1}, 0.5}, {0, {2, 3}, 0.5}};
  p = project_to_assignment(y);
  for (ItemIdx j = 0; j < 4; ++j) CHECK(p.solution.get(0, j) == 0.5);
  CHECK(p.trimming_loss == 0.0);

  const auto g = solve_configuration_lp(gen_gap_instance(), 1e-4);
  p = project_to_assignment(g);
  CHECK(p.solution.objective() >= p.config_value - p.trimming_loss - 1e-9);
  CHECK(p.config_value == doctest::Approx(1.5).epsilon(1e-4));
  const Instance& gi = p.solution.inst();
  for (PlayerIdx i = 0; i < 2; ++i) {
    double b = 0.0;
    for (ItemIdx j : gi.items_of(i)) {
      if (gi.is_big(i, j)) b += p.solution.get(i, j);
    }
    for (ItemIdx j : gi.items_of(i)) {
      if (!gi.is_big(i, j)) CHECK(p.solution.get(i, j) + b <= 1 + 1e-9);
    }
  }
}

TEST_CASE("projection reports a value conflict") {
  // One small item at weight 1 and a big item at weight 1 for the same
  // player cannot both survive the cap.
  InstanceSpec s;
  s.players = {{"1", 1.0}};
  s.items = {"g", "s"};
  s.prices = {{"1", "g", 0.8}, {"1", "s", 0.2}};
  ConfigSolution y;
  y.instance = make(s);
  y.columns = {{0, {0, 1}, 1.0}};
  y.objective = 1.0;
  try {
    project_to_assignment(y);
    FAIL("expected a ProjectionError");
  } catch (const ProjectionError& e) {
    CHECK(e.config_value() == doctest::Approx(1.0));
    CHECK(e.projected_value() == doctest::Approx(0.8));
  }
}

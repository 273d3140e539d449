#include "mba/lp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <utility>

#include "mba/error.hpp"
#include "mba/simplex.hpp"

namespace mba {

double AssignmentSolution::assigned_value(PlayerIdx i) const {
  double v = 0.0;
  for (ItemIdx j : instance->items_of(i)) v += get(i, j) * instance->price(i, j);
  return v;
}

double AssignmentSolution::item_mass(ItemIdx j) const {
  double s = 0.0;
  for (PlayerIdx i : instance->players_of(j)) s += get(i, j);
  return s;
}

double AssignmentSolution::objective() const {
  double v = 0.0;
  for (PlayerIdx i = 0; i < instance->num_players(); ++i) {
    v += std::min(instance->budget(i), assigned_value(i));
  }
  return v;
}

AssignmentSolution make_zero_solution(std::shared_ptr<const Instance> inst) {
  AssignmentSolution sol;
  sol.x.assign(inst->num_players() * inst->num_items(), 0.0);
  sol.origin.assign(inst->num_items(), ItemOrigin::Real);
  sol.instance = std::move(inst);
  return sol;
}

std::vector<std::string> check_feasible(const AssignmentSolution& sol,
                                        double tol) {
  std::vector<std::string> out;
  const Instance& inst = sol.inst();
  for (PlayerIdx i = 0; i < inst.num_players(); ++i) {
    for (ItemIdx j = 0; j < inst.num_items(); ++j) {
      const double v = sol.get(i, j);
      if (v < -tol || v > 1.0 + tol) {
        out.push_back("x of player " + inst.player_id(i) + " on item " +
                      inst.item_id(j) + " outside [0, 1]");
      }
      if (v > tol && !inst.has_price(i, j)) {
        out.push_back("x of player " + inst.player_id(i) + " on item " +
                      inst.item_id(j) + " has no price");
      }
    }
  }
  for (ItemIdx j = 0; j < inst.num_items(); ++j) {
    if (sol.item_mass(j) > 1.0 + tol) {
      out.push_back("item " + inst.item_id(j) + " assigned more than once");
    }
  }
  return out;
}

double config_value(const Instance& inst, PlayerIdx i,
                    const std::vector<ItemIdx>& items) {
  double s = 0.0;
  for (ItemIdx j : items) s += inst.price(i, j);
  return std::min(inst.budget(i), s);
}

AssignmentSolution solve_assignment_lp(std::shared_ptr<const Instance> inst,
                                       const LpOptions& opts) {
  const std::size_t n = inst->num_players(), m = inst->num_items();
  std::vector<std::pair<PlayerIdx, ItemIdx>> pairs;
  for (PlayerIdx i = 0; i < n; ++i) {
    for (ItemIdx j : inst->items_of(i)) {
      if (inst->price(i, j) > 0.0) pairs.emplace_back(i, j);
    }
  }
  // Variables: one per positive-price pair, then P_i.
  LinearProgram lp;
  lp.num_vars = pairs.size() + n;
  lp.objective.assign(lp.num_vars, 0.0);
  for (PlayerIdx i = 0; i < n; ++i) lp.objective[pairs.size() + i] = 1.0;

  std::vector<std::vector<std::pair<std::size_t, double>>> player_rows(n);
  std::vector<std::vector<std::pair<std::size_t, double>>> item_rows(m);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    player_rows[i].emplace_back(k, -inst->price(i, j));
    item_rows[j].emplace_back(k, 1.0);
  }
  for (PlayerIdx i = 0; i < n; ++i) {
    const std::size_t p = pairs.size() + i;
    lp.add_row({{p, 1.0}}, RowSense::Le, inst->budget(i));
    player_rows[i].emplace_back(p, 1.0);
    lp.add_row(std::move(player_rows[i]), RowSense::Le, 0.0);
  }
  for (ItemIdx j = 0; j < m; ++j) {
    if (!item_rows[j].empty()) {
      lp.add_row(std::move(item_rows[j]), RowSense::Le, 1.0);
    }
  }

  SimplexOptions so;
  so.optimality_tol = opts.tol;
  so.max_iterations = opts.max_iterations;
  so.trace = opts.trace;
  const LpResult res = solve_lp(lp, so);
  if (res.status != LpStatus::Optimal) {
    throw LpError("assignment LP did not reach optimality", 0.0, 0.0);
  }

  AssignmentSolution sol = make_zero_solution(std::move(inst));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    sol.at(pairs[k].first, pairs[k].second) = std::clamp(res.x[k], 0.0, 1.0);
  }
  return normalize_saturation(sol);
}

AssignmentSolution solve_assignment_lp(const Instance& inst,
                                       const LpOptions& opts) {
  return solve_assignment_lp(std::make_shared<const Instance>(inst), opts);
}

AssignmentSolution normalize_saturation(const AssignmentSolution& sol) {
  AssignmentSolution out = sol;
  const Instance& inst = sol.inst();
  for (PlayerIdx i = 0; i < inst.num_players(); ++i) {
    const double v = sol.assigned_value(i);
    if (v <= inst.budget(i)) continue;
    const double f = inst.budget(i) / v;
    for (ItemIdx j : inst.items_of(i)) out.at(i, j) *= f;
  }
  return out;
}

namespace {

PricedConfig price_by_enumeration(const Instance& inst, PlayerIdx i,
                                  const std::vector<ItemIdx>& cand,
                                  const std::vector<double>& duals) {
  const std::size_t k = cand.size();
  const std::size_t count = std::size_t{1} << k;
  std::vector<double> psum(count, 0.0), dsum(count, 0.0);
  const double B = inst.budget(i);
  double best = 0.0;
  std::size_t best_mask = 0;
  for (std::size_t mask = 1; mask < count; ++mask) {
    const std::size_t low = mask & (~mask + 1);
    const std::size_t bit = static_cast<std::size_t>(__builtin_ctzll(low));
    psum[mask] = psum[mask ^ low] + inst.price(i, cand[bit]);
    dsum[mask] = dsum[mask ^ low] + duals[cand[bit]];
    const double v = std::min(B, psum[mask]) - dsum[mask];
    if (v > best) {
      best = v;
      best_mask = mask;
    }
  }
  PricedConfig out;
  for (std::size_t b = 0; b < k; ++b) {
    if (best_mask >> b & 1) out.items.push_back(cand[b]);
  }
  out.reduced_value = best;
  return out;
}

// Knapsack over prices rounded to a grid of B_i * grid; totals at or above
// the budget share one capped state. Each state keeps the least dual cost.
PricedConfig price_by_dp(const Instance& inst, PlayerIdx i,
                         const std::vector<ItemIdx>& cand,
                         const std::vector<double>& duals, double grid) {
  const double B = inst.budget(i);
  const std::size_t K = static_cast<std::size_t>(std::ceil(1.0 / grid));
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dp(K + 1, inf);
  dp[0] = 0.0;
  const std::size_t k = cand.size();
  std::vector<std::vector<std::int32_t>> prev(k, std::vector<std::int32_t>(K + 1, -1));
  for (std::size_t a = 0; a < k; ++a) {
    const ItemIdx j = cand[a];
    const auto w = static_cast<std::size_t>(
        std::min<double>(K, std::llround(inst.price(i, j) / (B * grid))));
    std::vector<double> next = dp;
    for (std::size_t t = 0; t <= K; ++t) {
      if (dp[t] == inf) continue;
      const std::size_t nt = std::min(K, t + w);
      const double c = dp[t] + duals[j];
      if (c < next[nt]) {
        next[nt] = c;
        prev[a][nt] = static_cast<std::int32_t>(t);
      }
    }
    dp = std::move(next);
  }
  PricedConfig best;
  for (std::size_t t = 1; t <= K; ++t) {
    if (dp[t] == inf) continue;
    std::vector<ItemIdx> items;
    std::size_t s = t;
    for (std::size_t a = k; a-- > 0;) {
      if (prev[a][s] >= 0) {
        items.push_back(cand[a]);
        s = static_cast<std::size_t>(prev[a][s]);
      }
    }
    std::sort(items.begin(), items.end());
    double d = 0.0;
    for (ItemIdx j : items) d += duals[j];
    const double v = config_value(inst, i, items) - d;
    if (v > best.reduced_value) {
      best.reduced_value = v;
      best.items = std::move(items);
    }
  }
  return best;
}

}  // namespace

PricedConfig price_configuration(const Instance& inst, PlayerIdx i,
                                 const std::vector<double>& item_duals,
                                 const PricingOptions& opts) {
  if (item_duals.size() != inst.num_items()) {
    throw LpError("dual vector size does not match item count", 0.0, 0.0);
  }
  // An item whose dual covers its price never strictly helps.
  std::vector<ItemIdx> cand;
  for (ItemIdx j : inst.items_of(i)) {
    if (item_duals[j] < 0.0) {
      throw LpError("item duals must be nonnegative", 0.0, 0.0);
    }
    if (inst.price(i, j) > item_duals[j]) cand.push_back(j);
  }
  if (cand.empty()) return {};
  if (cand.size() <= opts.enumeration_cap) {
    return price_by_enumeration(inst, i, cand, item_duals);
  }
  return price_by_dp(inst, i, cand, item_duals, opts.grid);
}

ConfigSolution solve_configuration_lp(std::shared_ptr<const Instance> inst,
                                      double accuracy,
                                      const ColumnGenerationOptions& opts) {
  if (!(accuracy > 0.0 && accuracy < 1.0)) {
    throw LpError("accuracy must lie in (0, 1)", 0.0, 0.0);
  }
  const std::size_t n = inst->num_players(), m = inst->num_items();
  std::vector<ConfigColumn> cols;
  std::set<std::pair<PlayerIdx, std::vector<ItemIdx>>> seen;
  for (PlayerIdx i = 0; i < n; ++i) {
    for (ItemIdx j : inst->items_of(i)) {
      if (inst->price(i, j) > 0.0) {
        cols.push_back({i, {j}, 0.0});
        seen.insert({i, {j}});
      }
    }
  }

  SimplexOptions so;
  so.optimality_tol = opts.lp.tol;
  so.max_iterations = opts.lp.max_iterations;
  so.trace = opts.lp.trace;

  ConfigSolution out;
  out.instance = inst;
  double bound = std::numeric_limits<double>::infinity();
  for (std::size_t round = 0;; ++round) {
    LinearProgram lp;
    lp.num_vars = cols.size();
    lp.objective.resize(cols.size());
    std::vector<std::vector<std::pair<std::size_t, double>>> prow(n), irow(m);
    for (std::size_t c = 0; c < cols.size(); ++c) {
      lp.objective[c] = config_value(*inst, cols[c].player, cols[c].items);
      prow[cols[c].player].emplace_back(c, 1.0);
      for (ItemIdx j : cols[c].items) irow[j].emplace_back(c, 1.0);
    }
    for (PlayerIdx i = 0; i < n; ++i) lp.add_row(std::move(prow[i]), RowSense::Le, 1.0);
    for (ItemIdx j = 0; j < m; ++j) lp.add_row(std::move(irow[j]), RowSense::Le, 1.0);
    const LpResult res = solve_lp(lp, so);
    if (res.status != LpStatus::Optimal) {
      throw LpError("configuration master LP did not reach optimality",
                    out.objective, bound);
    }
    out.objective = res.objective;
    out.history.push_back(res.objective);
    out.iterations = round + 1;
    for (std::size_t c = 0; c < cols.size(); ++c) cols[c].weight = res.x[c];

    std::vector<double> item_duals(m);
    for (ItemIdx j = 0; j < m; ++j) item_duals[j] = std::max(0.0, res.duals[n + j]);
    const double threshold =
        accuracy * res.objective / static_cast<double>(n + m);
    bool added = false;
    double dual_bound = 0.0;
    for (ItemIdx j = 0; j < m; ++j) dual_bound += item_duals[j];
    for (PlayerIdx i = 0; i < n; ++i) {
      const double u = std::max(0.0, res.duals[i]);
      PricedConfig pc = price_configuration(*inst, i, item_duals, opts.pricing);
      dual_bound += std::max(u, pc.reduced_value);
      if (pc.reduced_value - u > threshold + 1e-12 &&
          seen.insert({i, pc.items}).second) {
        cols.push_back({i, std::move(pc.items), 0.0});
        added = true;
      }
    }
    bound = std::min(bound, dual_bound);
    out.dual_bound = bound;
    if (!added) break;
    if (round + 1 >= opts.max_rounds) {
      throw LpError("column generation round cap reached", out.objective, bound);
    }
  }
  for (auto& c : cols) {
    if (c.weight > 1e-12) out.columns.push_back(std::move(c));
  }
  return out;
}

ConfigSolution solve_configuration_lp(const Instance& inst, double accuracy,
                                      const ColumnGenerationOptions& opts) {
  return solve_configuration_lp(std::make_shared<const Instance>(inst),
                                accuracy, opts);
}

Projection project_to_assignment(const ConfigSolution& y,
                                 double max_relative_loss) {
  const Instance& inst = *y.instance;
  Projection out;
  out.solution = make_zero_solution(y.instance);
  AssignmentSolution& x = out.solution;
  for (const auto& c : y.columns) {
    out.config_value += c.weight * config_value(inst, c.player, c.items);
    for (ItemIdx j : c.items) x.at(c.player, j) += c.weight;
  }
  for (double& v : x.x) v = std::min(v, 1.0);
  out.untrimmed_value = x.objective();

  for (PlayerIdx i = 0; i < inst.num_players(); ++i) {
    double b = 0.0;
    std::vector<ItemIdx> small;
    for (ItemIdx j : inst.items_of(i)) {
      if (inst.is_big(i, j)) {
        b += x.get(i, j);
      } else {
        small.push_back(j);
      }
    }
    // Cheapest small items first.
    std::stable_sort(small.begin(), small.end(), [&](ItemIdx a, ItemIdx c) {
      return inst.price(i, a) < inst.price(i, c);
    });
    const double cap = std::max(0.0, 1.0 - b);
    for (ItemIdx j : small) x.at(i, j) = std::min(x.get(i, j), cap);
  }
  const double projected = x.objective();
  out.trimming_loss = std::max(0.0, out.untrimmed_value - projected);
  if (out.config_value - projected >
      max_relative_loss * std::max(1.0, out.config_value)) {
    throw ProjectionError("projection property unobtainable without value loss",
                          out.config_value, projected);
  }
  return out;
}

nlohmann::json assignment_to_json(const AssignmentSolution& sol) {
  const Instance& inst = sol.inst();
  nlohmann::json entries = nlohmann::json::array();
  for (PlayerIdx i = 0; i < inst.num_players(); ++i) {
    for (ItemIdx j : inst.items_of(i)) {
      if (sol.get(i, j) > 0.0) {
        entries.push_back({{"player", inst.player_id(i)},
                           {"item", inst.item_id(j)},
                           {"x", sol.get(i, j)}});
      }
    }
  }
  nlohmann::json fake = nlohmann::json::array();
  for (ItemIdx j = 0; j < inst.num_items(); ++j) {
    if (sol.is_fake(j)) fake.push_back(inst.item_id(j));
  }
  return {{"x", entries}, {"objective", sol.objective()}, {"fake_items", fake}};
}

nlohmann::json config_to_json(const ConfigSolution& y) {
  const Instance& inst = *y.instance;
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : y.columns) {
    nlohmann::json items = nlohmann::json::array();
    for (ItemIdx j : c.items) items.push_back(inst.item_id(j));
    cols.push_back({{"player", inst.player_id(c.player)},
                    {"items", items},
                    {"weight", c.weight},
                    {"value", config_value(inst, c.player, c.items)}});
  }
  return {{"columns", cols},
          {"objective", y.objective},
          {"dual_bound", y.dual_bound},
          {"rounds", y.iterations}};
}

}  // namespace mba

#include "mba/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mba/error.hpp"
#include "mba/format.hpp"
#include "mba/random.hpp"

namespace mba {

namespace {

double alpha_term(double B, double val) { return val - val * val / (4.0 * B); }

double big_small_term(double B, double b, double S) {
  return b * B + (1.0 - b) * S;
}

// Per-player state for replaying moves one at a time.
struct Ledger {
  const Instance& inst;
  bool alpha;
  std::vector<double> val, b, S;

  Ledger(const AssignmentSolution& sol, bool use_alpha)
      : inst(sol.inst()), alpha(use_alpha) {
    const SolutionStats st = compute_stats(sol);
    for (const auto& p : st.players) {
      val.push_back(p.val);
      b.push_back(p.b);
      S.push_back(p.S);
    }
  }

  double term(PlayerIdx i) const {
    const double B = inst.budget(i);
    return alpha ? alpha_term(B, val[i]) : big_small_term(B, b[i], S[i]);
  }

  // Returns the functional change of adding `d` mass of item j to player i.
  double shift(PlayerIdx i, ItemIdx j, double d) {
    const double before = term(i);
    const double p = inst.price(i, j);
    val[i] += d * p;
    if (inst.is_big(i, j)) {
      b[i] += d;
    } else {
      S[i] += d * p;
    }
    return term(i) - before;
  }
};

void record(std::vector<Move>& moves, AssignmentSolution& out, Ledger& ledger,
            Move m) {
  m.gain_minus = ledger.shift(m.from, m.item, -m.delta);
  m.gain_plus = ledger.shift(m.to, m.item, m.delta);
  out.at(m.from, m.item) -= m.delta;
  out.at(m.to, m.item) += m.delta;
  moves.push_back(m);
}

void clamp_nonnegative(AssignmentSolution& sol) {
  for (double& v : sol.x) {
    if (v < 0.0 && v > -1e-15) v = 0.0;
  }
}

}  // namespace

const char* to_string(Phase p) {
  switch (p) {
    case Phase::Nubp: return "nubp";
    case Phase::Preprocess: return "preprocess";
    case Phase::Main: return "main";
  }
  return "";
}

double st_alpha_functional(const AssignmentSolution& sol) {
  const Instance& inst = sol.inst();
  double s = 0.0;
  for (PlayerIdx i = 0; i < inst.num_players(); ++i) {
    s += alpha_term(inst.budget(i), sol.assigned_value(i));
  }
  return s;
}

double st_big_small_functional(const AssignmentSolution& sol) {
  const Instance& inst = sol.inst();
  const SolutionStats st = compute_stats(sol);
  double s = 0.0;
  for (PlayerIdx i = 0; i < inst.num_players(); ++i) {
    s += big_small_term(inst.budget(i), st.players[i].b, st.players[i].S);
  }
  return s;
}

UnequalPriceReport find_unequally_priced(const AssignmentSolution& sol,
                                         double mu, const NubpOptions& opts) {
  if (!(mu > 0.0 && mu < 0.5)) throw TransformError("mu must lie in (0, 1/2)");
  const Instance& inst = sol.inst();
  for (PlayerIdx i = 0; i < inst.num_players(); ++i) {
    if (!opts.active.empty() && !opts.active[i]) continue;
    const double alpha = sol.assigned_value(i) / inst.budget(i);
    if (std::fabs(alpha - 1.0) > opts.saturation_tol) {
      throw TransformError("player " + inst.player_id(i) +
                           " does not have a saturated budget");
    }
  }
  UnequalPriceReport rep;
  for (ItemIdx j = 0; j < inst.num_items(); ++j) {
    double mass = 0.0, value = 0.0;
    for (PlayerIdx i : inst.players_of(j)) {
      mass += sol.get(i, j);
      value += sol.get(i, j) * inst.price(i, j);
    }
    if (mass <= 0.0) continue;
    const double w = value / mass;
    double high = 0.0, low = 0.0;
    for (PlayerIdx i : inst.players_of(j)) {
      const double v = sol.get(i, j) * inst.price(i, j);
      if (inst.price(i, j) >= (1.0 + mu) * w) high += v;
      if (inst.price(i, j) <= (1.0 - mu) * w) low += v;
    }
    UnequalItem it;
    it.item = j;
    it.w = w;
    const bool high_side = high > 0.0 && high >= mu * value;
    const bool low_side = low > 0.0 && low >= mu * value;
    if (!high_side && !low_side) continue;
    it.side = high_side ? PriceSide::High : PriceSide::Low;
    for (PlayerIdx i : inst.players_of(j)) {
      const double x = sol.get(i, j);
      if (x <= 0.0) continue;
      const double p = inst.price(i, j);
      if (it.side == PriceSide::High) {
        if (p >= (1.0 + mu) * w) {
          it.H.push_back(i);
          it.h += x;
        } else if (p <= (1.0 + mu / 2.0) * w) {
          it.L.push_back(i);
          it.l += x;
        }
      } else {
        if (p <= (1.0 - mu) * w) {
          it.H.push_back(i);
          it.h += x;
        } else if (p >= (1.0 - mu / 2.0) * w) {
          it.L.push_back(i);
          it.l += x;
        }
      }
    }
    if (it.L.empty()) continue;  // nothing to trade with
    rep.items.push_back(std::move(it));
  }
  return rep;
}

NubpResult apply_nubp(const AssignmentSolution& sol, double mu,
                      const NubpOptions& opts) {
  NubpResult res;
  res.report = find_unequally_priced(sol, mu, opts);
  res.solution = sol;
  res.trace.functional = "alpha";
  res.trace.st_before = st_alpha_functional(sol);
  const Instance& inst = sol.inst();
  const double factor = mu * (1.0 + mu) / ((2.0 + mu) * 10.0);
  const double gamma = mu / 10.0;
  Ledger ledger(sol, true);

  for (const UnequalItem& it : res.report.items) {
    const ItemIdx j = it.item;
    // High side: H gains x*factor, L loses x*factor*h/l.
    // Low side: H loses x*factor, L gains x*factor*h/l.
    // Pairwise flow between a loser and a gainer: factor*x_i*x_i'/l.
    for (PlayerIdx a : it.H) {
      for (PlayerIdx c : it.L) {
        const double zeta = factor * sol.get(a, j) * sol.get(c, j) / it.l;
        const bool high = it.side == PriceSide::High;
        const PlayerIdx loser = high ? c : a;
        const PlayerIdx gainer = high ? a : c;
        const double pg = inst.price(gainer, j), pl = inst.price(loser, j);
        Move m;
        m.phase = Phase::Nubp;
        m.item = j;
        m.from = loser;
        m.to = gainer;
        m.delta = zeta;
        m.g = pg * (zeta - zeta * (1.0 + gamma) / 2.0 - zeta * zeta / 4.0) -
              pl * (zeta + zeta * zeta / 4.0 - zeta * (1.0 - gamma) / 2.0);
        record(res.trace.moves, res.solution, ledger, m);
      }
    }
  }
  clamp_nonnegative(res.solution);
  res.trace.st_after = st_alpha_functional(res.solution);
  return res;
}

std::set<ItemIdx> find_big_small(const AssignmentSolution& sol, double mu) {
  if (!(mu > 0.0 && mu < 0.5)) throw TransformError("mu must lie in (0, 1/2)");
  const SolutionStats st = compute_stats(sol);
  std::set<ItemIdx> out;
  for (ItemIdx j = 0; j < st.items.size(); ++j) {
    const ItemStats& s = st.items[j];
    if (s.x > 0.0 && mu * s.x <= s.xB && s.xB <= (1.0 - mu) * s.x) out.insert(j);
  }
  return out;
}

Partition sample_partition(std::size_t num_players, std::uint64_t seed) {
  Partition p;
  p.seed = seed;
  Rng rng(seed);
  for (std::size_t i = 0; i < num_players; ++i) {
    p.color.push_back(rng.bernoulli(0.5) ? Color::R : Color::G);
  }
  return p;
}

std::vector<std::string> check_nup_restrictions(const AssignmentSolution& sol,
                                                const NupOptions& opts) {
  const Instance& inst = sol.inst();
  std::vector<std::string> out;
  const CanonicalCheck canon = is_canonical(sol, opts.tol);
  for (const auto& v : canon.violations) out.push_back("not canonical: " + v);
  for (ItemIdx j = 0; j < inst.num_items(); ++j) {
    double mass = 0.0;
    double p0 = -1.0;
    bool unique = true;
    for (PlayerIdx i : inst.players_of(j)) {
      const double x = sol.get(i, j);
      if (x <= 0.0) continue;
      mass += x;
      const double p = inst.price(i, j);
      if (p0 < 0.0) {
        p0 = p;
      } else if (std::fabs(p - p0) > opts.tol * std::max(p, p0)) {
        unique = false;
      }
      if (!inst.is_big(i, j) && p > inst.budget(i) / 2.0 * (1.0 + opts.tol)) {
        out.push_back("small item " + inst.item_id(j) + " of player " +
                      inst.player_id(i) + " is priced above half the budget");
      }
    }
    if (opts.require_unique_prices && !unique) {
      out.push_back("item " + inst.item_id(j) + " has more than one price");
    }
    if (!sol.is_fake(j) && mass > 0.0 && mass < 0.9 - 1e-12) {
      out.push_back("real item " + inst.item_id(j) + " is assigned below 9/10");
    }
  }
  return out;
}

namespace {

struct Snapshot {
  std::vector<ItemStats> items;
  explicit Snapshot(const AssignmentSolution& s) : items(compute_stats(s).items) {}
};

// Small-to-big transfer within R on item j, ratios from `snap`.
void small_to_big(const AssignmentSolution& base, const Snapshot& snap,
                  const Partition& part, ItemIdx j, Phase phase,
                  AssignmentSolution& out, Ledger& ledger,
                  std::vector<Move>& moves) {
  const Instance& inst = base.inst();
  const ItemStats& s = snap.items[j];
  for (PlayerIdx i : inst.players_of(j)) {
    if (part.color[i] != Color::R || inst.is_big(i, j)) continue;
    const double xi = base.get(i, j);
    if (xi <= 0.0) continue;
    for (PlayerIdx k : inst.players_of(j)) {
      if (part.color[k] != Color::R || !inst.is_big(k, j)) continue;
      const double xk = base.get(k, j);
      if (xk <= 0.0) continue;
      if (s.xB <= 0.0 || s.xS <= 0.0) {
        throw TransformError("degenerate big or small mass on item " +
                             inst.item_id(j));
      }
      Move m;
      m.phase = phase;
      m.item = j;
      m.from = i;
      m.to = k;
      m.delta = std::min(xi / 100.0 * (xk / s.xB), xi / 100.0 * (xk / s.xS));
      record(moves, out, ledger, m);
    }
  }
}

}  // namespace

NupResult nup_preprocess(const AssignmentSolution& sol, const Partition& part,
                         const NupOptions& opts) {
  const Instance& inst = sol.inst();
  if (part.color.size() != inst.num_players()) {
    throw TransformError("partition does not cover every player");
  }
  const auto violations = check_nup_restrictions(sol, opts);
  if (!violations.empty()) {
    std::string msg = "restriction violated: " + violations.front();
    for (std::size_t k = 1; k < violations.size(); ++k) msg += "; " + violations[k];
    throw TransformError(msg);
  }
  NupResult res;
  res.solution = sol;
  res.trace.functional = "big_small";
  res.trace.st_before = st_big_small_functional(sol);
  Ledger ledger(sol, false);
  const Snapshot snap(sol);

  for (ItemIdx j = 0; j < inst.num_items(); ++j) {
    if (sol.is_fake(j)) continue;
    const double xj = snap.items[j].x;
    // Rule 1: G holders of a big item give to R holders of it.
    for (PlayerIdx i : inst.players_of(j)) {
      if (part.color[i] != Color::G || !inst.is_big(i, j)) continue;
      const double xi = sol.get(i, j);
      if (xi <= 0.0) continue;
      for (PlayerIdx k : inst.players_of(j)) {
        if (part.color[k] != Color::R || !inst.is_big(k, j)) continue;
        const double xk = sol.get(k, j);
        if (xk <= 0.0) continue;
        if (xj - xi <= 0.0) {
          throw TransformError("degenerate mass on item " + inst.item_id(j));
        }
        Move m;
        m.phase = Phase::Preprocess;
        m.item = j;
        m.from = i;
        m.to = k;
        m.delta = xi / 100.0 * (xk / (xj - xi));
        record(res.trace.moves, res.solution, ledger, m);
      }
    }
    // Rule 2.
    small_to_big(sol, snap, part, j, Phase::Preprocess, res.solution, ledger,
                 res.trace.moves);
  }
  clamp_nonnegative(res.solution);
  res.trace.st_after = st_big_small_functional(res.solution);
  return res;
}

NupResult nup_main(const AssignmentSolution& x1, const Partition& part,
                   const std::set<ItemIdx>& items, double mu) {
  const Instance& inst = x1.inst();
  if (part.color.size() != inst.num_players()) {
    throw TransformError("partition does not cover every player");
  }
  NupResult res;
  res.solution = x1;
  res.trace.functional = "big_small";
  res.trace.st_before = st_big_small_functional(x1);
  Ledger ledger(x1, false);
  const Snapshot snap(x1);
  const std::set<ItemIdx> still = find_big_small(x1, mu);
  for (ItemIdx j : items) {
    if (j >= inst.num_items()) throw TransformError("item index out of range");
    if (x1.is_fake(j)) continue;
    if (!still.count(j)) {
      res.trace.warnings.push_back("item " + inst.item_id(j) +
                                   " is no longer big-small after preprocessing");
    }
    small_to_big(x1, snap, part, j, Phase::Main, res.solution, ledger,
                 res.trace.moves);
  }
  clamp_nonnegative(res.solution);
  res.trace.st_after = st_big_small_functional(res.solution);
  return res;
}

std::string trace_csv(const AssignmentSolution& sol, const TransformTrace& t) {
  const Instance& inst = sol.inst();
  std::ostringstream out;
  out << "phase,item,from,to,delta,gain_minus,gain_plus,g\n";
  for (const Move& m : t.moves) {
    out << to_string(m.phase) << ',' << inst.item_id(m.item) << ','
        << inst.player_id(m.from) << ',' << inst.player_id(m.to) << ','
        << num(m.delta) << ',' << num(m.gain_minus) << ',' << num(m.gain_plus)
        << ',' << num(m.g) << '\n';
  }
  return out.str();
}

}  // namespace mba

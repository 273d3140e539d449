#include "mba/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mba/error.hpp"
#include "mba/format.hpp"

namespace mba {

SolutionStats compute_stats(const AssignmentSolution& sol) {
  const Instance& inst = sol.inst();
  SolutionStats st;
  st.players.resize(inst.num_players());
  st.items.resize(inst.num_items());
  for (PlayerIdx i = 0; i < inst.num_players(); ++i) {
    PlayerStats& ps = st.players[i];
    for (ItemIdx j : inst.items_of(i)) {
      const double x = sol.get(i, j);
      if (x == 0.0) continue;
      const double v = x * inst.price(i, j);
      ps.val += v;
      ItemStats& is = st.items[j];
      is.x += x;
      is.w += v;
      if (inst.is_big(i, j)) {
        ps.b += x;
        is.xB += x;
      } else {
        ps.S += v;
      }
    }
    ps.alpha = ps.val / inst.budget(i);
  }
  for (ItemStats& is : st.items) {
    is.xS = is.x - is.xB;
    is.w = is.x > 0.0 ? is.w / is.x : 0.0;
  }
  return st;
}

CanonicalCheck is_canonical(const AssignmentSolution& sol, double tol) {
  const Instance& inst = sol.inst();
  CanonicalCheck out;
  auto fail = [&](std::string msg) {
    out.ok = false;
    out.violations.push_back(std::move(msg));
  };
  for (PlayerIdx i = 0; i < inst.num_players(); ++i) {
    const double B = inst.budget(i);
    double big = 0.0, small = 0.0;
    for (ItemIdx j : inst.items_of(i)) {
      const double x = sol.get(i, j);
      if (x <= 0.0) continue;
      if (inst.is_big(i, j)) {
        big += x * inst.price(i, j);
        if (std::fabs(inst.price(i, j) - B) > tol * B) {
          fail("(a) player " + inst.player_id(i) + " has big item " +
               inst.item_id(j) + " priced below its budget");
        }
      } else {
        small += x * inst.price(i, j);
      }
    }
    if (std::fabs(big - B / 2) > tol * B) {
      fail("(b) player " + inst.player_id(i) + " big value differs from B/2");
    }
    if (std::fabs(small - B / 2) > tol * B) {
      fail("(b) player " + inst.player_id(i) + " small value differs from B/2");
    }
  }
  return out;
}

double bound_alpha(double B, double alpha) {
  if (B < 0.0 || alpha < 0.0) throw Error("bound_alpha needs nonnegative inputs");
  if (alpha >= 2.0) return B;
  return B * alpha * (1.0 - alpha / 4.0);
}

double bound_intermediate(double B, double alpha, double w) {
  if (w < 0.0 || w > 1.0) throw Error("w must lie in [0, 1]");
  return B * (alpha - w * (alpha - w));
}

std::optional<double> bound_big_small(double B, double b, double S) {
  if (B < 0.0 || b < 0.0 || S < 0.0) {
    throw Error("bound_big_small needs nonnegative inputs");
  }
  if (S / B > (1.0 + b) / 2.0) return std::nullopt;
  return b * B + (1.0 - b) * S;
}

std::string player_stats_csv(const AssignmentSolution& sol,
                             const SolutionStats& stats) {
  const Instance& inst = sol.inst();
  std::ostringstream out;
  out << "player,budget,alpha,b,S,val,bound_alpha,bound_big_small\n";
  for (PlayerIdx i = 0; i < inst.num_players(); ++i) {
    const PlayerStats& p = stats.players[i];
    const double B = inst.budget(i);
    const auto bs = bound_big_small(B, p.b, p.S);
    out << inst.player_id(i) << ',' << num(B) << ',' << num(p.alpha) << ','
        << num(p.b) << ',' << num(p.S) << ',' << num(p.val) << ','
        << num(bound_alpha(B, p.alpha)) << ',' << (bs ? num(*bs) : "") << '\n';
  }
  return out.str();
}

std::string item_stats_csv(const AssignmentSolution& sol,
                           const SolutionStats& stats) {
  const Instance& inst = sol.inst();
  std::ostringstream out;
  out << "item,x,xB,xS,w\n";
  for (ItemIdx j = 0; j < inst.num_items(); ++j) {
    const ItemStats& s = stats.items[j];
    out << inst.item_id(j) << ',' << num(s.x) << ',' << num(s.xB) << ','
        << num(s.xS) << ',' << num(s.w) << '\n';
  }
  return out.str();
}

}  // namespace mba

#include "mba/arrangements.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mba/error.hpp"
#include "mba/format.hpp"

namespace mba {

double Arrangement::total(std::size_t c) const {
  double s = 0.0;
  for (std::size_t l = 0; l < k; ++l) s += slot_price(c, l);
  return s;
}

double Arrangement::V(std::size_t c) const {
  return std::min(instance->budget(player), total(c));
}

double Arrangement::W(std::size_t c) const { return total(c) - V(c); }

double Arrangement::expected_value() const {
  double s = 0.0;
  for (std::size_t c = 0; c < D; ++c) s += V(c);
  return D ? s / static_cast<double>(D) : 0.0;
}

Arrangement initial_arrangement(const BucketGraph& g, PlayerIdx player,
                                std::size_t D) {
  if (D == 0) throw Error("arrangement needs D >= 1");
  if (player >= g.inst().num_players()) throw Error("player not in graph");
  Arrangement arr;
  arr.instance = g.instance;
  arr.player = player;
  arr.D = D;
  arr.k = g.num_buckets(player);
  arr.configs.assign(D, std::vector<std::optional<ItemIdx>>(arr.k));
  const auto dd = static_cast<double>(D);
  for (std::size_t l = 0; l < arr.k; ++l) {
    const Bucket& b = g.buckets[g.first_bucket[player] + l];
    double u = 0.0;
    for (std::size_t e : b.edges) {
      const double u1 = u + g.edges[e].f;
      const auto lo = static_cast<std::size_t>(std::llround(u * dd));
      const auto hi = std::min(D, static_cast<std::size_t>(std::llround(u1 * dd)));
      for (std::size_t c = lo; c < hi; ++c) arr.configs[c][l] = g.edges[e].item;
      u = u1;
    }
  }
  return arr;
}

std::vector<double> arrangement_marginals(const Arrangement& arr,
                                          const BucketGraph& g) {
  std::vector<double> out(g.edges.size(), 0.0);
  const std::size_t base = g.first_bucket[arr.player];
  for (std::size_t l = 0; l < arr.k; ++l) {
    for (std::size_t e : g.buckets[base + l].edges) {
      std::size_t count = 0;
      for (const auto& cfg : arr.configs) {
        if (cfg[l] == g.edges[e].item) ++count;
      }
      out[e] = static_cast<double>(count) / static_cast<double>(arr.D);
    }
  }
  return out;
}

WorsenResult worsen_arrangement(const Arrangement& arr) {
  WorsenResult res;
  res.arrangement = arr;
  Arrangement& a = res.arrangement;
  const std::size_t D = a.D, k = a.k;
  const double guard = static_cast<double>(D) * D * k * k;
  std::vector<double> totals(D);
  for (std::size_t c = 0; c < D; ++c) totals[c] = a.total(c);
  res.history.push_back(a.expected_value());

  std::vector<std::size_t> order(D);
  while (true) {
    // Scan pairs in order of (total, index).
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      return totals[x] != totals[y] ? totals[x] < totals[y] : x < y;
    });
    std::size_t pass_swaps = 0;
    for (std::size_t l = 0; l < k; ++l) {
      for (std::size_t ai = 0; ai < D; ++ai) {
        for (std::size_t bi = ai + 1; bi < D; ++bi) {
          const std::size_t c = order[ai], d = order[bi];
          const double pc = a.slot_price(c, l), pd = a.slot_price(d, l);
          if (pc > pd && totals[c] <= totals[d]) {
            std::swap(a.configs[c][l], a.configs[d][l]);
            totals[c] += pd - pc;
            totals[d] += pc - pd;
            ++pass_swaps;
          }
        }
      }
    }
    res.swaps += pass_swaps;
    if (static_cast<double>(res.swaps) > guard) {
      throw Error("arrangement worsening exceeded its swap guard");
    }
    if (pass_swaps == 0) break;
    res.history.push_back(a.expected_value());
  }
  return res;
}

ArrangementStats arrangement_stats(const Arrangement& arr) {
  const Instance& inst = *arr.instance;
  const double B = inst.budget(arr.player);
  ArrangementStats st;
  double sumW = 0.0, sumWB = 0.0, sumWS = 0.0, sumG = 0.0, sumV = 0.0;
  std::size_t nW = 0, nWB = 0, nWS = 0, nB = 0, nG = 0;
  for (std::size_t c = 0; c < arr.D; ++c) {
    bool has_big = false;
    for (const auto& s : arr.configs[c]) {
      if (s && inst.is_big(arr.player, *s)) has_big = true;
    }
    const double t = arr.total(c);
    const double V = std::min(B, t);
    sumV += V;
    if (has_big) ++nB;
    if (t >= B * (1.0 - 1e-12)) {
      const double W = std::max(0.0, t - B);
      ++nW;
      sumW += W;
      if (has_big) {
        ++nWB;
        sumWB += W;
      } else {
        ++nWS;
        sumWS += W;
      }
    } else {
      ++nG;
      sumG += V;
    }
  }
  const auto D = static_cast<double>(arr.D);
  st.w = nW / D;
  st.v = nWS / D;
  st.b_mass = nB / D;
  if (nW) st.L = sumW / nW;
  if (nWB) st.L_B = sumWB / nWB;
  if (nWS) st.L_S = sumWS / nWS;
  if (nG) st.G = sumG / nG;
  st.expected_value = sumV / D;
  return st;
}

double arrangement_slack(const Arrangement& arr) {
  double pmax = 0.0;
  for (ItemIdx j : arr.instance->items_of(arr.player)) {
    pmax = std::max(pmax, arr.instance->price(arr.player, j));
  }
  return static_cast<double>(arr.k) * pmax / static_cast<double>(arr.D);
}

std::string arrangement_csv(const Arrangement& arr) {
  const Instance& inst = *arr.instance;
  std::ostringstream out;
  out << "config";
  for (std::size_t l = 0; l < arr.k; ++l) out << ",bucket" << l + 1;
  out << ",total,V,W\n";
  for (std::size_t c = 0; c < arr.D; ++c) {
    out << c;
    for (std::size_t l = 0; l < arr.k; ++l) {
      out << ',';
      if (arr.configs[c][l]) out << inst.item_id(*arr.configs[c][l]);
    }
    out << ',' << num(arr.total(c)) << ',' << num(arr.V(c)) << ','
        << num(arr.W(c)) << '\n';
  }
  return out.str();
}

}  // namespace mba

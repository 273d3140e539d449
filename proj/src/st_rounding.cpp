#include "mba/st_rounding.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "mba/error.hpp"
#include "mba/format.hpp"
#include "mba/random.hpp"

namespace mba {

namespace {

constexpr double kZero = 1e-12;     // entries below this are dropped
constexpr double kMassTol = 1e-11;  // peeling stops below this residue

}  // namespace

BucketGraph build_bucket_graph(const AssignmentSolution& sol) {
  const Instance& inst = sol.inst();
  BucketGraph g;
  g.instance = sol.instance;
  g.origin = sol.origin;
  g.first_bucket.push_back(0);
  for (PlayerIdx i = 0; i < inst.num_players(); ++i) {
    std::vector<ItemIdx> items;
    double total = 0.0;
    for (ItemIdx j : inst.items_of(i)) {
      if (sol.get(i, j) > 0.0) {
        items.push_back(j);
        total += sol.get(i, j);
      }
    }
    // Price descending, declared order on ties.
    std::stable_sort(items.begin(), items.end(), [&](ItemIdx a, ItemIdx b) {
      return inst.price(i, a) > inst.price(i, b);
    });
    std::size_t k = 0;
    if (!items.empty()) {
      k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(total - 1e-9)));
    }
    const std::size_t base = g.buckets.size();
    for (std::size_t t = 0; t < k; ++t) g.buckets.push_back({i, t, {}});

    std::size_t t = 0;
    double room = 1.0;
    for (ItemIdx j : items) {
      double mass = sol.get(i, j);
      while (mass > 0.0) {
        if (room <= kZero && t + 1 < k) {
          ++t;
          room = 1.0;
        }
        // The last bucket absorbs rounding residue.
        const double take = t + 1 == k ? mass : std::min(mass, room);
        if (take > 0.0) {
          g.buckets[base + t].edges.push_back(g.edges.size());
          g.edges.push_back({base + t, j, take});
        }
        mass -= take;
        room -= take;
        if (mass <= kZero * 1e-3) mass = 0.0;
      }
    }
    g.first_bucket.push_back(g.buckets.size());
  }
  return g;
}

std::vector<std::string> check_bucket_graph(const BucketGraph& g, double tol) {
  const Instance& inst = g.inst();
  std::vector<std::string> out;
  std::vector<double> bucket_sum(g.buckets.size(), 0.0);
  std::vector<double> item_sum(inst.num_items(), 0.0);
  for (const auto& e : g.edges) {
    bucket_sum[e.bucket] += e.f;
    item_sum[e.item] += e.f;
  }
  for (PlayerIdx i = 0; i < inst.num_players(); ++i) {
    const std::size_t lo = g.first_bucket[i], hi = g.first_bucket[i + 1];
    for (std::size_t b = lo; b < hi; ++b) {
      const std::string name =
          "bucket " + std::to_string(b - lo + 1) + " of player " + inst.player_id(i);
      if (bucket_sum[b] > 1.0 + tol) out.push_back(name + " holds more than 1");
      if (b + 1 < hi && bucket_sum[b] < 1.0 - tol) {
        out.push_back(name + " is not full");
      }
      if (b + 1 < hi) {
        double lowest = INFINITY;
        for (std::size_t e : g.buckets[b].edges) {
          lowest = std::min(lowest, inst.price(i, g.edges[e].item));
        }
        for (std::size_t e : g.buckets[b + 1].edges) {
          if (inst.price(i, g.edges[e].item) > lowest) {
            out.push_back(name + " is followed by a pricier item");
          }
        }
      }
    }
  }
  for (ItemIdx j = 0; j < inst.num_items(); ++j) {
    if (item_sum[j] > 1.0 + tol) {
      out.push_back("item " + inst.item_id(j) + " has mass above 1");
    }
  }
  return out;
}

std::size_t MatchingDistribution::support_size() const {
  return static_cast<std::size_t>(
      std::count_if(matchings.begin(), matchings.end(),
                    [](const Matching& m) { return !m.edges.empty(); }));
}

namespace {

// Kuhn's augmenting-path matching on a dense support pattern.
class PerfectMatcher {
 public:
  explicit PerfectMatcher(std::size_t n) : n_(n) {}

  // Returns match_of_row or an empty vector when no perfect matching exists.
  std::vector<std::size_t> run(const std::vector<double>& w) {
    w_ = &w;
    col_owner_.assign(n_, n_);
    for (std::size_t r = 0; r < n_; ++r) {
      seen_.assign(n_, false);
      if (!augment(r)) return {};
    }
    std::vector<std::size_t> row_match(n_);
    for (std::size_t c = 0; c < n_; ++c) row_match[col_owner_[c]] = c;
    return row_match;
  }

 private:
  bool augment(std::size_t r) {
    for (std::size_t c = 0; c < n_; ++c) {
      if ((*w_)[r * n_ + c] <= kZero || seen_[c]) continue;
      seen_[c] = true;
      if (col_owner_[c] == n_ || augment(col_owner_[c])) {
        col_owner_[c] = r;
        return true;
      }
    }
    return false;
  }

  std::size_t n_;
  const std::vector<double>* w_ = nullptr;
  std::vector<std::size_t> col_owner_;
  std::vector<bool> seen_;
};

// A nonzero μ with Aμ = 0 for a 0/1 matrix A with more columns than rank.
std::vector<double> null_vector(std::vector<std::vector<double>> a,
                                std::size_t cols) {
  const std::size_t rows = a.size();
  std::vector<std::size_t> pivot_col;
  std::size_t r = 0;
  std::vector<bool> is_pivot(cols, false);
  for (std::size_t c = 0; c < cols && r < rows; ++c) {
    std::size_t best = r;
    for (std::size_t k = r; k < rows; ++k) {
      if (std::fabs(a[k][c]) > std::fabs(a[best][c])) best = k;
    }
    if (std::fabs(a[best][c]) < 1e-9) continue;
    std::swap(a[r], a[best]);
    const double inv = 1.0 / a[r][c];
    for (double& v : a[r]) v *= inv;
    for (std::size_t k = 0; k < rows; ++k) {
      if (k == r || a[k][c] == 0.0) continue;
      const double f = a[k][c];
      for (std::size_t cc = 0; cc < cols; ++cc) a[k][cc] -= f * a[r][cc];
    }
    pivot_col.push_back(c);
    is_pivot[c] = true;
    ++r;
  }
  std::size_t free_col = cols;
  for (std::size_t c = 0; c < cols; ++c) {
    if (!is_pivot[c]) {
      free_col = c;
      break;
    }
  }
  if (free_col == cols) return {};
  std::vector<double> mu(cols, 0.0);
  mu[free_col] = 1.0;
  for (std::size_t k = 0; k < pivot_col.size(); ++k) {
    mu[pivot_col[k]] = -a[k][free_col];
  }
  return mu;
}

// Removes matchings until at most |E| nonempty ones keep positive weight,
// without changing any edge marginal. Mass leaving the nonempty matchings
// moves to the empty matching.
void reduce_support(std::vector<Matching>& ms, std::size_t num_edges) {
  while (true) {
    std::vector<std::size_t> live;
    for (std::size_t k = 0; k < ms.size(); ++k) {
      if (!ms[k].edges.empty() && ms[k].lambda > 0.0) live.push_back(k);
    }
    if (live.size() <= num_edges) return;
    std::vector<std::vector<double>> a(num_edges,
                                       std::vector<double>(live.size(), 0.0));
    for (std::size_t c = 0; c < live.size(); ++c) {
      for (std::size_t e : ms[live[c]].edges) a[e][c] = 1.0;
    }
    std::vector<double> mu = null_vector(std::move(a), live.size());
    if (mu.empty()) {
      throw DecompositionError("support reduction found no dependent matchings");
    }
    if (std::accumulate(mu.begin(), mu.end(), 0.0) < 0.0) {
      for (double& v : mu) v = -v;
    }
    double t = INFINITY;
    std::size_t hit = 0;
    for (std::size_t c = 0; c < live.size(); ++c) {
      if (mu[c] > 1e-12 && ms[live[c]].lambda / mu[c] < t) {
        t = ms[live[c]].lambda / mu[c];
        hit = c;
      }
    }
    double moved = 0.0;
    for (std::size_t c = 0; c < live.size(); ++c) {
      double& l = ms[live[c]].lambda;
      l -= t * mu[c];
      moved += t * mu[c];
      if (l < kZero) {
        moved += l;
        l = 0.0;
      }
    }
    moved += ms[live[hit]].lambda;
    ms[live[hit]].lambda = 0.0;
    auto empty = std::find_if(ms.begin(), ms.end(),
                              [](const Matching& m) { return m.edges.empty(); });
    if (empty == ms.end()) {
      ms.push_back({{}, 0.0});
      empty = ms.end() - 1;
    }
    empty->lambda += moved;
    ms.erase(std::remove_if(ms.begin(), ms.end(),
                            [](const Matching& m) {
                              return !m.edges.empty() && m.lambda <= 0.0;
                            }),
             ms.end());
  }
}

}  // namespace

MatchingDistribution decompose_matchings(const BucketGraph& g) {
  const Instance& inst = g.inst();
  const std::size_t nb = g.buckets.size(), ni = inst.num_items();
  const std::size_t n = nb + ni;

  std::vector<double> row(nb, 0.0), col(ni, 0.0);
  for (const auto& e : g.edges) {
    if (e.f < 0.0) throw DecompositionError("negative edge fraction");
    row[e.bucket] += e.f;
    col[e.item] += e.f;
  }
  for (std::size_t b = 0; b < nb; ++b) {
    if (row[b] > 1.0 + 1e-9) {
      throw DecompositionError("bucket capacity constraint violated for player " +
                               inst.player_id(g.buckets[b].player));
    }
  }
  for (ItemIdx j = 0; j < ni; ++j) {
    if (col[j] > 1.0 + 1e-9) {
      throw DecompositionError("item constraint violated for item " +
                               inst.item_id(j));
    }
  }

  // Doubly stochastic padding: [[M, diag(1-r)], [diag(1-c), M^T]].
  std::vector<double> w(n * n, 0.0);
  std::vector<std::size_t> edge_at(nb * ni, g.edges.size());
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    const auto& e = g.edges[k];
    w[e.bucket * n + e.item] += e.f;
    w[(nb + e.item) * n + ni + e.bucket] += e.f;
    edge_at[e.bucket * ni + e.item] = k;
  }
  for (std::size_t b = 0; b < nb; ++b) w[b * n + ni + b] = std::max(0.0, 1.0 - row[b]);
  for (ItemIdx j = 0; j < ni; ++j) w[(nb + j) * n + j] = std::max(0.0, 1.0 - col[j]);
  for (double& v : w) {
    if (v <= kZero) v = 0.0;
  }

  std::map<std::vector<std::size_t>, double> merged;
  PerfectMatcher matcher(n);
  double peeled = 0.0;
  while (1.0 - peeled > kMassTol) {
    const auto pm = matcher.run(w);
    if (pm.empty()) {
      if (1.0 - peeled > 1e-9) {
        throw DecompositionError(
            "fractional point lies outside the matching polytope");
      }
      break;
    }
    double theta = INFINITY;
    for (std::size_t r = 0; r < n; ++r) theta = std::min(theta, w[r * n + pm[r]]);
    std::vector<std::size_t> edges;
    for (std::size_t b = 0; b < nb; ++b) {
      if (pm[b] < ni) edges.push_back(edge_at[b * ni + pm[b]]);
    }
    std::sort(edges.begin(), edges.end());
    merged[edges] += theta;
    peeled += theta;
    for (std::size_t r = 0; r < n; ++r) {
      double& v = w[r * n + pm[r]];
      v -= theta;
      if (v <= kZero) v = 0.0;
    }
  }

  MatchingDistribution dist;
  dist.graph = g;
  for (auto& [edges, lambda] : merged) {
    dist.matchings.push_back({edges, lambda / peeled});
  }
  reduce_support(dist.matchings, g.edges.size());
  // Empty matching last keeps sampling order stable.
  std::stable_partition(dist.matchings.begin(), dist.matchings.end(),
                        [](const Matching& m) { return !m.edges.empty(); });
  dist.matchings.erase(
      std::remove_if(dist.matchings.begin(), dist.matchings.end(),
                     [](const Matching& m) { return m.lambda <= 0.0; }),
      dist.matchings.end());
  return dist;
}

std::vector<double> edge_marginals(const MatchingDistribution& dist) {
  std::vector<double> out(dist.graph.edges.size(), 0.0);
  for (const auto& m : dist.matchings) {
    for (std::size_t e : m.edges) out[e] += m.lambda;
  }
  return out;
}

namespace {

void matching_values(const MatchingDistribution& dist, const Matching& m,
                     std::vector<double>& all, std::vector<double>& real) {
  const BucketGraph& g = dist.graph;
  std::fill(all.begin(), all.end(), 0.0);
  std::fill(real.begin(), real.end(), 0.0);
  for (std::size_t e : m.edges) {
    const auto& edge = g.edges[e];
    const PlayerIdx i = g.buckets[edge.bucket].player;
    const double p = g.inst().price(i, edge.item);
    all[i] += p;
    if (g.origin[edge.item] == ItemOrigin::Real) real[i] += p;
  }
}

}  // namespace

ExpectedValue exact_expected_value(const MatchingDistribution& dist) {
  const Instance& inst = dist.graph.inst();
  const std::size_t n = inst.num_players();
  ExpectedValue ev;
  ev.per_player.assign(n, 0.0);
  ev.real_per_player.assign(n, 0.0);
  std::vector<double> all(n), real(n);
  for (const auto& m : dist.matchings) {
    matching_values(dist, m, all, real);
    for (PlayerIdx i = 0; i < n; ++i) {
      ev.per_player[i] += m.lambda * std::min(inst.budget(i), all[i]);
      ev.real_per_player[i] += m.lambda * std::min(inst.budget(i), real[i]);
    }
  }
  for (PlayerIdx i = 0; i < n; ++i) {
    ev.total += ev.per_player[i];
    ev.real_total += ev.real_per_player[i];
  }
  return ev;
}

SampledAllocation sample_allocation(const MatchingDistribution& dist,
                                    std::uint64_t seed) {
  const BucketGraph& g = dist.graph;
  if (dist.matchings.empty()) throw DecompositionError("empty distribution");
  Rng rng(seed);
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t pick = dist.matchings.size() - 1;
  for (std::size_t k = 0; k < dist.matchings.size(); ++k) {
    acc += dist.matchings[k].lambda;
    if (u < acc) {
      pick = k;
      break;
    }
  }
  SampledAllocation out;
  out.matching = pick;
  std::vector<std::optional<PlayerIdx>> owner(g.inst().num_items());
  for (std::size_t e : dist.matchings[pick].edges) {
    const auto& edge = g.edges[e];
    const PlayerIdx i = g.buckets[edge.bucket].player;
    if (g.origin[edge.item] == ItemOrigin::Fake) {
      out.fake_assignments.emplace_back(edge.item, i);
    } else {
      owner[edge.item] = i;
    }
  }
  out.allocation = make_allocation(g.inst(), std::move(owner));
  return out;
}

std::string bucket_graph_dot(const BucketGraph& g) {
  const Instance& inst = g.inst();
  std::ostringstream out;
  out << "graph buckets {\n";
  for (std::size_t b = 0; b < g.buckets.size(); ++b) {
    out << "  \"" << inst.player_id(g.buckets[b].player) << '#'
        << g.buckets[b].index + 1 << "\" [shape=box];\n";
  }
  for (const auto& e : g.edges) {
    const Bucket& b = g.buckets[e.bucket];
    out << "  \"" << inst.item_id(e.item) << "\" -- \"" << inst.player_id(b.player)
        << '#' << b.index + 1 << "\" [label=\"" << num(e.f) << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

std::string distribution_csv(const MatchingDistribution& dist) {
  const Instance& inst = dist.graph.inst();
  const std::size_t n = inst.num_players();
  std::ostringstream out;
  out << "matching,lambda";
  for (PlayerIdx i = 0; i < n; ++i) out << ",value_" << inst.player_id(i);
  out << '\n';
  std::vector<double> all(n), real(n);
  for (std::size_t k = 0; k < dist.matchings.size(); ++k) {
    matching_values(dist, dist.matchings[k], all, real);
    out << k << ',' << num(dist.matchings[k].lambda);
    for (PlayerIdx i = 0; i < n; ++i) {
      out << ',' << num(std::min(inst.budget(i), all[i]));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace mba

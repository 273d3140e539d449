#include "mba/fixtures.hpp"

#include <algorithm>
#include <cmath>

#include "mba/error.hpp"
#include "mba/random.hpp"
#include "mba/transforms.hpp"

namespace mba {

namespace {

struct Entry {
  std::string player, item;
  double x;
};

AssignmentSolution build(const InstanceSpec& spec, const std::vector<Entry>& xs) {
  auto inst = std::make_shared<const Instance>(spec);
  AssignmentSolution sol = make_zero_solution(inst);
  for (const Entry& e : xs) {
    sol.at(*inst->find_player(e.player), *inst->find_item(e.item)) = e.x;
  }
  return sol;
}

// Scales rows and columns of a positive matrix toward the given sums.
void sinkhorn(std::vector<std::vector<double>>& a, const std::vector<double>& rows,
              const std::vector<double>& cols) {
  for (int it = 0; it < 5000; ++it) {
    for (std::size_t r = 0; r < a.size(); ++r) {
      double s = 0.0;
      for (double v : a[r]) s += v;
      for (double& v : a[r]) v *= rows[r] / s;
    }
    double err = 0.0;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      double s = 0.0;
      for (const auto& row : a) s += row[c];
      err = std::max(err, std::fabs(s - cols[c]));
      for (auto& row : a) row[c] *= cols[c] / s;
    }
    if (err < 1e-15) break;
  }
}

}  // namespace

AssignmentSolution level_fixture(std::uint64_t seed, std::size_t levels,
                                 std::size_t players_per_level) {
  if (levels == 0 || players_per_level == 0 || players_per_level % 2) {
    throw Error("level fixture needs levels >= 1 and an even player count");
  }
  Rng rng(seed);
  const std::size_t n = players_per_level;
  InstanceSpec spec;
  std::vector<Entry> xs;
  auto pid = [](std::size_t l, std::size_t k) {
    return "p" + std::to_string(l) + "_" + std::to_string(k);
  };
  for (std::size_t l = 0; l < levels; ++l) {
    for (std::size_t k = 0; k < n; ++k) spec.players.push_back({pid(l, k), std::ldexp(1.0, l)});
  }
  // Item level t = -1 .. levels-1, stored as t + 1.
  for (std::size_t t1 = 0; t1 <= levels; ++t1) {
    const bool has_big = t1 >= 1;
    const bool has_small = t1 < levels;
    const std::size_t count = (has_big ? n / 2 : 0) + (has_small ? n : 0);
    const double price = std::ldexp(1.0, static_cast<int>(t1) - 1);
    std::vector<std::string> ids;
    for (std::size_t k = 0; k < count; ++k) {
      ids.push_back((t1 == 0 ? "s" : "j" + std::to_string(t1 - 1) + "_") + std::to_string(k));
      spec.items.push_back(ids.back());
    }
    std::vector<double> share(count, has_big ? 1.0 : 0.0);
    if (has_big && has_small) {
      const double target = static_cast<double>(n) / 2.0;
      for (double& c : share) c = rng.uniform(0.15, 0.85);
      for (int it = 0; it < 200; ++it) {
        double s = 0.0;
        for (double c : share) s += c;
        const double d = (target - s) / static_cast<double>(count);
        for (double& c : share) c = std::clamp(c + d, 0.1, 0.9);
      }
    }
    auto fill = [&](std::size_t level, double row_sum, bool big) {
      std::vector<std::vector<double>> a(n, std::vector<double>(count));
      for (auto& row : a) {
        for (double& v : row) v = rng.uniform(0.5, 1.5);
      }
      std::vector<double> cols(count);
      for (std::size_t c = 0; c < count; ++c) cols[c] = big ? share[c] : 1.0 - share[c];
      sinkhorn(a, std::vector<double>(n, row_sum), cols);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < count; ++c) {
          spec.prices.push_back({pid(level, r), ids[c], price});
          xs.push_back({pid(level, r), ids[c], a[r][c]});
        }
      }
    };
    if (has_big) fill(t1 - 1, 0.5, true);
    if (has_small) fill(t1, 1.0, false);
  }
  return build(spec, xs);
}

AssignmentSolution saturated_fixture(std::uint64_t seed, double mu) {
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    Rng rng(derive_seed(seed, attempt));
    const std::size_t n = 2 + rng.below(3), m = 3 + rng.below(4);
    InstanceSpec spec;
    std::vector<Entry> xs;
    std::vector<double> val(n, 0.0);
    for (std::size_t j = 0; j < m; ++j) spec.items.push_back("j" + std::to_string(j + 1));
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<std::size_t> holders;
      for (std::size_t i = 0; i < n; ++i) {
        if (rng.bernoulli(0.8)) holders.push_back(i);
      }
      if (holders.empty()) holders.push_back(rng.below(n));
      std::vector<double> wgt;
      double total = 0.0;
      for (std::size_t k = 0; k < holders.size(); ++k) {
        wgt.push_back(rng.uniform(0.1, 1.0));
        total += wgt.back();
      }
      const double mass = rng.uniform(0.5, 1.0);
      for (std::size_t k = 0; k < holders.size(); ++k) {
        const std::size_t i = holders[k];
        const double p = rng.uniform(0.2, 1.0);
        const double x = mass * wgt[k] / total;
        spec.prices.push_back({"p" + std::to_string(i + 1), spec.items[j], p});
        xs.push_back({"p" + std::to_string(i + 1), spec.items[j], x});
        val[i] += p * x;
      }
    }
    if (std::find(val.begin(), val.end(), 0.0) != val.end()) continue;
    for (std::size_t i = 0; i < n; ++i) spec.players.push_back({"p" + std::to_string(i + 1), val[i]});
    AssignmentSolution sol = build(spec, xs);
    if (!find_unequally_priced(sol, mu).items.empty()) return sol;
  }
  throw Error("no saturated fixture with unequal prices found");
}

AssignmentSolution canonical_player_fixture(std::uint64_t seed, bool half_small) {
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    Rng rng(derive_seed(seed, attempt));
    const double B = rng.uniform(1.0, 3.0);
    InstanceSpec spec;
    spec.players.push_back({"p", B});
    std::vector<Entry> xs;
    const std::size_t nb = 1 + rng.below(3), ns = 3 + rng.below(4);
    std::vector<double> w(nb);
    double total = 0.0;
    for (double& v : w) total += (v = rng.uniform(0.2, 1.0));
    for (std::size_t k = 0; k < nb; ++k) {
      const std::string id = "b" + std::to_string(k + 1);
      spec.items.push_back(id);
      spec.prices.push_back({"p", id, B});
      xs.push_back({"p", id, 0.5 * w[k] / total});
    }
    std::vector<double> p(ns), ws(ns);
    double weighted = 0.0;
    for (std::size_t k = 0; k < ns; ++k) {
      p[k] = B * rng.uniform(0.1, half_small ? 0.5 : 0.6);
      ws[k] = rng.uniform(0.2, 1.0);
      weighted += ws[k] * p[k];
    }
    const double scale = B / 2.0 / weighted;
    bool ok = true;
    for (std::size_t k = 0; k < ns; ++k) ok = ok && ws[k] * scale <= 1.0;
    if (!ok) continue;
    for (std::size_t k = 0; k < ns; ++k) {
      const std::string id = "s" + std::to_string(k + 1);
      spec.items.push_back(id);
      spec.prices.push_back({"p", id, p[k]});
      xs.push_back({"p", id, ws[k] * scale});
    }
    return build(spec, xs);
  }
  throw Error("no canonical player fixture found");
}

AssignmentSolution branch_fixture(int step, std::uint64_t seed) {
  InstanceSpec spec;
  switch (step) {
    case 1:
      // Player a uses half its budget.
      spec.players = {{"a", 1.0}, {"b", 1.0}};
      spec.items = {"a1", "b1"};
      spec.prices = {{"a", "a1", 0.5}, {"b", "b1", 1.0}};
      return build(spec, {{"a", "a1", 1.0}, {"b", "b1", 1.0}});
    case 2:
      // Saturated players sharing h at two prices, each with a private item.
      spec.players = {{"u", 1.0}, {"v", 0.5}};
      spec.items = {"h", "a", "b"};
      spec.prices = {{"u", "h", 1.0}, {"v", "h", 0.5}, {"u", "a", 0.5}, {"v", "b", 0.25}};
      return build(spec, {{"u", "h", 0.5}, {"v", "h", 0.5}, {"u", "a", 1.0}, {"v", "b", 1.0}});
    case 4:
      // Canonical, with all small value priced at 0.6 B.
      spec.players = {{"p", 1.0}};
      spec.items = {"g", "s"};
      spec.prices = {{"p", "g", 1.0}, {"p", "s", 0.6}};
      return build(spec, {{"p", "g", 0.5}, {"p", "s", 0.5 / 0.6}});
    case 5:
      // Canonical, every item half assigned.
      spec.players = {{"p", 1.0}};
      spec.items = {"g", "s1", "s2"};
      spec.prices = {{"p", "g", 1.0}, {"p", "s1", 0.5}, {"p", "s2", 0.5}};
      return build(spec, {{"p", "g", 0.5}, {"p", "s1", 0.5}, {"p", "s2", 0.5}});
    case 6:
      return level_fixture(seed, 2, 2);
    default:
      throw Error("no branch fixture for step " + std::to_string(step));
  }
}

}  // namespace mba

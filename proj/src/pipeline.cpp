#include "mba/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "mba/analysis.hpp"
#include "mba/error.hpp"
#include "mba/random.hpp"
#include "mba/st_rounding.hpp"
#include "mba/transforms.hpp"

namespace mba {

// ---------------------------------------------------------------- config

namespace {

struct Field {
  const char* key;
  double ConstantsConfig::*ptr;
};

constexpr Field kFields[] = {
    {"eps", &ConstantsConfig::eps},       {"eps1", &ConstantsConfig::eps1},
    {"eps2", &ConstantsConfig::eps2},     {"eps3", &ConstantsConfig::eps3},
    {"eps4", &ConstantsConfig::eps4},     {"eps5", &ConstantsConfig::eps5},
    {"eps6", &ConstantsConfig::eps6},     {"mu", &ConstantsConfig::mu},
    {"nu", &ConstantsConfig::nu},         {"delta", &ConstantsConfig::delta},
    {"lambda", &ConstantsConfig::lambda}, {"beta", &ConstantsConfig::beta},
    {"config_accuracy", &ConstantsConfig::config_accuracy},
};

double parse_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw PipelineError("value for " + key + " is not a number: " + text);
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw PipelineError("value for " + key + " is not a boolean: " + text);
}

}  // namespace

std::vector<std::string> validate_config(const ConstantsConfig& cfg) {
  std::vector<std::string> out;
  for (const Field& f : kFields) {
    const double v = cfg.*f.ptr;
    if (!(v > 0.0 && v < 1.0)) out.push_back(std::string(f.key) + " must lie in (0, 1)");
  }
  if (cfg.beta > 1.0 / 3.0) out.push_back("beta must be at most 1/3");
  if (cfg.beta < cfg.delta / 4.0) out.push_back("beta must be at least delta/4");
  if (cfg.mu >= 0.5 || cfg.nu >= 0.5) out.push_back("mu and nu must be below 1/2");
  if (cfg.start != "assignment" && cfg.start != "configuration") {
    out.push_back("start must be assignment or configuration");
  }
  return out;
}

nlohmann::json constants_to_json(const ConstantsConfig& cfg) {
  nlohmann::json j;
  for (const Field& f : kFields) j[f.key] = cfg.*f.ptr;
  j["start"] = cfg.start;
  j["best_of_plain_st"] = cfg.best_of_plain_st;
  return j;
}

ConstantsConfig constants_from_json(const nlohmann::json& j,
                                    ConstantsConfig base) {
  if (!j.is_object()) throw PipelineError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const Field& f : kFields) {
      if (key == f.key) {
        if (!value.is_number()) throw PipelineError(key + " must be a number");
        base.*f.ptr = value.get<double>();
        known = true;
      }
    }
    if (key == "start") {
      if (!value.is_string()) throw PipelineError("start must be a string");
      base.start = value.get<std::string>();
      known = true;
    } else if (key == "best_of_plain_st") {
      if (!value.is_boolean()) throw PipelineError(key + " must be a boolean");
      base.best_of_plain_st = value.get<bool>();
      known = true;
    }
    if (!known) throw PipelineError("unknown config key " + key);
  }
  return base;
}

void apply_override(ConstantsConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw PipelineError("override must look like key=value: " + assignment);
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  for (const Field& f : kFields) {
    if (key == f.key) {
      cfg.*f.ptr = parse_double(key, text);
      return;
    }
  }
  if (key == "start") {
    cfg.start = text;
  } else if (key == "best_of_plain_st") {
    cfg.best_of_plain_st = parse_bool(key, text);
  } else {
    throw PipelineError("unknown config key " + key);
  }
}

// --------------------------------------------------------------- rounders

AllocationDistribution st_rounder(const AssignmentSolution& sol) {
  const MatchingDistribution dist = decompose_matchings(build_bucket_graph(sol));
  const BucketGraph& g = dist.graph;
  AllocationDistribution out;
  for (const Matching& m : dist.matchings) {
    WeightedAllocation wa;
    wa.prob = m.lambda;
    wa.owner.assign(sol.inst().num_items(), std::nullopt);
    for (std::size_t e : m.edges) {
      wa.owner[g.edges[e].item] = g.buckets[g.edges[e].bucket].player;
    }
    out.push_back(std::move(wa));
  }
  return out;
}

// ---------------------------------------------------------------- working

namespace {

// Mutable copy of the instance and solution. Real items keep their
// original index; fake items are appended.
class Working {
 public:
  struct Column {
    std::string id;
    ItemOrigin origin = ItemOrigin::Real;
    std::vector<double> price;
    std::vector<bool> present;
    std::vector<double> x;
    std::vector<double> ref_price;
  };

  Working(const AssignmentSolution& start, double beta)
      : orig_(start.inst()), beta_(beta) {
    const std::size_t n = orig_.num_players();
    budget_ = orig_.budgets();
    active_.assign(n, true);
    for (ItemIdx j = 0; j < orig_.num_items(); ++j) {
      Column c;
      c.id = orig_.item_id(j);
      c.price.assign(n, 0.0);
      c.present.assign(n, false);
      c.x.assign(n, 0.0);
      for (PlayerIdx i : orig_.players_of(j)) {
        c.price[i] = orig_.price(i, j);
        c.present[i] = true;
        c.x[i] = start.get(i, j);
      }
      c.ref_price = c.price;
      cols_.push_back(std::move(c));
    }
    for (PlayerIdx i = 0; i < n; ++i) {
      if (start.assigned_value(i) <= 0.0) active_[i] = false;
    }
  }

  std::size_t n() const { return budget_.size(); }
  std::size_t m() const { return cols_.size(); }
  double budget(PlayerIdx i) const { return budget_[i]; }
  bool active(PlayerIdx i) const { return active_[i]; }
  Column& col(ItemIdx j) { return cols_[j]; }
  const Column& col(ItemIdx j) const { return cols_[j]; }
  const Instance& original() const { return orig_; }

  bool is_big(PlayerIdx i, ItemIdx j) const {
    return cols_[j].present[i] && cols_[j].price[i] >= (1.0 - beta_) * budget_[i];
  }

  double val(PlayerIdx i) const {
    double v = 0.0;
    for (const Column& c : cols_) v += c.x[i] * c.price[i];
    return v;
  }

  double value() const {
    double v = 0.0;
    for (PlayerIdx i = 0; i < n(); ++i) v += std::min(budget_[i], val(i));
    return v;
  }

  double real_value() const {
    double v = 0.0;
    for (PlayerIdx i = 0; i < n(); ++i) {
      double s = 0.0;
      for (ItemIdx j = 0; j < orig_.num_items(); ++j) {
        s += cols_[j].x[i] * orig_.price(i, j);
      }
      v += std::min(orig_.budget(i), s);
    }
    return v;
  }

  double big_mass(PlayerIdx i) const {
    double b = 0.0;
    for (ItemIdx j = 0; j < m(); ++j) {
      if (is_big(i, j)) b += cols_[j].x[i];
    }
    return b;
  }

  double small_value(PlayerIdx i) const {
    double s = 0.0;
    for (ItemIdx j = 0; j < m(); ++j) {
      if (cols_[j].present[i] && !is_big(i, j)) s += cols_[j].x[i] * cols_[j].price[i];
    }
    return s;
  }

  double item_mass(ItemIdx j) const {
    double s = 0.0;
    for (double v : cols_[j].x) s += v;
    return s;
  }

  double item_value(ItemIdx j) const {
    double s = 0.0;
    for (PlayerIdx i = 0; i < n(); ++i) s += cols_[j].x[i] * cols_[j].price[i];
    return s;
  }

  void remove_player(PlayerIdx i) {
    active_[i] = false;
    for (Column& c : cols_) c.x[i] = 0.0;
  }

  void remove_item(ItemIdx j) {
    std::fill(cols_[j].x.begin(), cols_[j].x.end(), 0.0);
  }

  // Budgets drop to the assigned value; players left with nothing leave.
  void lower_budgets() {
    for (PlayerIdx i = 0; i < n(); ++i) {
      if (!active_[i]) continue;
      const double v = val(i);
      if (v > 0.0) {
        budget_[i] = std::min(budget_[i], v);
      } else {
        remove_player(i);
      }
    }
  }

  void snapshot_reference_prices() {
    for (Column& c : cols_) c.ref_price = c.price;
  }

  FakeItem add_fake(PlayerIdx i, double price, double x, bool big, int step) {
    Column c;
    std::string id = "~fake" + std::to_string(++fake_count_);
    while (orig_.find_item(id)) id = "~" + id;
    c.id = id;
    c.origin = ItemOrigin::Fake;
    c.price.assign(n(), 0.0);
    c.present.assign(n(), false);
    c.x.assign(n(), 0.0);
    c.price[i] = price;
    c.present[i] = true;
    c.x[i] = x;
    c.ref_price = c.price;
    cols_.push_back(std::move(c));
    return {id, orig_.player_id(i), price, x, big, step};
  }

  AssignmentSolution materialize() const {
    InstanceSpec spec;
    spec.beta = beta_;
    for (PlayerIdx i = 0; i < n(); ++i) {
      spec.players.push_back({orig_.player_id(i), budget_[i]});
    }
    for (const Column& c : cols_) {
      spec.items.push_back(c.id);
      for (PlayerIdx i = 0; i < n(); ++i) {
        if (c.present[i]) spec.prices.push_back({orig_.player_id(i), c.id, c.price[i]});
      }
    }
    AssignmentSolution sol = make_zero_solution(std::make_shared<const Instance>(spec));
    for (ItemIdx j = 0; j < m(); ++j) {
      sol.origin[j] = cols_[j].origin;
      for (PlayerIdx i = 0; i < n(); ++i) sol.at(i, j) = cols_[j].x[i];
    }
    return sol;
  }

  void absorb(const AssignmentSolution& sol) {
    for (ItemIdx j = 0; j < m(); ++j) {
      for (PlayerIdx i = 0; i < n(); ++i) cols_[j].x[i] = sol.get(i, j);
    }
  }

 private:
  const Instance& orig_;
  double beta_;
  std::vector<double> budget_;
  std::vector<bool> active_;
  std::vector<Column> cols_;
  int fake_count_ = 0;
};

// Restores b_i = 1/2 and S_i = B_i/2 with fake items; returns them.
std::vector<FakeItem> refill_canonical(Working& w, int step) {
  std::vector<FakeItem> out;
  for (PlayerIdx i = 0; i < w.n(); ++i) {
    if (!w.active(i)) continue;
    const double B = w.budget(i);
    const double b = w.big_mass(i);
    if (b < 0.5 - 1e-12) out.push_back(w.add_fake(i, B, 0.5 - b, true, step));
    double rest = B / 2.0 - w.small_value(i);
    while (rest > 1e-12 * B) {
      const double p = std::min(B / 2.0, 2.0 * rest);
      out.push_back(w.add_fake(i, p, 0.5, false, step));
      rest -= p / 2.0;
    }
  }
  return out;
}

double sum_bound_alpha(const AssignmentSolution& sol) {
  double s = 0.0;
  for (PlayerIdx i = 0; i < sol.inst().num_players(); ++i) {
    s += bound_alpha(sol.inst().budget(i), sol.assigned_value(i) / sol.inst().budget(i));
  }
  return s;
}

struct Outcome {
  double expected_working = 0.0;
  double expected_real = 0.0;
  std::vector<std::optional<PlayerIdx>> owner;  // original items
};

// Exact expectations of a rounder's distribution plus one sampled draw,
// mapped back to the original instance with fake items dropped.
Outcome evaluate(const Rounder& rounder, const AssignmentSolution& sol,
                 const Instance& orig, std::uint64_t seed) {
  const AllocationDistribution dist = rounder(sol);
  if (dist.empty()) throw PipelineError("rounder returned an empty distribution");
  Outcome out;
  double total = 0.0;
  std::vector<std::vector<std::optional<PlayerIdx>>> real(dist.size());
  for (std::size_t k = 0; k < dist.size(); ++k) {
    const auto& wa = dist[k];
    if (wa.owner.size() != sol.inst().num_items()) {
      throw PipelineError("rounder returned an allocation of the wrong size");
    }
    total += wa.prob;
    out.expected_working += wa.prob * allocation_value(sol.inst(), wa.owner);
    real[k].assign(wa.owner.begin(), wa.owner.begin() + orig.num_items());
    out.expected_real += wa.prob * allocation_value(orig, real[k]);
  }
  if (std::fabs(total - 1.0) > 1e-9) {
    throw PipelineError("rounder probabilities do not sum to 1");
  }
  Rng rng(seed);
  const double u = rng.uniform() * total;
  double acc = 0.0;
  std::size_t pick = dist.size() - 1;
  for (std::size_t k = 0; k < dist.size(); ++k) {
    acc += dist[k].prob;
    if (u < acc) {
      pick = k;
      break;
    }
  }
  out.owner = std::move(real[pick]);
  return out;
}

class Runner {
 public:
  Runner(const AssignmentSolution& start, const ConstantsConfig& cfg,
         std::uint64_t seed, const PipelineSlots& slots)
      : start_(start), cfg_(cfg), seed_(seed), slots_(slots), w_(start, cfg.beta) {}

  PipelineResult run() {
    rep_.seed = seed_;
    rep_.opt = start_.objective();
    const std::vector<bool (Runner::*)()> steps = {
        &Runner::step1, &Runner::step2, &Runner::step3, &Runner::step4,
        &Runner::step5, &Runner::step6};
    bool rounded = false;
    for (auto step : steps) {
      if ((this->*step)()) {
        rounded = true;
        break;
      }
    }
    if (!rounded) step7();
    return finish();
  }

 private:
  StepRecord& begin(int step, const char* name) {
    rep_.steps.push_back({});
    StepRecord& r = rep_.steps.back();
    r.step = step;
    r.name = name;
    r.value_before = w_.value();
    r.real_before = w_.real_value();
    return r;
  }

  void end_trim(StepRecord& r, double cap) {
    r.branch = "trim";
    r.value_after = w_.value();
    r.real_after = w_.real_value();
    r.loss = r.real_before - r.real_after;
    r.loss_cap = cap;
  }

  bool round_now(StepRecord& r, const AssignmentSolution& sol, const Rounder& rounder,
                 const char* rounder_name, Certificate cert) {
    r.branch = "round";
    r.value_after = sol.objective();
    r.real_after = r.real_before;
    rep_.terminal_step = r.step;
    rep_.rounder = rounder_name;
    rep_.certificate = std::move(cert);
    rep_.current_value = sol.objective();
    const Outcome o = evaluate(rounder, sol, w_.original(), derive_seed(seed_, 100));
    rep_.expected_working_value = o.expected_working;
    rep_.expected_real_value = o.expected_real;
    owner_ = o.owner;
    return true;
  }

  bool step1() {
    StepRecord& r = begin(1, "full_budgets");
    const double val = w_.value();
    std::vector<PlayerIdx> low;
    double low_value = 0.0;
    for (PlayerIdx i = 0; i < w_.n(); ++i) {
      if (!w_.active(i)) continue;
      const double v = w_.val(i);
      if (v <= (1.0 - cfg_.eps) * w_.budget(i)) {
        low.push_back(i);
        low_value += v;
      }
    }
    r.statistic = val > 0.0 ? low_value / val : 0.0;
    r.threshold = cfg_.eps1;
    if (val > 0.0 && low_value >= cfg_.eps1 * val) {
      const AssignmentSolution sol = w_.materialize();
      double cert = 0.0;
      for (PlayerIdx i = 0; i < w_.n(); ++i) {
        const double v = w_.val(i);
        const bool is_low = std::find(low.begin(), low.end(), i) != low.end();
        cert += is_low ? (3.0 + cfg_.eps / 5.0) / 4.0 * v
                       : bound_alpha(w_.budget(i), v / w_.budget(i));
      }
      return round_now(r, sol, st_rounder, "st", {"not_fully_assigned", "proved", cert});
    }
    for (PlayerIdx i : low) w_.remove_player(i);
    r.players_removed = low.size();
    w_.lower_budgets();
    end_trim(r, cfg_.eps1);
    return false;
  }

  bool step2() {
    StepRecord& r = begin(2, "unique_prices");
    const AssignmentSolution sol = w_.materialize();
    NubpOptions opts;
    for (PlayerIdx i = 0; i < w_.n(); ++i) opts.active.push_back(w_.active(i));
    const UnequalPriceReport rep = find_unequally_priced(sol, cfg_.mu, opts);
    const double val = w_.value();
    double n_value = 0.0;
    for (const auto& it : rep.items) n_value += w_.item_value(it.item);
    r.statistic = val > 0.0 ? n_value / val : 0.0;
    r.threshold = cfg_.eps2;
    if (val > 0.0 && n_value >= cfg_.eps2 * val) {
      const NubpResult nr = apply_nubp(sol, cfg_.mu, opts);
      r.notes.push_back("moved " + std::to_string(nr.trace.moves.size()) +
                        " pair flows");
      return round_now(r, nr.solution, st_rounder, "st",
                       {"unequal_prices", "proved", sum_bound_alpha(nr.solution)});
    }
    const SolutionStats st = compute_stats(sol);
    std::set<ItemIdx> removed;
    for (const auto& it : rep.items) {
      w_.remove_item(it.item);
      removed.insert(it.item);
    }
    for (ItemIdx j = 0; j < w_.m(); ++j) {
      if (removed.count(j)) continue;
      const double wj = st.items[j].w;
      auto& c = w_.col(j);
      for (PlayerIdx i = 0; i < w_.n(); ++i) {
        if (c.x[i] > 0.0 &&
            (c.price[i] < (1.0 - cfg_.mu) * wj || c.price[i] > (1.0 + cfg_.mu) * wj)) {
          c.x[i] = 0.0;
        }
      }
    }
    r.items_removed = removed.size();
    w_.lower_budgets();
    w_.snapshot_reference_prices();
    end_trim(r, cfg_.eps2 + 2.0 * cfg_.mu);
    return false;
  }

  bool step3() {
    StepRecord& r = begin(3, "canonicalize");
    const double val = w_.value();
    const double lo = (1.0 - cfg_.delta) / 2.0, hi = (1.0 + cfg_.delta) / 2.0;
    std::vector<PlayerIdx> ill;
    double ill_value = 0.0;
    for (PlayerIdx i = 0; i < w_.n(); ++i) {
      if (!w_.active(i)) continue;
      const double b = w_.big_mass(i);
      if (b < lo || b > hi) {
        ill.push_back(i);
        ill_value += w_.val(i);
      }
    }
    r.statistic = val > 0.0 ? ill_value / val : 0.0;
    r.threshold = cfg_.eps3;
    if (val > 0.0 && ill_value >= cfg_.eps3 * val) {
      const AssignmentSolution sol = w_.materialize();
      r.notes.push_back("rounded by the non-well-structured slot");
      return round_now(r, sol, slots_.non_well_structured, "non_well_structured_slot",
                       {"non_well_structured", "external", sum_bound_alpha(sol)});
    }
    for (PlayerIdx i : ill) w_.remove_player(i);
    r.players_removed = ill.size();

    double distortion = 0.0;
    for (PlayerIdx i = 0; i < w_.n(); ++i) {
      if (!w_.active(i)) continue;
      const double B = w_.budget(i);
      for (ItemIdx j = 0; j < w_.m(); ++j) {
        auto& c = w_.col(j);
        if (c.x[i] > 0.0 && w_.is_big(i, j) && c.price[i] != B) {
          distortion = std::max(distortion, std::fabs(c.price[i] - B) / B);
          c.price[i] = B;
        }
      }
      const double b = w_.big_mass(i);
      if (b > 0.5) {
        for (ItemIdx j = 0; j < w_.m(); ++j) {
          if (w_.is_big(i, j)) w_.col(j).x[i] *= 0.5 / b;
        }
      }
      const double S = w_.small_value(i);
      if (S > B / 2.0) {
        for (ItemIdx j = 0; j < w_.m(); ++j) {
          if (w_.col(j).present[i] && !w_.is_big(i, j)) w_.col(j).x[i] *= B / 2.0 / S;
        }
      }
      if (b < 0.5 - 1e-12) r.fakes.push_back(w_.add_fake(i, B, 0.5 - b, true, 3));
      if (S < B / 2.0 * (1.0 - 1e-12)) {
        const double p = 2.0 * (B / 2.0 - S);
        if (p > B / 2.0 * (1.0 + 1e-12)) {
          throw PipelineError("fake small item for player " +
                              w_.original().player_id(i) +
                              " would be priced above half the budget");
        }
        r.fakes.push_back(w_.add_fake(i, p, 0.5, false, 3));
      }
    }
    std::ostringstream note;
    note << "largest big-price distortion " << distortion;
    r.notes.push_back(note.str());
    end_trim(r, cfg_.eps3 + cfg_.delta + cfg_.beta);
    return false;
  }

  bool step4() {
    StepRecord& r = begin(4, "valuable_small");
    const double val = w_.value();
    std::vector<PlayerIdx> hit;
    double hit_value = 0.0;
    for (PlayerIdx i = 0; i < w_.n(); ++i) {
      if (!w_.active(i)) continue;
      const double B = w_.budget(i);
      double mass = 0.0;
      for (ItemIdx j = 0; j < w_.m(); ++j) {
        const auto& c = w_.col(j);
        if (c.present[i] && !w_.is_big(i, j) && c.price[i] >= B * (0.5 + cfg_.lambda)) {
          mass += c.x[i];
        }
      }
      if (mass >= cfg_.eps4) {
        hit.push_back(i);
        hit_value += w_.val(i);
      }
    }
    r.statistic = val > 0.0 ? hit_value / val : 0.0;
    r.threshold = cfg_.eps4;
    if (val > 0.0 && hit_value >= cfg_.eps4 * val) {
      const AssignmentSolution sol = w_.materialize();
      return round_now(r, sol, st_rounder, "st",
                       {"valuable_small_items", "empirical", sum_bound_alpha(sol)});
    }
    for (PlayerIdx i : hit) w_.remove_player(i);
    r.players_removed = hit.size();
    for (PlayerIdx i = 0; i < w_.n(); ++i) {
      if (!w_.active(i)) continue;
      const double B = w_.budget(i);
      for (ItemIdx j = 0; j < w_.m(); ++j) {
        auto& c = w_.col(j);
        if (c.x[i] > 0.0 && !w_.is_big(i, j) && c.price[i] > B / 2.0) c.price[i] = B / 2.0;
      }
    }
    r.fakes = refill_canonical(w_, 4);
    end_trim(r, cfg_.eps4);
    return false;
  }

  bool step5() {
    StepRecord& r = begin(5, "fully_assigned");
    const double val = w_.value();
    std::vector<ItemIdx> low;
    double low_value = 0.0;
    for (ItemIdx j = 0; j < w_.m(); ++j) {
      if (w_.col(j).origin != ItemOrigin::Real) continue;
      const double xj = w_.item_mass(j);
      if (xj > 0.0 && xj < 0.9) {
        low.push_back(j);
        low_value += w_.item_value(j);
      }
    }
    r.statistic = val > 0.0 ? low_value / val : 0.0;
    r.threshold = cfg_.eps5;
    if (val > 0.0 && low_value >= cfg_.eps5 * val) {
      double excess = 0.0;
      for (ItemIdx j : low) {
        const double xj = w_.item_mass(j);
        for (double& v : w_.col(j).x) v /= xj;
      }
      for (PlayerIdx i = 0; i < w_.n(); ++i) {
        excess = std::max(excess, w_.val(i) / w_.budget(i) - 1.0);
      }
      std::ostringstream note;
      note << "scaled " << low.size() << " items to full mass; largest alpha excess "
           << excess;
      r.notes.push_back(note.str());
      const AssignmentSolution sol = w_.materialize();
      return round_now(r, sol, st_rounder, "st",
                       {"not_fully_assigned_items", "proved", sum_bound_alpha(sol)});
    }
    for (ItemIdx j : low) w_.remove_item(j);
    r.items_removed = low.size();
    r.fakes = refill_canonical(w_, 5);
    end_trim(r, cfg_.eps5);
    return false;
  }

  bool step6() {
    StepRecord& r = begin(6, "big_small");
    const AssignmentSolution sol = w_.materialize();
    const double val = w_.value();
    std::set<ItemIdx> mset;
    double m_value = 0.0;
    for (ItemIdx j : find_big_small(sol, cfg_.nu)) {
      if (sol.is_fake(j)) continue;
      mset.insert(j);
      m_value += w_.item_value(j);
    }
    r.statistic = val > 0.0 ? m_value / val : 0.0;
    r.threshold = cfg_.eps6;
    if (val > 0.0 && m_value >= cfg_.eps6 * val) {
      const Partition part = sample_partition(w_.n(), derive_seed(seed_, 6));
      NupOptions opts;
      opts.require_unique_prices = false;
      const NupResult pre = nup_preprocess(sol, part, opts);
      const NupResult main = nup_main(pre.solution, part, mset, cfg_.nu);
      for (const auto& warn : main.trace.warnings) r.notes.push_back(warn);
      const AssignmentSolution& x2 = main.solution;
      const SolutionStats st = compute_stats(x2);
      double cert = 0.0;
      for (PlayerIdx i = 0; i < w_.n(); ++i) {
        const double B = w_.budget(i);
        const auto bs = bound_big_small(B, st.players[i].b, st.players[i].S);
        cert += w_.active(i) && bs ? *bs : bound_alpha(B, st.players[i].alpha);
      }
      return round_now(r, x2, st_rounder, "st", {"big_small_items", "proved", cert});
    }
    for (ItemIdx j : mset) w_.remove_item(j);
    r.items_removed = mset.size();
    const SolutionStats st = compute_stats(sol);
    for (ItemIdx j = 0; j < w_.m(); ++j) {
      if (w_.col(j).origin != ItemOrigin::Real || mset.count(j)) continue;
      const bool keep_big = st.items[j].xB >= st.items[j].xS;
      for (PlayerIdx i = 0; i < w_.n(); ++i) {
        if (w_.col(j).x[i] > 0.0 && w_.is_big(i, j) != keep_big) w_.col(j).x[i] = 0.0;
      }
    }
    r.fakes = refill_canonical(w_, 6);
    end_trim(r, cfg_.eps6 + 2.0 * cfg_.nu);
    return false;
  }

  void step7() {
    StepRecord& r = begin(7, "final");
    const AssignmentSolution sol = w_.materialize();
    std::vector<std::string> bad;
    for (const auto& v : is_canonical(sol).violations) bad.push_back(v);
    const double spread = (1.0 + cfg_.mu) / (1.0 - cfg_.mu) * (1.0 + 1e-9);
    const SolutionStats st = compute_stats(sol);
    for (ItemIdx j = 0; j < w_.m(); ++j) {
      const auto& c = w_.col(j);
      double lo = INFINITY, hi = 0.0;
      for (PlayerIdx i = 0; i < w_.n(); ++i) {
        if (c.x[i] <= 0.0) continue;
        lo = std::min(lo, c.ref_price[i]);
        hi = std::max(hi, c.ref_price[i]);
      }
      if (hi > 0.0 && hi > spread * lo) {
        bad.push_back("(c) item " + c.id + " has prices too far apart");
      }
      if (st.items[j].xB > 0.0 && st.items[j].xS > 0.0) {
        bad.push_back("(d) item " + c.id + " is both big and small");
      }
    }
    rep_.condition_violations = bad;
    if (!bad.empty()) {
      std::string msg = "final conditions failed: " + bad.front();
      for (std::size_t k = 1; k < bad.size(); ++k) msg += "; " + bad[k];
      throw PipelineError(msg);
    }
    r.notes.push_back("a +c guarantee needs an external negatively correlated rounder");
    round_now(r, sol, slots_.terminal, "terminal_slot",
              {"terminal", "external", sum_bound_alpha(sol)});
  }

  PipelineResult finish() {
    PipelineResult res;
    const Instance& orig = start_.inst();
    rep_.start = cfg_.start;
    rep_.selected = "pipeline";
    rep_.final_expected_value = rep_.expected_real_value;
    if (cfg_.best_of_plain_st) {
      const Outcome plain = evaluate(st_rounder, start_, orig, derive_seed(seed_, 200));
      rep_.plain_st_expected_value = plain.expected_real;
      if (plain.expected_real > rep_.expected_real_value + 1e-12) {
        rep_.selected = "plain_st";
        rep_.final_expected_value = plain.expected_real;
        owner_ = plain.owner;
      }
    }
    rep_.ratio = rep_.opt > 0.0 ? rep_.final_expected_value / rep_.opt : 1.0;
    res.allocation = make_allocation(orig, owner_);
    rep_.allocation_value = res.allocation.value;
    res.report = std::move(rep_);
    return res;
  }

  const AssignmentSolution& start_;
  const ConstantsConfig& cfg_;
  std::uint64_t seed_;
  const PipelineSlots& slots_;
  Working w_;
  PipelineReport rep_;
  std::vector<std::optional<PlayerIdx>> owner_;
};

}  // namespace

PipelineResult run_pipeline(const AssignmentSolution& start,
                            const ConstantsConfig& cfg, std::uint64_t seed,
                            const PipelineSlots& slots) {
  const auto bad = validate_config(cfg);
  if (!bad.empty()) throw PipelineError("invalid constants: " + bad.front());
  const auto infeasible = check_feasible(start, 1e-9);
  if (!infeasible.empty()) {
    throw PipelineError("starting solution infeasible: " + infeasible.front());
  }
  for (ItemIdx j = 0; j < start.inst().num_items(); ++j) {
    if (start.is_fake(j)) throw PipelineError("starting solution has fake items");
  }
  const AssignmentSolution normalized = normalize_saturation(start);
  Runner runner(normalized, cfg, seed, slots);
  return runner.run();
}

PipelineResult run_pipeline(const Instance& inst, const ConstantsConfig& cfg,
                            std::uint64_t seed, const PipelineSlots& slots) {
  const auto bad = validate_config(cfg);
  if (!bad.empty()) throw PipelineError("invalid constants: " + bad.front());
  auto shared = std::make_shared<const Instance>(inst);
  if (cfg.start == "configuration") {
    try {
      const ConfigSolution y = solve_configuration_lp(shared, cfg.config_accuracy);
      const Projection proj = project_to_assignment(y);
      PipelineResult r = run_pipeline(proj.solution, cfg, seed, slots);
      r.report.start = "configuration";
      return r;
    } catch (const ProjectionError&) {
      PipelineResult r = run_pipeline(solve_assignment_lp(shared), cfg, seed, slots);
      r.report.start = "assignment (projection fallback)";
      return r;
    }
  }
  return run_pipeline(solve_assignment_lp(shared), cfg, seed, slots);
}

std::string branch_path(const PipelineReport& r) {
  std::string s;
  for (const auto& st : r.steps) {
    s += std::to_string(st.step);
    s += st.branch == "round" ? 'r' : 't';
  }
  return s;
}

nlohmann::json report_to_json(const Instance& inst, const PipelineResult& res) {
  using nlohmann::json;
  const PipelineReport& r = res.report;
  json steps = json::array();
  for (const auto& s : r.steps) {
    json fakes = json::array();
    for (const auto& f : s.fakes) {
      fakes.push_back({{"id", f.id}, {"player", f.player}, {"price", f.price},
                       {"x", f.x}, {"kind", f.big ? "big" : "small"}, {"step", f.step}});
    }
    steps.push_back({{"step", s.step},
                     {"name", s.name},
                     {"branch", s.branch},
                     {"statistic", s.statistic},
                     {"threshold", s.threshold},
                     {"value_before", s.value_before},
                     {"value_after", s.value_after},
                     {"real_before", s.real_before},
                     {"real_after", s.real_after},
                     {"loss", s.loss},
                     {"loss_cap", s.loss_cap},
                     {"players_removed", s.players_removed},
                     {"items_removed", s.items_removed},
                     {"fakes", fakes},
                     {"notes", s.notes}});
  }
  return {{"seed", r.seed},
          {"opt", r.opt},
          {"start", r.start},
          {"steps", steps},
          {"branch_path", branch_path(r)},
          {"terminal_step", r.terminal_step},
          {"rounder", r.rounder},
          {"certificate",
           {{"name", r.certificate.name},
            {"kind", r.certificate.kind},
            {"value", r.certificate.value}}},
          {"current_value", r.current_value},
          {"expected_working_value", r.expected_working_value},
          {"expected_real_value", r.expected_real_value},
          {"plain_st_expected_value", r.plain_st_expected_value},
          {"selected", r.selected},
          {"final_expected_value", r.final_expected_value},
          {"ratio", r.ratio},
          {"allocation", allocation_to_json(inst, res.allocation)},
          {"condition_violations", r.condition_violations}};
}

}  // namespace mba

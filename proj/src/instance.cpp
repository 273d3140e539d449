#include "mba/instance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "mba/error.hpp"
#include "mba/random.hpp"

namespace mba {

std::vector<std::string> validate_instance(const InstanceSpec& spec) {
  std::vector<std::string> out;
  if (!(spec.beta > 0.0 && spec.beta <= 1.0 / 3.0)) {
    out.push_back("beta must lie in (0, 1/3]");
  }
  if (spec.players.empty()) out.push_back("instance must declare a player");
  if (spec.items.empty()) out.push_back("instance must declare an item");

  std::set<std::string> players;
  for (const auto& p : spec.players) {
    if (!players.insert(p.id).second) {
      out.push_back("duplicate player id " + p.id);
    }
    if (!(p.budget > 0.0) || !std::isfinite(p.budget)) {
      out.push_back("budget of player " + p.id + " must be positive");
    }
  }
  std::set<std::string> items;
  for (const auto& id : spec.items) {
    if (!items.insert(id).second) out.push_back("duplicate item id " + id);
  }
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& pr : spec.prices) {
    const bool known_player = players.count(pr.player) > 0;
    const bool known_item = items.count(pr.item) > 0;
    if (!known_player) {
      out.push_back("price references undeclared player id " + pr.player);
    }
    if (!known_item) {
      out.push_back("price references undeclared item id " + pr.item);
    }
    if (!(pr.p >= 0.0) || !std::isfinite(pr.p)) {
      out.push_back("price of item " + pr.item + " for player " + pr.player +
                    " must be nonnegative");
    }
    if (known_player && known_item &&
        !pairs.insert({pr.player, pr.item}).second) {
      out.push_back("duplicate price for player " + pr.player + " and item " +
                    pr.item);
    }
  }
  return out;
}

Instance::Instance(const InstanceSpec& spec) : beta_(spec.beta) {
  const auto violations = validate_instance(spec);
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << "invalid instance:";
    for (const auto& v : violations) msg << "\n  " << v;
    throw InstanceError(msg.str());
  }
  for (const auto& p : spec.players) {
    player_index_.emplace(p.id, player_ids_.size());
    player_ids_.push_back(p.id);
    budgets_.push_back(p.budget);
  }
  for (const auto& id : spec.items) {
    item_index_.emplace(id, item_ids_.size());
    item_ids_.push_back(id);
  }
  const std::size_t n = num_players(), m = num_items();
  prices_.assign(n * m, 0.0);
  present_.assign(n * m, false);
  for (const auto& pr : spec.prices) {
    const std::size_t k = player_index_.at(pr.player) * m + item_index_.at(pr.item);
    prices_[k] = pr.p;
    present_[k] = true;
  }
  items_of_.resize(n);
  players_of_.resize(m);
  for (PlayerIdx i = 0; i < n; ++i) {
    for (ItemIdx j = 0; j < m; ++j) {
      if (has_price(i, j)) {
        items_of_[i].push_back(j);
        players_of_[j].push_back(i);
      }
    }
  }
}

std::optional<PlayerIdx> Instance::find_player(std::string_view id) const {
  auto it = player_index_.find(std::string(id));
  if (it == player_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<ItemIdx> Instance::find_item(std::string_view id) const {
  auto it = item_index_.find(std::string(id));
  if (it == item_index_.end()) return std::nullopt;
  return it->second;
}

ItemClass Instance::classify(PlayerIdx i, ItemIdx j) const {
  if (!has_price(i, j)) {
    throw InstanceError("item not assignable to player: item " + item_id(j) +
                        ", player " + player_id(i));
  }
  // Exact comparison: the threshold is raw data.
  return price(i, j) >= (1.0 - beta_) * budget(i) ? ItemClass::Big
                                                   : ItemClass::Small;
}

InstanceSpec Instance::to_spec() const {
  InstanceSpec spec;
  spec.beta = beta_;
  for (PlayerIdx i = 0; i < num_players(); ++i) {
    spec.players.push_back({player_ids_[i], budgets_[i]});
  }
  spec.items = item_ids_;
  for (PlayerIdx i = 0; i < num_players(); ++i) {
    for (ItemIdx j : items_of_[i]) {
      spec.prices.push_back({player_ids_[i], item_ids_[j], price(i, j)});
    }
  }
  return spec;
}

ItemClass classify_item(const Instance& inst, PlayerIdx i, ItemIdx j) {
  return inst.classify(i, j);
}

const char* to_string(ItemClass c) {
  return c == ItemClass::Big ? "big" : "small";
}

double allocation_value(const Instance& inst,
                        const std::vector<std::optional<PlayerIdx>>& owner) {
  if (owner.size() != inst.num_items()) {
    throw InstanceError("allocation size does not match item count");
  }
  std::vector<double> received(inst.num_players(), 0.0);
  for (ItemIdx j = 0; j < owner.size(); ++j) {
    if (!owner[j]) continue;
    const PlayerIdx i = *owner[j];
    if (i >= inst.num_players() || !inst.has_price(i, j)) {
      throw InstanceError("item " + inst.item_id(j) +
                          " allocated to a player without a price for it");
    }
    received[i] += inst.price(i, j);
  }
  double value = 0.0;
  for (PlayerIdx i = 0; i < inst.num_players(); ++i) {
    value += std::min(inst.budget(i), received[i]);
  }
  return value;
}

Allocation make_allocation(const Instance& inst,
                           std::vector<std::optional<PlayerIdx>> owner) {
  Allocation a;
  a.value = allocation_value(inst, owner);
  a.owner = std::move(owner);
  return a;
}

namespace {

struct BruteForce {
  const Instance& inst;
  std::vector<double> received;
  std::vector<std::optional<PlayerIdx>> current;
  std::vector<std::optional<PlayerIdx>> best;
  double best_value = -1.0;

  double value() const {
    double v = 0.0;
    for (PlayerIdx i = 0; i < inst.num_players(); ++i) {
      v += std::min(inst.budget(i), received[i]);
    }
    return v;
  }

  void search(ItemIdx j) {
    if (j == inst.num_items()) {
      const double v = value();
      if (v > best_value) {
        best_value = v;
        best = current;
      }
      return;
    }
    current[j] = std::nullopt;
    search(j + 1);
    for (PlayerIdx i : inst.players_of(j)) {
      current[j] = i;
      received[i] += inst.price(i, j);
      search(j + 1);
      received[i] -= inst.price(i, j);
    }
    current[j] = std::nullopt;
  }
};

}  // namespace

Allocation best_integral_allocation(const Instance& inst,
                                    std::uint64_t max_states) {
  double states = 1.0;
  for (ItemIdx j = 0; j < inst.num_items(); ++j) {
    states *= static_cast<double>(inst.players_of(j).size() + 1);
  }
  if (states > static_cast<double>(max_states)) {
    throw InstanceError("instance too large for exhaustive search");
  }
  BruteForce bf{inst, std::vector<double>(inst.num_players(), 0.0),
                std::vector<std::optional<PlayerIdx>>(inst.num_items()),
                {}, -1.0};
  bf.search(0);
  return make_allocation(inst, bf.best);
}

Instance gen_gap_instance() {
  InstanceSpec spec;
  spec.beta = 1.0 / 3.0;
  spec.players = {{"1", 1.0}, {"2", 1.0}};
  spec.items = {"h", "s1", "s2"};
  spec.prices = {{"1", "h", 1.0}, {"2", "h", 1.0}, {"1", "s1", 0.5},
                 {"2", "s2", 0.5}};
  return Instance(spec);
}

PriceModel parse_price_model(std::string_view name) {
  if (name == "uniform_prices") return PriceModel::UniformPrices;
  if (name == "general") return PriceModel::General;
  throw InstanceError("invalid price model name: " + std::string(name));
}

const char* to_string(PriceModel m) {
  return m == PriceModel::UniformPrices ? "uniform_prices" : "general";
}

Instance gen_random_instance(std::uint64_t seed, std::size_t n_players,
                             std::size_t n_items, PriceModel model) {
  if (n_players == 0 || n_items == 0) {
    throw InstanceError("random instance needs at least one player and item");
  }
  Rng rng(seed);
  InstanceSpec spec;
  spec.beta = 1.0 / 3.0;
  for (std::size_t i = 0; i < n_players; ++i) {
    spec.players.push_back({"p" + std::to_string(i + 1), rng.uniform(0.5, 2.0)});
  }
  for (std::size_t j = 0; j < n_items; ++j) {
    spec.items.push_back("j" + std::to_string(j + 1));
  }
  double max_budget = 0.0;
  for (const auto& p : spec.players) max_budget = std::max(max_budget, p.budget);

  for (std::size_t j = 0; j < n_items; ++j) {
    std::vector<bool> offered(n_players, false);
    std::vector<double> price(n_players, 0.0);
    if (model == PriceModel::General) {
      for (std::size_t i = 0; i < n_players; ++i) {
        offered[i] = rng.bernoulli(0.7);
        price[i] = spec.players[i].budget * rng.uniform(0.05, 1.0);
      }
      if (std::none_of(offered.begin(), offered.end(), [](bool b) { return b; })) {
        offered[rng.below(n_players)] = true;
      }
    } else {
      const double pj = max_budget * rng.uniform(0.05, 1.0);
      std::vector<std::size_t> eligible;
      for (std::size_t i = 0; i < n_players; ++i) {
        if (spec.players[i].budget >= pj) eligible.push_back(i);
      }
      for (std::size_t i : eligible) offered[i] = rng.bernoulli(0.6);
      if (std::none_of(offered.begin(), offered.end(), [](bool b) { return b; })) {
        offered[eligible[rng.below(eligible.size())]] = true;
      }
      std::fill(price.begin(), price.end(), pj);
    }
    for (std::size_t i = 0; i < n_players; ++i) {
      if (offered[i]) {
        spec.prices.push_back({spec.players[i].id, spec.items[j], price[i]});
      }
    }
  }
  return Instance(spec);
}

namespace {

using nlohmann::json;

void require_keys(const json& obj, std::initializer_list<const char*> allowed,
                  const std::string& where) {
  if (!obj.is_object()) throw InstanceError(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
          return key == a;
        }) == allowed.end()) {
      throw InstanceError("unknown key '" + key + "' in " + where);
    }
  }
  for (const char* a : allowed) {
    if (!obj.contains(a)) {
      throw InstanceError("missing key '" + std::string(a) + "' in " + where);
    }
  }
}

double get_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw InstanceError(where + " must be a number");
  return v.get<double>();
}

std::string get_string(const json& v, const std::string& where) {
  if (!v.is_string()) throw InstanceError(where + " must be a string");
  return v.get<std::string>();
}

}  // namespace

nlohmann::json instance_to_json(const Instance& inst) {
  const InstanceSpec spec = inst.to_spec();
  json out;
  out["beta"] = spec.beta;
  out["players"] = json::array();
  for (const auto& p : spec.players) {
    out["players"].push_back({{"id", p.id}, {"budget", p.budget}});
  }
  out["items"] = spec.items;
  out["prices"] = json::array();
  for (const auto& pr : spec.prices) {
    out["prices"].push_back({{"player", pr.player}, {"item", pr.item}, {"p", pr.p}});
  }
  return out;
}

InstanceSpec instance_spec_from_json(const nlohmann::json& j) {
  if (j.is_object() && j.contains("schema_version")) {
    // Files written by the command line tool carry a format version.
    if (j["schema_version"] != 1) throw InstanceError("unsupported schema_version");
    nlohmann::json rest = j;
    rest.erase("schema_version");
    return instance_spec_from_json(rest);
  }
  require_keys(j, {"beta", "players", "items", "prices"}, "instance");
  InstanceSpec spec;
  spec.beta = get_number(j["beta"], "beta");
  if (!j["players"].is_array()) throw InstanceError("players must be an array");
  for (const auto& p : j["players"]) {
    require_keys(p, {"id", "budget"}, "player");
    spec.players.push_back(
        {get_string(p["id"], "player id"), get_number(p["budget"], "budget")});
  }
  if (!j["items"].is_array()) throw InstanceError("items must be an array");
  for (const auto& it : j["items"]) spec.items.push_back(get_string(it, "item id"));
  if (!j["prices"].is_array()) throw InstanceError("prices must be an array");
  for (const auto& pr : j["prices"]) {
    require_keys(pr, {"player", "item", "p"}, "price");
    spec.prices.push_back({get_string(pr["player"], "price player"),
                           get_string(pr["item"], "price item"),
                           get_number(pr["p"], "price p")});
  }
  return spec;
}

Instance instance_from_json(const nlohmann::json& j) {
  return Instance(instance_spec_from_json(j));
}

Instance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InstanceError("cannot open instance file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw InstanceError("malformed JSON in " + path + ": " + e.what());
  }
  return instance_from_json(j);
}

void save_instance(const Instance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InstanceError("cannot write instance file " + path);
  out << instance_to_json(inst).dump(2) << "\n";
}

nlohmann::json allocation_to_json(const Instance& inst, const Allocation& a) {
  json assignment = json::array();
  for (ItemIdx j = 0; j < a.owner.size(); ++j) {
    if (a.owner[j]) {
      assignment.push_back(
          {{"item", inst.item_id(j)}, {"player", inst.player_id(*a.owner[j])}});
    }
  }
  return {{"assignment", assignment}, {"value", a.value}};
}

}  // namespace mba

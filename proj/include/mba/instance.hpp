#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace mba {

using PlayerIdx = std::size_t;
using ItemIdx = std::size_t;

enum class ItemClass { Big, Small };

enum class PriceModel {
  UniformPrices,  // one price per item, shared by a random subset of players
  General,        // independent price per (player, item) pair
};

/// Unvalidated instance data keyed by ids, as read from a file.
struct InstanceSpec {
  struct Player {
    std::string id;
    double budget = 0.0;
  };
  struct Price {
    std::string player;
    std::string item;
    double p = 0.0;
  };

  double beta = 1.0 / 3.0;
  std::vector<Player> players;
  std::vector<std::string> items;
  std::vector<Price> prices;
};

/// Returns one human-readable message per violated invariant; empty when the
/// data describes a valid instance.
std::vector<std::string> validate_instance(const InstanceSpec& spec);

/// A validated, immutable instance of Maximum Budgeted Allocation.
///
/// Players and items are addressed by their position in the declared order.
/// Prices are stored densely; an absent price means the item cannot be given
/// to that player.
class Instance {
 public:
  /// Throws InstanceError listing every violation.
  explicit Instance(const InstanceSpec& spec);

  std::size_t num_players() const { return player_ids_.size(); }
  std::size_t num_items() const { return item_ids_.size(); }
  double beta() const { return beta_; }

  const std::string& player_id(PlayerIdx i) const { return player_ids_[i]; }
  const std::string& item_id(ItemIdx j) const { return item_ids_[j]; }
  const std::vector<std::string>& player_ids() const { return player_ids_; }
  const std::vector<std::string>& item_ids() const { return item_ids_; }
  std::optional<PlayerIdx> find_player(std::string_view id) const;
  std::optional<ItemIdx> find_item(std::string_view id) const;

  double budget(PlayerIdx i) const { return budgets_[i]; }
  const std::vector<double>& budgets() const { return budgets_; }

  bool has_price(PlayerIdx i, ItemIdx j) const {
    return present_[i * num_items() + j];
  }
  /// Price of a present pair; 0 for absent pairs.
  double price(PlayerIdx i, ItemIdx j) const {
    return prices_[i * num_items() + j];
  }

  /// Items with a present price for player i, in declared order.
  const std::vector<ItemIdx>& items_of(PlayerIdx i) const {
    return items_of_[i];
  }
  /// Players with a present price for item j, in declared order.
  const std::vector<PlayerIdx>& players_of(ItemIdx j) const {
    return players_of_[j];
  }

  /// Big iff p_ij >= (1 - beta) B_i. Throws InstanceError for absent pairs.
  ItemClass classify(PlayerIdx i, ItemIdx j) const;
  bool is_big(PlayerIdx i, ItemIdx j) const {
    return has_price(i, j) && classify(i, j) == ItemClass::Big;
  }

  InstanceSpec to_spec() const;

 private:
  double beta_;
  std::vector<std::string> player_ids_;
  std::vector<std::string> item_ids_;
  std::vector<double> budgets_;
  std::vector<double> prices_;
  std::vector<bool> present_;
  std::vector<std::vector<ItemIdx>> items_of_;
  std::vector<std::vector<PlayerIdx>> players_of_;
  std::unordered_map<std::string, PlayerIdx> player_index_;
  std::unordered_map<std::string, ItemIdx> item_index_;
};

ItemClass classify_item(const Instance& inst, PlayerIdx i, ItemIdx j);
const char* to_string(ItemClass c);

/// An integral allocation: owner[j] is the player receiving item j, if any.
struct Allocation {
  std::vector<std::optional<PlayerIdx>> owner;
  double value = 0.0;
};

/// Sum over players of min(B_i, total price received). Throws InstanceError
/// if an item is given to a player without a price for it.
double allocation_value(const Instance& inst,
                        const std::vector<std::optional<PlayerIdx>>& owner);
Allocation make_allocation(const Instance& inst,
                           std::vector<std::optional<PlayerIdx>> owner);

/// Best integral allocation by exhaustive search. Intended for small
/// instances; throws InstanceError when the search space exceeds
/// `max_states`.
Allocation best_integral_allocation(const Instance& inst,
                                    std::uint64_t max_states = 50'000'000);

/// Two players with unit budgets sharing one unit-price item, each with a
/// private half-price item. Its Assignment-LP optimum is 2 and the best
/// integral value is 3/2.
Instance gen_gap_instance();

PriceModel parse_price_model(std::string_view name);
const char* to_string(PriceModel m);

/// Deterministic for a fixed seed. Budgets lie in [0.5, 2] and every price
/// is at most the budget of its player.
Instance gen_random_instance(std::uint64_t seed, std::size_t n_players,
                             std::size_t n_items, PriceModel model);

nlohmann::json instance_to_json(const Instance& inst);
/// Strict parse: unknown keys and malformed fields raise InstanceError.
InstanceSpec instance_spec_from_json(const nlohmann::json& j);
Instance instance_from_json(const nlohmann::json& j);
Instance load_instance(const std::string& path);
void save_instance(const Instance& inst, const std::string& path);

nlohmann::json allocation_to_json(const Instance& inst, const Allocation& a);

}  // namespace mba

#pragma once

// Constructed instances and fractional solutions with known structure, used
// by tests, the acceptance suite and the CLI.

#include <cstdint>
#include <string>

#include "mba/lp.hpp"

namespace mba {

/// Canonical solution on a price ladder. Players at level l have budget 2^l
/// and hold level-l items (price 2^l) as big and level-(l-1) items (price
/// 2^(l-1)) as small; level 0 players take small items priced 1/2. Every
/// item has mass 1, prices are unique per item, and two players sharing a
/// big item sit on the same level. `players_per_level` must be even.
AssignmentSolution level_fixture(std::uint64_t seed, std::size_t levels,
                                 std::size_t players_per_level);

/// Saturated solution (every budget equals the assigned value) with at
/// least one unequally priced item for `mu`.
AssignmentSolution saturated_fixture(std::uint64_t seed, double mu);

/// One canonical player. With `half_small` every small price is at most
/// B/2; otherwise small prices reach up to 0.6 B.
AssignmentSolution canonical_player_fixture(std::uint64_t seed, bool half_small);

/// Starting solution whose pipeline run rounds at `step` (1, 2, 4, 5 or 6).
AssignmentSolution branch_fixture(int step, std::uint64_t seed = 1);

}  // namespace mba

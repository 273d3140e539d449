#pragma once

#include <string>

#include "json.hpp"

namespace mba {

/// Shortest round-trip text for a double, identical to its JSON encoding so
/// CSV and JSON outputs agree exactly.
inline std::string num(double v) { return nlohmann::json(v).dump(); }

}  // namespace mba

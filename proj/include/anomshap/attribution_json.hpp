#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "anomshap/shapley.hpp"

namespace anomshap {

/// {strategy, phi0, phi: [...], m, seed, gamma, elapsed_ms}; `features`
/// is added when names are given. phi is in dataset column order.
nlohmann::json to_json(const Attribution& attribution,
                       const std::vector<std::string>& feature_names = {});

Attribution attribution_from_json(const nlohmann::json& j);

}  // namespace anomshap

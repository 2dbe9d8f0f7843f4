#include "anomshap/attribution_json.hpp"

#include "anomshap/errors.hpp"

namespace anomshap {

nlohmann::json to_json(const Attribution& a, const std::vector<std::string>& feature_names) {
  nlohmann::json j;
  j["strategy"] = a.strategy;
  j["phi0"] = a.phi0;
  j["phi"] = std::vector<double>(a.phi.data(), a.phi.data() + a.phi.size());
  j["m"] = a.m;
  j["seed"] = a.seed;
  j["gamma"] = a.gamma ? nlohmann::json(*a.gamma) : nlohmann::json(nullptr);
  j["elapsed_ms"] = a.elapsed_ms;
  if (!feature_names.empty()) {
    if (feature_names.size() != static_cast<std::size_t>(a.phi.size()))
      throw ArgumentError("feature name count does not match attribution length");
    j["features"] = feature_names;
  }
  return j;
}

Attribution attribution_from_json(const nlohmann::json& j) {
  try {
    Attribution a;
    a.strategy = j.at("strategy").get<std::string>();
    a.phi0 = j.at("phi0").get<double>();
    const auto phi = j.at("phi").get<std::vector<double>>();
    a.phi = Eigen::Map<const Vector>(phi.data(), static_cast<Eigen::Index>(phi.size()));
    a.m = j.at("m").get<std::size_t>();
    a.seed = j.at("seed").get<std::uint64_t>();
    if (!j.at("gamma").is_null()) a.gamma = j.at("gamma").get<double>();
    a.elapsed_ms = j.at("elapsed_ms").get<double>();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("malformed attribution JSON: ") + e.what());
  }
}

}  // namespace anomshap

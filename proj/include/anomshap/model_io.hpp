#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>

#include "anomshap/data.hpp"
#include "anomshap/detectors.hpp"

namespace anomshap {

/// A trained detector together with what is needed to score raw rows:
/// feature schema, normalization statistics and the resolved training
/// configuration.
struct ModelBundle {
  std::shared_ptr<const ScoreModel> model;
  std::vector<FeatureSpec> features;
  std::optional<NormStats> norm_stats;
  std::map<std::string, std::string> metadata;
};

/// Versioned line-oriented text format (`anomshap-model 1`): explicit field
/// names, values written with 17 significant digits so doubles round-trip.
/// Only GmmModel and SubspaceModel can be written.
void write_bundle(std::ostream& out, const ModelBundle& bundle);

/// Throws ModelFormatError on malformed input or when `expected_dim` is set
/// and differs from the stored dimension.
ModelBundle read_bundle(std::istream& in, std::optional<std::size_t> expected_dim = std::nullopt);

void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle);
ModelBundle load_bundle(const std::filesystem::path& path,
                        std::optional<std::size_t> expected_dim = std::nullopt);

}  // namespace anomshap

#pragma once

#include <cstdint>

#include "anomshap/data.hpp"

namespace anomshap {

struct KMeansResult {
  Matrix centers;  // k x d
  std::vector<std::size_t> assignment;
  double inertia = 0.0;
};

/// D^2-weighted seeding: returns k distinct rows of `points` as centers.
Matrix kmeans_plus_plus(const Matrix& points, std::size_t k, std::uint64_t seed);

/// Lloyd iterations from k-means++ seeds; keeps the restart with the lowest
/// inertia. Empty clusters are re-seeded at the point farthest from its
/// center.
KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                    std::size_t restarts = 10, std::size_t max_iter = 300);

}  // namespace anomshap

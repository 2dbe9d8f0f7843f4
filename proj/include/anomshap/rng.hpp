#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace anomshap {

using Engine = std::mt19937_64;

/// Derives an independent sub-stream seed from a base seed, a stream name
/// and an index. Names used across the project: "split", "em-init",
/// "kmeans", "sampler", "trials", "inject".
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream,
                          std::uint64_t index = 0);

inline Engine make_engine(std::uint64_t base, std::string_view stream,
                          std::uint64_t index = 0) {
  return Engine(derive_seed(base, stream, index));
}

}  // namespace anomshap

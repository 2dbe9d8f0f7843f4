#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "anomshap/charfn.hpp"
#include "anomshap/errors.hpp"

namespace anomshap {

/// phi0 + sum(phi) equals v(N; x) for every estimator in this module.
struct Attribution {
  std::string strategy;
  double phi0 = 0.0;
  Vector phi;
  std::size_t m = 0;  // random coalition draws (2^d for exhaustive fits)
  std::uint64_t seed = 0;
  std::optional<double> gamma;
  double elapsed_ms = 0.0;
};

inline constexpr std::size_t kExactShapleyMaxDim = 12;
inline constexpr std::size_t kExhaustiveFitMaxDim = 20;

/// m = 2d + 2^11.
constexpr std::size_t default_sample_count(std::size_t d) { return 2 * d + 2048; }

/// Weighted average of marginal contributions over all 2^d coalitions.
/// Throws ArgumentError for d > kExactShapleyMaxDim.
Attribution exact_shapley(const CharacteristicFn& v, Execution exec = Execution::parallel);

/// Draws coalition sizes s in {0, ..., d-1} with mass proportional to
/// (d-1)/(d-s), then a uniform coalition of that size. This is the law
/// P(S) proportional to (d-1) |S|! (d-|S|-1)! / d!.
class SubsetSampler {
 public:
  SubsetSampler(std::size_t d, std::size_t m, std::uint64_t seed);

  std::size_t dim() const noexcept { return d_; }
  std::size_t count() const noexcept { return m_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// Normalized probabilities of each size 0..d-1.
  static std::vector<double> size_mass(std::size_t d);
  /// The m random draws, in draw order (with replacement).
  std::vector<Coalition> draw() const;

 private:
  std::size_t d_;
  std::size_t m_;
  std::uint64_t seed_;
};

/// The m draws followed by the forced anchors: the empty and full coalitions.
std::vector<Coalition> sample_subsets(const SubsetSampler& sampler);

/// Evaluates v on every coalition; results are in input order.
std::vector<double> evaluate_coalitions(const CharacteristicFn& v,
                                        std::span<const Coalition> coalitions, Execution exec);

struct CoalitionValue {
  Coalition coalition;
  double value = 0.0;
  double weight = 1.0;
};

/// Shapley kernel (d-1) / (C(d,s) s (d-s)) for 0 < s < d.
double shapley_kernel_weight(std::size_t d, std::size_t s);

/// The design matrix restricted to the sampled coalitions cannot identify
/// all d-1 free coefficients.
class RankDeficientError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

/// Weighted least squares sum_j w_j (v(S_j) - phi0 - sum_{i in S_j} phi_i)^2
/// with phi0 fixed to v_empty and sum(phi) = v_full - v_empty imposed by
/// eliminating the last coefficient. Throws RankDeficientError when the
/// coalitions do not determine phi.
Attribution fit_least_squares(std::span<const CoalitionValue> values, double v_empty,
                              double v_full, std::size_t d);

enum class SampleWeighting {
  importance,  // weight 1/|S|: corrects the sampling law to the Shapley kernel
  uniform,     // every draw weighs 1
};

struct AttributeConfig {
  std::optional<std::size_t> m;  // defaults to default_sample_count(d)
  std::uint64_t seed = 0;
  SampleWeighting weighting = SampleWeighting::importance;
  bool exhaustive = false;  // every coalition once, Shapley-kernel weighted
  Execution execution = Execution::parallel;
};

/// Sample coalitions, evaluate v, fit. A rank-deficient sample is augmented
/// with every singleton and refit once before giving up with
/// EstimationError.
Attribution attribute(const CharacteristicFn& v, const AttributeConfig& config);

/// Full ASH pipeline for one query point: d+1 anchor minimizations followed
/// by `attribute` on the surrogate-point characteristic function.
Attribution attribute_ash(const ScoreModel& e, const Vector& x, double gamma,
                          const AttributeConfig& config, const LbfgsOptions& optimizer = {});

}  // namespace anomshap

#pragma once

#include "anomshap/shapley.hpp"

namespace anomshap {

/// Per-feature marginal scores: marginal energy for GMMs, squared residual
/// for subspace models. Throws CapabilityError without marginal support.
Vector marginal_attribution(const ScoreModel& e, const Vector& x);

/// Sequential marginal: grows a subset greedily, appending the feature that
/// maximizes the marginal score of the grown subset. Returns a permutation
/// of 0..d-1, most anomalous first.
std::vector<std::size_t> sfe_greedy(const ScoreModel& e, const Vector& x);

/// Converts an SFE ordering into scores (d - rank + 1)/d, rank 1-based.
Vector sfe_scores(std::span<const std::size_t> order);

/// Midpoint-rule integrated gradients along r + alpha (x - r); the path
/// gradients are the parallel kernel, accumulated in step order.
Vector integrated_gradients(const ScoreModel& e, const Vector& x, const Vector& reference,
                            std::size_t steps = 64, Execution exec = Execution::parallel);

struct ReferenceShapConfig {
  std::size_t k = 8;
  AttributeConfig attribute;
};

/// Shapley values of the multi-reference characteristic function.
Attribution reference_shap_attribution(const ScoreModel& e, const Vector& x, ReferenceSet refs,
                                       const std::string& name, const AttributeConfig& config);

/// Kernel SHAP with k-means centers of the training rows as references.
Attribution ksh_attribution(const ScoreModel& e, const Vector& x, const Dataset& train,
                            const ReferenceShapConfig& config = {});

/// Kernel SHAP with the k nearest training rows of x as references.
Attribution wksh_attribution(const ScoreModel& e, const Vector& x, const Dataset& train,
                             const ReferenceShapConfig& config = {});

}  // namespace anomshap

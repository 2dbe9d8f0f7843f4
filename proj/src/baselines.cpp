#include "anomshap/baselines.hpp"

#include <algorithm>
#include <limits>

#include "anomshap/errors.hpp"

namespace anomshap {
namespace {

void require_marginals(const ScoreModel& e, const char* who) {
  if (!e.supports(Capability::marginal))
    throw CapabilityError(std::string(who) + " cannot be computed for detector '" + e.name() +
                          "': it has no subset marginals");
}

}  // namespace

Vector marginal_attribution(const ScoreModel& e, const Vector& x) {
  require_marginals(e, "marg");
  const auto d = e.dim();
  Vector out(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) {
    const std::size_t subset[] = {i};
    out(static_cast<Eigen::Index>(i)) = e.marginal_score(x, subset);
  }
  return out;
}

std::vector<std::size_t> sfe_greedy(const ScoreModel& e, const Vector& x) {
  require_marginals(e, "sfe");
  const auto d = e.dim();
  std::vector<std::size_t> order;  // selection order
  std::vector<std::size_t> current;  // same features, ascending
  std::vector<bool> used(d, false);
  while (order.size() < d) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t arg = d;
    for (std::size_t j = 0; j < d; ++j) {
      if (used[j]) continue;
      std::vector<std::size_t> grown = current;
      grown.insert(std::upper_bound(grown.begin(), grown.end(), j), j);
      const double score = e.marginal_score(x, grown);
      if (arg == d || score > best) {
        best = score;
        arg = j;
      }
    }
    used[arg] = true;
    order.push_back(arg);
    current.insert(std::upper_bound(current.begin(), current.end(), arg), arg);
  }
  return order;
}

Vector sfe_scores(std::span<const std::size_t> order) {
  const auto d = order.size();
  Vector out = Vector::Constant(static_cast<Eigen::Index>(d), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t rank = 0; rank < d; ++rank) {
    if (order[rank] >= d) throw ArgumentError("SFE order is not a permutation");
    out(static_cast<Eigen::Index>(order[rank])) =
        static_cast<double>(d - rank) / static_cast<double>(d);
  }
  if (out.hasNaN()) throw ArgumentError("SFE order is not a permutation");
  return out;
}

Vector integrated_gradients(const ScoreModel& e, const Vector& x, const Vector& reference,
                            std::size_t steps, Execution exec) {
  if (steps < 1) throw ArgumentError("integrated gradients needs steps >= 1");
  if (x.size() != reference.size() || static_cast<std::size_t>(x.size()) != e.dim())
    throw ArgumentError("query point, reference and detector dimensions must agree");
  if (!e.supports(Capability::gradient))
    throw CapabilityError("IG needs a detector with gradients; '" + e.name() + "' has none");
  const Vector delta = x - reference;
  std::vector<Vector> grads(steps);
  for_each_index(exec, steps, [&](std::size_t t) {
    const double alpha = (static_cast<double>(t) + 0.5) / static_cast<double>(steps);
    grads[t] = e.gradient(reference + alpha * delta);
  });
  Vector sum = Vector::Zero(x.size());
  for (const auto& g : grads) sum += g;
  return delta.cwiseProduct(sum) / static_cast<double>(steps);
}

Attribution reference_shap_attribution(const ScoreModel& e, const Vector& x, ReferenceSet refs,
                                       const std::string& name, const AttributeConfig& config) {
  ReferenceCharFn v(e, x, std::move(refs), name);
  return attribute(v, config);
}

Attribution ksh_attribution(const ScoreModel& e, const Vector& x, const Dataset& train,
                            const ReferenceShapConfig& config) {
  auto refs = build_references(ReferenceOrigin::kmeans_centers, train, std::nullopt,
                               std::min(config.k, train.size()), config.attribute.seed);
  return reference_shap_attribution(e, x, std::move(refs), "ksh", config.attribute);
}

Attribution wksh_attribution(const ScoreModel& e, const Vector& x, const Dataset& train,
                             const ReferenceShapConfig& config) {
  auto refs = build_references(ReferenceOrigin::knn_of_x, train, x,
                               std::min(config.k, train.size()), config.attribute.seed);
  return reference_shap_attribution(e, x, std::move(refs), "wksh", config.attribute);
}

}  // namespace anomshap

#include "anomshap/charfn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "anomshap/cluster.hpp"
#include "anomshap/errors.hpp"

namespace anomshap {
namespace {

void check_point(const ScoreModel& e, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != e.dim())
    throw ArgumentError("query point has length " + std::to_string(x.size()) +
                        ", detector expects " + std::to_string(e.dim()));
}

double penalty_denominator(double xi) { return std::max(xi * xi, kPenaltyFloor); }

}  // namespace

double ash_penalized_objective(const ScoreModel& e, const Vector& x, const Coalition& fixed,
                               const Vector& y, double gamma) {
  check_point(e, x);
  if (y.size() != x.size() || fixed.dim() != e.dim())
    throw ArgumentError("dimension mismatch in penalized objective");
  const auto free = fixed.complement();
  if (free.empty()) throw ArgumentError("penalized objective needs at least one free coordinate");
  for (auto i : fixed.members())
    if (y(static_cast<Eigen::Index>(i)) != x(static_cast<Eigen::Index>(i)))
      throw ArgumentError("y must agree with x on the fixed coordinates");
  double penalty = 0.0;
  for (auto i : free) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double diff = y(ii) - x(ii);
    penalty += diff * diff / penalty_denominator(x(ii));
  }
  return e.score(y) + gamma / static_cast<double>(free.size()) * penalty;
}

Vector ash_minimize(const ScoreModel& e, const Vector& x, const Coalition& fixed, double gamma,
                    const LbfgsOptions& options) {
  check_point(e, x);
  if (fixed.dim() != e.dim()) throw ArgumentError("coalition dimension does not match detector");
  if (!(gamma >= 0.0)) throw ArgumentError("gamma must be non-negative");
  if (fixed.is_full()) return x;
  if (!e.supports(Capability::gradient))
    throw CapabilityError("ASH needs a detector with gradients; '" + e.name() + "' has none");

  const auto free = fixed.complement();
  const auto nf = static_cast<Eigen::Index>(free.size());
  Vector denom(nf);
  for (Eigen::Index j = 0; j < nf; ++j)
    denom(j) = penalty_denominator(x(static_cast<Eigen::Index>(free[static_cast<std::size_t>(j)])));
  const double scale = gamma / static_cast<double>(nf);

  Vector start(nf);
  for (Eigen::Index j = 0; j < nf; ++j) start(j) = x(static_cast<Eigen::Index>(free[static_cast<std::size_t>(j)]));

  auto embed = [&](const Vector& z) {
    Vector y = x;
    for (Eigen::Index j = 0; j < nf; ++j) y(static_cast<Eigen::Index>(free[static_cast<std::size_t>(j)])) = z(j);
    return y;
  };
  auto objective = [&](const Vector& z, Vector& grad) {
    const Vector y = embed(z);
    const double value = e.score(y);
    if (!std::isfinite(value)) return value;
    const Vector full_grad = e.gradient(y);
    grad.resize(nf);
    double penalty = 0.0;
    for (Eigen::Index j = 0; j < nf; ++j) {
      const double diff = z(j) - start(j);
      penalty += diff * diff / denom(j);
      grad(j) = full_grad(static_cast<Eigen::Index>(free[static_cast<std::size_t>(j)])) +
                2.0 * scale * diff / denom(j);
    }
    return value + scale * penalty;
  };
  return embed(minimize_lbfgs(objective, start, options).x);
}

Vector AshState::surrogate_point(const Coalition& s) const {
  if (s.dim() != dim()) throw ArgumentError("coalition dimension does not match the query point");
  if (s.is_full()) return x_;
  Vector avg = anchors_.front();
  for (std::size_t i = 0; i < dim(); ++i)
    if (s.contains(i)) avg += anchors_[i + 1];
  avg /= static_cast<double>(s.size() + 1);
  for (std::size_t i = 0; i < dim(); ++i)
    if (s.contains(i)) avg(static_cast<Eigen::Index>(i)) = x_(static_cast<Eigen::Index>(i));
  return avg;
}

double AshState::evaluate(const ScoreModel& e, const Coalition& s) const {
  return e.score(surrogate_point(s));
}

AshState ash_prepare(const ScoreModel& e, const Vector& x, double gamma,
                     const LbfgsOptions& options, Execution exec) {
  check_point(e, x);
  const std::size_t d = e.dim();
  AshState state;
  state.x_ = x;
  state.gamma_ = gamma;
  state.point_score_ = e.score(x);
  state.anchors_.assign(d + 1, Vector());
  state.anchor_scores_.assign(d + 1, 0.0);
  for_each_index(exec, d + 1, [&](std::size_t a) {
    const Coalition fixed = a == 0 ? Coalition(d) : Coalition::of(d, {a - 1});
    try {
      state.anchors_[a] = ash_minimize(e, x, fixed, gamma, options);
    } catch (const OptimizationError& err) {
      throw OptimizationError(std::string("anchor ") +
                              (a == 0 ? "{}" : "{" + std::to_string(a - 1) + "}") + ": " +
                              err.what());
    }
    state.anchor_scores_[a] = e.score(state.anchors_[a]);
  });
  return state;
}

const char* to_string(ReferenceOrigin origin) {
  switch (origin) {
    case ReferenceOrigin::train_mean: return "train_mean";
    case ReferenceOrigin::kmeans_centers: return "kmeans_centers";
    case ReferenceOrigin::knn_of_x: return "knn_of_x";
    case ReferenceOrigin::given: return "given";
  }
  return "given";
}

double reference_evaluate(const ScoreModel& e, const Vector& x, const Coalition& s,
                          const ReferenceSet& refs) {
  if (refs.references.empty()) throw ArgumentError("reference set is empty");
  if (s.dim() != static_cast<std::size_t>(x.size()))
    throw ArgumentError("coalition dimension does not match the query point");
  double total = 0.0;
  Vector y(x.size());
  for (const auto& r : refs.references) {
    if (r.size() != x.size()) throw ArgumentError("reference dimension does not match the query point");
    for (Eigen::Index i = 0; i < x.size(); ++i) y(i) = s.contains(static_cast<std::size_t>(i)) ? x(i) : r(i);
    total += e.score(y);
  }
  return total / static_cast<double>(refs.references.size());
}

ReferenceSet build_references(ReferenceOrigin origin, const Dataset& train,
                              const std::optional<Vector>& x, std::size_t k, std::uint64_t seed) {
  if (train.size() == 0) throw ArgumentError("reference construction needs training rows");
  ReferenceSet out;
  out.origin = origin;
  switch (origin) {
    case ReferenceOrigin::train_mean:
      out.references.push_back(train.rows().colwise().mean().transpose());
      break;
    case ReferenceOrigin::kmeans_centers: {
      if (k < 1 || k > train.size())
        throw ArgumentError("k = " + std::to_string(k) + " must lie in [1, " +
                            std::to_string(train.size()) + "]");
      const auto result = kmeans(train.rows(), k, seed, 10);
      for (Eigen::Index c = 0; c < result.centers.rows(); ++c)
        out.references.push_back(result.centers.row(c).transpose());
      break;
    }
    case ReferenceOrigin::knn_of_x: {
      if (!x) throw ArgumentError("knn references need the query point");
      if (k < 1 || k > train.size())
        throw ArgumentError("k = " + std::to_string(k) + " must lie in [1, " +
                            std::to_string(train.size()) + "]");
      if (static_cast<std::size_t>(x->size()) != train.dim())
        throw ArgumentError("query point dimension does not match training data");
      const Vector dist2 = (train.rows().rowwise() - x->transpose()).rowwise().squaredNorm();
      std::vector<std::size_t> order(train.size());
      std::iota(order.begin(), order.end(), 0);
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                        [&](std::size_t a, std::size_t b) {
                          const double da = dist2(static_cast<Eigen::Index>(a));
                          const double db = dist2(static_cast<Eigen::Index>(b));
                          return da < db || (da == db && a < b);
                        });
      for (std::size_t i = 0; i < k; ++i) out.references.push_back(train.row(order[i]));
      break;
    }
    case ReferenceOrigin::given:
      throw ArgumentError("'given' references are supplied directly, not built");
  }
  return out;
}

ReferenceCharFn::ReferenceCharFn(const ScoreModel& e, Vector x, ReferenceSet refs, std::string name)
    : e_(&e), x_(std::move(x)), refs_(std::move(refs)), name_(std::move(name)) {
  check_point(e, x_);
  if (refs_.references.empty()) throw ArgumentError("reference set is empty");
  for (const auto& r : refs_.references) {
    if (r.size() != x_.size()) throw ArgumentError("reference dimension does not match the query point");
    if (!r.allFinite()) throw ArgumentError("reference vectors must be finite");
  }
}

CharFnKind ReferenceCharFn::kind() const {
  return refs_.references.size() == 1 ? CharFnKind::single_reference : CharFnKind::multi_reference;
}

}  // namespace anomshap

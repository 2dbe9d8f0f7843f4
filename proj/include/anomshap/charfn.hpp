#pragma once

#include <functional>
#include <optional>
#include <string>

#include "anomshap/coalition.hpp"
#include "anomshap/data.hpp"
#include "anomshap/detectors.hpp"
#include "anomshap/optimize.hpp"
#include "anomshap/parallel.hpp"

namespace anomshap {

enum class CharFnKind { ash, single_reference, multi_reference, custom };

/// Set function v(S; x) for one fixed query point. Implementations are
/// immutable and `evaluate` may be called concurrently.
class CharacteristicFn {
 public:
  virtual ~CharacteristicFn() = default;
  virtual std::size_t dim() const = 0;
  virtual CharFnKind kind() const = 0;
  virtual std::string name() const = 0;
  virtual double evaluate(const Coalition& s) const = 0;
};

/// Wraps an arbitrary set function (tabulated games, analytic fixtures).
class FunctionCharFn final : public CharacteristicFn {
 public:
  FunctionCharFn(std::size_t d, std::function<double(const Coalition&)> fn,
                 std::string name = "custom")
      : d_(d), fn_(std::move(fn)), name_(std::move(name)) {}
  std::size_t dim() const override { return d_; }
  CharFnKind kind() const override { return CharFnKind::custom; }
  std::string name() const override { return name_; }
  double evaluate(const Coalition& s) const override { return fn_(s); }

 private:
  std::size_t d_;
  std::function<double(const Coalition&)> fn_;
  std::string name_;
};

// ---------------------------------------------------------------------------
// ASH: score at an optimization-derived surrogate point.

/// Lower bound applied to x_i^2 in the proximity penalty.
inline constexpr double kPenaltyFloor = 1e-6;

/// l(y) = e(y) + gamma/|F| * sum_{i in F} (y_i - x_i)^2 / max(x_i^2, 1e-6),
/// F = free coordinates (complement of `fixed`). Requires F non-empty and
/// y to agree with x on `fixed`.
double ash_penalized_objective(const ScoreModel& e, const Vector& x, const Coalition& fixed,
                               const Vector& y, double gamma);

/// Local minimizer of the penalized objective over the free coordinates,
/// started from y = x. Coordinates in `fixed` are copied from x exactly; a
/// full `fixed` returns x.
Vector ash_minimize(const ScoreModel& e, const Vector& x, const Coalition& fixed, double gamma,
                    const LbfgsOptions& options = {});

/// Cached anchors x^(empty) and x^({i}) for one query point.
class AshState {
 public:
  const Vector& point() const noexcept { return x_; }
  double gamma() const noexcept { return gamma_; }
  double point_score() const noexcept { return point_score_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(x_.size()); }

  /// Anchor 0 is the empty-set anchor; anchor i+1 fixes feature i.
  std::size_t anchor_count() const noexcept { return anchors_.size(); }
  const Vector& empty_anchor() const { return anchors_.front(); }
  const Vector& singleton_anchor(std::size_t i) const { return anchors_.at(i + 1); }
  double empty_anchor_score() const { return anchor_scores_.front(); }
  double singleton_anchor_score(std::size_t i) const { return anchor_scores_.at(i + 1); }

  /// [x_S, (x^(empty) + sum_{i in S} x^({i}))_{S^c} / (|S| + 1)].
  Vector surrogate_point(const Coalition& s) const;
  /// e evaluated at the surrogate point.
  double evaluate(const ScoreModel& e, const Coalition& s) const;

 private:
  friend AshState ash_prepare(const ScoreModel&, const Vector&, double, const LbfgsOptions&,
                              Execution);
  Vector x_;
  double gamma_ = 0.0;
  double point_score_ = 0.0;
  std::vector<Vector> anchors_;
  std::vector<double> anchor_scores_;
};

/// Runs the d+1 anchor minimizations (independent, parallel when requested).
AshState ash_prepare(const ScoreModel& e, const Vector& x, double gamma,
                     const LbfgsOptions& options = {}, Execution exec = Execution::parallel);

class AshCharFn final : public CharacteristicFn {
 public:
  /// `e` must outlive this object.
  AshCharFn(const ScoreModel& e, AshState state) : e_(&e), state_(std::move(state)) {}
  std::size_t dim() const override { return state_.dim(); }
  CharFnKind kind() const override { return CharFnKind::ash; }
  std::string name() const override { return "ash"; }
  double evaluate(const Coalition& s) const override { return state_.evaluate(*e_, s); }
  const AshState& state() const noexcept { return state_; }

 private:
  const ScoreModel* e_;
  AshState state_;
};

// ---------------------------------------------------------------------------
// Reference-based characteristic functions.

enum class ReferenceOrigin { train_mean, kmeans_centers, knn_of_x, given };

const char* to_string(ReferenceOrigin origin);

struct ReferenceSet {
  std::vector<Vector> references;
  ReferenceOrigin origin = ReferenceOrigin::given;
};

/// (1/|R|) sum_r e([x_S, r_{S^c}]).
double reference_evaluate(const ScoreModel& e, const Vector& x, const Coalition& s,
                          const ReferenceSet& refs);

/// train_mean: the column means; kmeans_centers: k-means centers (10
/// restarts); knn_of_x: the k training rows nearest to x (Euclidean, ties
/// by row order). Throws ArgumentError when k exceeds the row count or x is
/// missing for knn_of_x.
ReferenceSet build_references(ReferenceOrigin origin, const Dataset& train,
                              const std::optional<Vector>& x, std::size_t k, std::uint64_t seed);

class ReferenceCharFn final : public CharacteristicFn {
 public:
  /// `e` must outlive this object. Validates reference dimensions.
  ReferenceCharFn(const ScoreModel& e, Vector x, ReferenceSet refs, std::string name);
  std::size_t dim() const override { return static_cast<std::size_t>(x_.size()); }
  CharFnKind kind() const override;
  std::string name() const override { return name_; }
  double evaluate(const Coalition& s) const override {
    return reference_evaluate(*e_, x_, s, refs_);
  }

 private:
  const ScoreModel* e_;
  Vector x_;
  ReferenceSet refs_;
  std::string name_;
};

}  // namespace anomshap

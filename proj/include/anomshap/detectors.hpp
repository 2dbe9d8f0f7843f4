#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "anomshap/data.hpp"

namespace anomshap {

enum class Capability : unsigned {
  none = 0,
  gradient = 1u << 0,
  marginal = 1u << 1,  // scores of feature subsets (marginals or decomposition)
};

constexpr Capability operator|(Capability a, Capability b) {
  return static_cast<Capability>(static_cast<unsigned>(a) | static_cast<unsigned>(b));
}
constexpr bool has(Capability set, Capability flag) {
  return (static_cast<unsigned>(set) & static_cast<unsigned>(flag)) != 0;
}

/// A trained anomaly detector: higher score means more anomalous.
/// Implementations are immutable after construction and safe to evaluate
/// from many threads at once.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;

  virtual std::size_t dim() const = 0;
  virtual std::string name() const = 0;
  virtual Capability capabilities() const = 0;

  virtual double score(const Vector& x) const = 0;
  /// Throws CapabilityError unless Capability::gradient is declared.
  virtual Vector gradient(const Vector& x) const;
  /// Score restricted to a non-empty feature subset (ascending indices).
  /// Throws CapabilityError unless Capability::marginal is declared.
  virtual double marginal_score(const Vector& x, std::span<const std::size_t> subset) const;

  bool supports(Capability flag) const { return has(capabilities(), flag); }
};

/// Adapts plain callables to the ScoreModel interface; mostly used for
/// analytic fixtures and detectors defined outside this library.
class CallableScore final : public ScoreModel {
 public:
  using ScoreFn = std::function<double(const Vector&)>;
  using GradientFn = std::function<Vector(const Vector&)>;
  using MarginalFn = std::function<double(const Vector&, std::span<const std::size_t>)>;

  CallableScore(std::size_t dim, std::string name, ScoreFn score, GradientFn gradient = {},
                MarginalFn marginal = {});

  std::size_t dim() const override { return dim_; }
  std::string name() const override { return name_; }
  Capability capabilities() const override;
  double score(const Vector& x) const override { return score_(x); }
  Vector gradient(const Vector& x) const override;
  double marginal_score(const Vector& x, std::span<const std::size_t> subset) const override;

 private:
  std::size_t dim_;
  std::string name_;
  ScoreFn score_;
  GradientFn gradient_;
  MarginalFn marginal_;
};

/// Forwards to another detector while hiding some of its capabilities, e.g.
/// to stand in for a detector whose subset marginals are unavailable.
class RestrictedModel final : public ScoreModel {
 public:
  RestrictedModel(std::shared_ptr<const ScoreModel> inner, Capability allowed);

  std::size_t dim() const override { return inner_->dim(); }
  std::string name() const override { return inner_->name(); }
  Capability capabilities() const override;
  double score(const Vector& x) const override { return inner_->score(x); }
  Vector gradient(const Vector& x) const override;
  double marginal_score(const Vector& x, std::span<const std::size_t> subset) const override;

  const std::shared_ptr<const ScoreModel>& inner() const noexcept { return inner_; }

 private:
  std::shared_ptr<const ScoreModel> inner_;
  Capability allowed_;
};

std::string to_string(Capability caps);
/// Comma-separated flag names ("gradient,marginal"); "none" or "" for none.
Capability parse_capabilities(const std::string& text);

/// Mean score over the rows of `data`.
double mean_score(const ScoreModel& model, const Dataset& data);

/// Returns the candidate with the lowest mean validation score (highest
/// likelihood for energies, lowest error for reconstruction models).
std::shared_ptr<const ScoreModel> select_model(
    const std::vector<std::shared_ptr<const ScoreModel>>& candidates, const Dataset& valid);

}  // namespace anomshap

#include "anomshap/detectors.hpp"

#include <limits>

#include "anomshap/errors.hpp"

namespace anomshap {

Vector ScoreModel::gradient(const Vector&) const {
  throw CapabilityError("detector '" + name() + "' does not provide gradients");
}

double ScoreModel::marginal_score(const Vector&, std::span<const std::size_t>) const {
  throw CapabilityError("detector '" + name() + "' does not provide subset marginals");
}

CallableScore::CallableScore(std::size_t dim, std::string name, ScoreFn score,
                             GradientFn gradient, MarginalFn marginal)
    : dim_(dim),
      name_(std::move(name)),
      score_(std::move(score)),
      gradient_(std::move(gradient)),
      marginal_(std::move(marginal)) {
  if (dim_ == 0) throw ArgumentError("score model dimension must be >= 1");
  if (!score_) throw ArgumentError("score callable is empty");
}

Capability CallableScore::capabilities() const {
  Capability caps = Capability::none;
  if (gradient_) caps = caps | Capability::gradient;
  if (marginal_) caps = caps | Capability::marginal;
  return caps;
}

Vector CallableScore::gradient(const Vector& x) const {
  if (!gradient_) return ScoreModel::gradient(x);
  return gradient_(x);
}

double CallableScore::marginal_score(const Vector& x, std::span<const std::size_t> subset) const {
  if (!marginal_) return ScoreModel::marginal_score(x, subset);
  return marginal_(x, subset);
}

RestrictedModel::RestrictedModel(std::shared_ptr<const ScoreModel> inner, Capability allowed)
    : inner_(std::move(inner)), allowed_(allowed) {
  if (!inner_) throw ArgumentError("restricted model needs a detector");
}

Capability RestrictedModel::capabilities() const {
  return static_cast<Capability>(static_cast<unsigned>(inner_->capabilities()) &
                                 static_cast<unsigned>(allowed_));
}

Vector RestrictedModel::gradient(const Vector& x) const {
  if (!supports(Capability::gradient)) return ScoreModel::gradient(x);
  return inner_->gradient(x);
}

double RestrictedModel::marginal_score(const Vector& x, std::span<const std::size_t> subset) const {
  if (!supports(Capability::marginal)) return ScoreModel::marginal_score(x, subset);
  return inner_->marginal_score(x, subset);
}

std::string to_string(Capability caps) {
  std::string out;
  if (has(caps, Capability::gradient)) out = "gradient";
  if (has(caps, Capability::marginal)) out += out.empty() ? "marginal" : ",marginal";
  return out.empty() ? "none" : out;
}

Capability parse_capabilities(const std::string& text) {
  Capability caps = Capability::none;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (item == "gradient")
      caps = caps | Capability::gradient;
    else if (item == "marginal")
      caps = caps | Capability::marginal;
    else if (!item.empty() && item != "none")
      throw ArgumentError("unknown capability '" + item + "'");
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return caps;
}

double mean_score(const ScoreModel& model, const Dataset& data) {
  if (data.size() == 0) throw ArgumentError("cannot score an empty dataset");
  if (data.dim() != model.dim()) throw ArgumentError("dataset dimension does not match model");
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) total += model.score(data.row(i));
  return total / static_cast<double>(data.size());
}

std::shared_ptr<const ScoreModel> select_model(
    const std::vector<std::shared_ptr<const ScoreModel>>& candidates, const Dataset& valid) {
  if (candidates.empty()) throw ArgumentError("select_model needs at least one candidate");
  if (candidates.size() == 1) return candidates.front();
  std::shared_ptr<const ScoreModel> best;
  double best_score = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) {
    const double s = mean_score(*c, valid);
    if (s < best_score) {
      best_score = s;
      best = c;
    }
  }
  if (!best) throw FitError("every candidate has a non-finite validation score");
  return best;
}

}  // namespace anomshap

#include "anomshap/gmm.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "anomshap/cluster.hpp"
#include "anomshap/errors.hpp"
#include "anomshap/rng.hpp"

namespace anomshap {
namespace {

double log_sum_exp(const Vector& v) {
  const double top = v.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((v.array() - top).exp().sum());
}

}  // namespace

GmmModel::GmmModel(std::vector<double> weights, std::vector<Vector> means,
                   std::vector<Matrix> covariances)
    : weights_(std::move(weights)), means_(std::move(means)), covariances_(std::move(covariances)) {
  const std::size_t k = weights_.size();
  if (k == 0) throw ArgumentError("mixture needs at least one component");
  if (means_.size() != k || covariances_.size() != k)
    throw ArgumentError("weights, means and covariances must have the same length");
  dim_ = static_cast<std::size_t>(means_.front().size());
  if (dim_ == 0) throw ArgumentError("mixture dimension must be >= 1");

  double total = 0.0;
  for (double w : weights_) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ArgumentError("mixture weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-6) throw ArgumentError("mixture weights must sum to 1");
  for (double& w : weights_) w /= total;

  const double log_2pi = std::log(2.0 * std::numbers::pi);
  for (std::size_t c = 0; c < k; ++c) {
    const auto& cov = covariances_[c];
    if (static_cast<std::size_t>(means_[c].size()) != dim_ ||
        static_cast<std::size_t>(cov.rows()) != dim_ || static_cast<std::size_t>(cov.cols()) != dim_)
      throw ArgumentError("component " + std::to_string(c) + " has inconsistent dimensions");
    Eigen::LLT<Matrix> llt(cov);
    Matrix factor = llt.matrixL();
    if (llt.info() != Eigen::Success || !(factor.diagonal().array() > 0.0).all() ||
        !factor.allFinite())
      throw ArgumentError("covariance of component " + std::to_string(c) +
                          " is not positive definite");
    const double log_det = 2.0 * factor.diagonal().array().log().sum();
    log_norms_.push_back(-0.5 * static_cast<double>(dim_) * log_2pi - 0.5 * log_det);
    log_weights_.push_back(std::log(weights_[c]));
    factors_.push_back(std::move(factor));
  }
}

Vector GmmModel::component_log_densities(const Vector& x) const {
  Vector out(static_cast<Eigen::Index>(components()));
  for (std::size_t c = 0; c < components(); ++c) {
    const Vector z = factors_[c].triangularView<Eigen::Lower>().solve(x - means_[c]);
    out(static_cast<Eigen::Index>(c)) = log_weights_[c] + log_norms_[c] - 0.5 * z.squaredNorm();
  }
  return out;
}

double GmmModel::energy(const Vector& x) const {
  return -log_sum_exp(component_log_densities(x));
}

Vector GmmModel::energy_gradient(const Vector& x) const {
  const Vector logp = component_log_densities(x);
  const double lse = log_sum_exp(logp);
  Vector grad = Vector::Zero(static_cast<Eigen::Index>(dim_));
  for (std::size_t c = 0; c < components(); ++c) {
    const double r = std::exp(logp(static_cast<Eigen::Index>(c)) - lse);
    if (r == 0.0) continue;
    const auto lower = factors_[c].triangularView<Eigen::Lower>();
    const Vector z = lower.solve(x - means_[c]);
    grad += r * lower.transpose().solve(z);
  }
  return grad;
}

GmmModel GmmModel::marginal(std::span<const std::size_t> subset) const {
  if (subset.empty()) throw ArgumentError("marginal needs a non-empty feature subset");
  const auto s = static_cast<Eigen::Index>(subset.size());
  for (auto i : subset)
    if (i >= dim_) throw ArgumentError("feature index out of range");
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  for (std::size_t c = 0; c < components(); ++c) {
    Vector mu(s);
    Matrix cov(s, s);
    for (Eigen::Index a = 0; a < s; ++a) {
      const auto ia = static_cast<Eigen::Index>(subset[static_cast<std::size_t>(a)]);
      mu(a) = means_[c](ia);
      for (Eigen::Index b = 0; b < s; ++b)
        cov(a, b) = covariances_[c](ia, static_cast<Eigen::Index>(subset[static_cast<std::size_t>(b)]));
    }
    means.push_back(std::move(mu));
    covs.push_back(std::move(cov));
  }
  return GmmModel(weights_, std::move(means), std::move(covs));
}

double GmmModel::marginal_energy(const Vector& x, std::span<const std::size_t> subset) const {
  const GmmModel restricted = marginal(subset);
  Vector xs(static_cast<Eigen::Index>(subset.size()));
  for (std::size_t a = 0; a < subset.size(); ++a)
    xs(static_cast<Eigen::Index>(a)) = x(static_cast<Eigen::Index>(subset[a]));
  return restricted.energy(xs);
}

Vector gmm_e_step(const GmmModel& model, const Matrix& rows, Matrix& resp, Execution exec) {
  const auto n = rows.rows();
  resp.resize(n, static_cast<Eigen::Index>(model.components()));
  Vector loglik(n);
  for_each_index(exec, static_cast<std::size_t>(n), [&](std::size_t i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const Vector logp = model.component_log_densities(rows.row(ii).transpose());
    const double lse = log_sum_exp(logp);
    resp.row(ii) = (logp.array() - lse).exp().transpose();
    loglik(ii) = lse;
  });
  return loglik;
}

namespace {

struct RestartOutcome {
  std::optional<GmmModel> model;
  std::vector<double> trace;
  std::size_t iterations = 0;
};

std::optional<GmmModel> m_step(const Matrix& rows, const Matrix& resp, double ridge) {
  const auto n = rows.rows();
  const Vector mass = resp.colwise().sum().transpose();
  std::vector<double> weights;
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  for (Eigen::Index c = 0; c < resp.cols(); ++c) {
    if (!(mass(c) >= 1.0)) return std::nullopt;
    weights.push_back(mass(c) / static_cast<double>(n));
    Vector mu = (rows.transpose() * resp.col(c)) / mass(c);
    const Matrix centered = rows.rowwise() - mu.transpose();
    Matrix cov = centered.transpose() * (centered.array().colwise() * resp.col(c).array()).matrix() /
                 mass(c);
    cov = 0.5 * (cov + cov.transpose());
    cov.diagonal().array() += ridge;
    means.push_back(std::move(mu));
    covs.push_back(std::move(cov));
  }
  try {
    return GmmModel(std::move(weights), std::move(means), std::move(covs));
  } catch (const ArgumentError&) {
    return std::nullopt;
  }
}

RestartOutcome run_em(const Matrix& rows, const GmmFitOptions& opt, std::uint64_t restart_seed) {
  RestartOutcome out;
  const auto n = rows.rows();
  const auto k = static_cast<Eigen::Index>(opt.components);

  // Hard k-means assignment supplies the first set of responsibilities.
  const auto clusters = kmeans(rows, opt.components, restart_seed, 1, 20);
  Matrix resp = Matrix::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i)
    resp(i, static_cast<Eigen::Index>(clusters.assignment[static_cast<std::size_t>(i)])) = 1.0;

  std::optional<GmmModel> model = m_step(rows, resp, opt.ridge);
  if (!model) {
    // Tiny clusters: start from the seeded centers with the pooled covariance.
    const Vector mu = rows.colwise().mean().transpose();
    const Matrix centered = rows.rowwise() - mu.transpose();
    Matrix pooled = centered.transpose() * centered / static_cast<double>(n);
    pooled.diagonal().array() += opt.ridge;
    std::vector<Vector> means;
    for (Eigen::Index c = 0; c < k; ++c) means.push_back(clusters.centers.row(c).transpose());
    try {
      model.emplace(std::vector<double>(opt.components, 1.0 / static_cast<double>(k)),
                    std::move(means), std::vector<Matrix>(opt.components, pooled));
    } catch (const ArgumentError&) {
      return out;
    }
  }

  for (std::size_t it = 0;; ++it) {
    const double ll = gmm_e_step(*model, rows, resp, opt.execution).sum();
    if (!std::isfinite(ll)) return {};
    out.trace.push_back(ll);
    out.iterations = it;
    if (it > 0 && ll - out.trace[it - 1] < opt.tolerance) break;
    if (it == opt.max_iter) break;
    auto next = m_step(rows, resp, opt.ridge);
    if (!next) return {};
    model = std::move(next);
  }
  out.model = std::move(model);
  return out;
}

}  // namespace

GmmFit fit_gmm(const Dataset& train, const GmmFitOptions& options) {
  const std::size_t k = options.components;
  if (k < 1) throw FitError("mixture needs at least one component");
  if (train.size() <= k * train.dim())
    throw FitError("GMM with K = " + std::to_string(k) + " needs more than K*d = " +
                   std::to_string(k * train.dim()) + " rows; have " +
                   std::to_string(train.size()));
  if (!(options.ridge >= 0.0)) throw ArgumentError("ridge must be non-negative");

  std::optional<GmmFit> best;
  std::size_t successes = 0;
  for (std::size_t r = 0; r < std::max<std::size_t>(options.restarts, 1); ++r) {
    auto outcome = run_em(train.rows(), options, derive_seed(options.seed, "em-init", r));
    if (!outcome.model) continue;
    ++successes;
    const double ll = outcome.trace.back();
    if (!best || ll > best->log_likelihood)
      best = GmmFit{std::move(*outcome.model), std::move(outcome.trace), ll, outcome.iterations, 0};
  }
  if (!best)
    throw FitError("every EM restart produced a degenerate component (K = " + std::to_string(k) + ")");
  best->successful_restarts = successes;
  return std::move(*best);
}

}  // namespace anomshap

#pragma once

#include <cstdint>

#include "anomshap/detectors.hpp"
#include "anomshap/parallel.hpp"

namespace anomshap {

/// Full-covariance Gaussian mixture; the anomaly score is the energy
/// -log sum_k pi_k N(x; mu_k, Sigma_k).
class GmmModel final : public ScoreModel {
 public:
  /// Validates weights (positive, summing to 1 within 1e-12 after
  /// renormalization of rounding error) and factorizes each covariance.
  /// Throws ArgumentError on shape errors or non-positive-definite input.
  GmmModel(std::vector<double> weights, std::vector<Vector> means, std::vector<Matrix> covariances);

  std::size_t dim() const override { return dim_; }
  std::string name() const override { return "gmm"; }
  Capability capabilities() const override { return Capability::gradient | Capability::marginal; }

  double score(const Vector& x) const override { return energy(x); }
  Vector gradient(const Vector& x) const override { return energy_gradient(x); }
  double marginal_score(const Vector& x, std::span<const std::size_t> subset) const override {
    return marginal_energy(x, subset);
  }

  std::size_t components() const noexcept { return weights_.size(); }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<Vector>& means() const noexcept { return means_; }
  const std::vector<Matrix>& covariances() const noexcept { return covariances_; }
  /// Lower Cholesky factor L with Sigma_k = L L^T.
  const Matrix& cholesky(std::size_t k) const { return factors_[k]; }

  double energy(const Vector& x) const;
  /// sum_k r_k(x) Sigma_k^{-1} (x - mu_k) with posterior responsibilities r_k.
  Vector energy_gradient(const Vector& x) const;
  /// log(pi_k) + log N(x; mu_k, Sigma_k) for each component.
  Vector component_log_densities(const Vector& x) const;

  /// Mixture obtained by restricting every mean and covariance to `subset`.
  GmmModel marginal(std::span<const std::size_t> subset) const;
  /// Energy of the marginal mixture evaluated at x restricted to `subset`.
  double marginal_energy(const Vector& x, std::span<const std::size_t> subset) const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> weights_;
  std::vector<double> log_weights_;
  std::vector<Vector> means_;
  std::vector<Matrix> covariances_;
  std::vector<Matrix> factors_;
  std::vector<double> log_norms_;  // -d/2 log(2 pi) - 1/2 log det Sigma_k
};

struct GmmFitOptions {
  std::size_t components = 2;
  std::uint64_t seed = 0;
  std::size_t max_iter = 500;
  double ridge = 1e-6;
  double tolerance = 1e-7;  // stop when the log-likelihood gain drops below this
  std::size_t restarts = 3;
  Execution execution = Execution::parallel;
};

struct GmmFit {
  GmmModel model;
  /// Total train log-likelihood before each M-step of the kept restart.
  std::vector<double> log_likelihood_trace;
  double log_likelihood = 0.0;
  std::size_t iterations = 0;
  std::size_t successful_restarts = 0;
};

/// EM with k-means++ seeded means. Each M-step adds `ridge` to covariance
/// diagonals. A restart whose component mass falls below one row is
/// abandoned; if every restart degenerates a FitError is thrown.
GmmFit fit_gmm(const Dataset& train, const GmmFitOptions& options);

/// Responsibility kernel used by the E-step: writes per-row posteriors into
/// `resp` (n x K) and returns per-row log-likelihoods. The serial and
/// parallel paths produce identical output.
Vector gmm_e_step(const GmmModel& model, const Matrix& rows, Matrix& resp, Execution exec);

}  // namespace anomshap

#pragma once

#include "anomshap/detectors.hpp"

namespace anomshap {

/// Linear encoder/decoder pair: f(x) = B^T (x - mean), g(z) = mean + B z,
/// scored by the squared reconstruction error.
class SubspaceModel final : public ScoreModel {
 public:
  /// Throws ArgumentError unless 1 <= q < d and B has orthonormal columns
  /// (within 1e-10).
  SubspaceModel(Vector mean, Matrix basis);

  std::size_t dim() const override { return static_cast<std::size_t>(mean_.size()); }
  std::string name() const override { return "subspace"; }
  Capability capabilities() const override { return Capability::gradient | Capability::marginal; }

  double score(const Vector& x) const override { return recon_error(x); }
  Vector gradient(const Vector& x) const override { return recon_error_gradient(x); }
  /// Sum of per-feature squared residuals over `subset`.
  double marginal_score(const Vector& x, std::span<const std::size_t> subset) const override;

  const Vector& mean() const noexcept { return mean_; }
  const Matrix& basis() const noexcept { return basis_; }
  std::size_t latent_dim() const noexcept { return static_cast<std::size_t>(basis_.cols()); }

  Vector residual(const Vector& x) const;
  double recon_error(const Vector& x) const { return residual(x).squaredNorm(); }
  Vector recon_error_gradient(const Vector& x) const { return 2.0 * residual(x); }
  Vector recon_error_per_feature(const Vector& x) const { return residual(x).array().square(); }

 private:
  Vector mean_;
  Matrix basis_;
};

/// Mean plus the top-q principal directions of the training rows.
SubspaceModel fit_subspace(const Dataset& train, std::size_t q);

}  // namespace anomshap

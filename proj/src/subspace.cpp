#include "anomshap/subspace.hpp"

#include "anomshap/errors.hpp"

namespace anomshap {

SubspaceModel::SubspaceModel(Vector mean, Matrix basis) : mean_(std::move(mean)), basis_(std::move(basis)) {
  const auto d = mean_.size();
  if (basis_.rows() != d) throw ArgumentError("basis row count must equal the mean length");
  if (basis_.cols() < 1 || basis_.cols() >= d)
    throw ArgumentError("latent dimension q must satisfy 1 <= q < d");
  const Matrix gram = basis_.transpose() * basis_;
  if ((gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() > 1e-10)
    throw ArgumentError("basis columns are not orthonormal");
}

Vector SubspaceModel::residual(const Vector& x) const {
  const Vector centered = x - mean_;
  return centered - basis_ * (basis_.transpose() * centered);
}

double SubspaceModel::marginal_score(const Vector& x, std::span<const std::size_t> subset) const {
  if (subset.empty()) throw ArgumentError("marginal score needs a non-empty subset");
  const Vector r = residual(x);
  double total = 0.0;
  for (auto i : subset) {
    if (i >= dim()) throw ArgumentError("feature index out of range");
    total += r(static_cast<Eigen::Index>(i)) * r(static_cast<Eigen::Index>(i));
  }
  return total;
}

SubspaceModel fit_subspace(const Dataset& train, std::size_t q) {
  const auto d = train.dim();
  if (q < 1 || q >= d)
    throw ArgumentError("latent dimension q = " + std::to_string(q) + " must satisfy 1 <= q < " +
                        std::to_string(d));
  if (train.size() <= q) throw FitError("subspace fit needs more rows than latent dimensions");
  const Vector mean = train.rows().colwise().mean().transpose();
  const Matrix centered = train.rows().rowwise() - mean.transpose();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(train.size());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) throw FitError("eigendecomposition failed");
  const auto qq = static_cast<Eigen::Index>(q);
  // Eigenvalues come back ascending; take the trailing q columns, largest first.
  Matrix basis = eig.eigenvectors().rightCols(qq).rowwise().reverse();
  return SubspaceModel(mean, std::move(basis));
}

}  // namespace anomshap

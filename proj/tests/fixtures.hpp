#pragma once

#include <cmath>
#include <random>

#include "anomshap/gmm.hpp"
#include "anomshap/subspace.hpp"

namespace fixtures {

using anomshap::Matrix;
using anomshap::Vector;

inline Matrix random_spd(std::size_t d, std::mt19937_64& rng, double floor = 0.3) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix a(d, d);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = n(rng);
  return a * a.transpose() / static_cast<double>(d) + floor * Matrix::Identity(d, d);
}

inline Vector random_vector(std::size_t d, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Vector v(d);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = n(rng);
  return v;
}

inline anomshap::GmmModel random_gmm(std::size_t d, std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::vector<double> w;
  std::vector<Vector> mu;
  std::vector<Matrix> cov;
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    w.push_back(u(rng));
    total += w.back();
    mu.push_back(random_vector(d, rng, 2.0));
    cov.push_back(random_spd(d, rng));
  }
  for (auto& x : w) x /= total;
  return anomshap::GmmModel(w, mu, cov);
}

// Two correlated components at +-1.5 along the diagonal.
inline anomshap::GmmModel two_cluster_gmm(std::size_t d = 6) {
  Matrix c = Matrix::Constant(d, d, 0.5);
  c.diagonal().setOnes();
  return anomshap::GmmModel({0.5, 0.5}, {Vector::Constant(d, 1.5), Vector::Constant(d, -1.5)},
                            {c, c});
}

inline anomshap::SubspaceModel random_subspace(std::size_t d, std::size_t q, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix a(d, q);
  for (std::size_t j = 0; j < q; ++j) a.col(static_cast<Eigen::Index>(j)) = random_vector(d, rng);
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix basis = qr.householderQ() * Matrix::Identity(d, q);
  return anomshap::SubspaceModel(random_vector(d, rng), basis);
}

inline Vector central_difference(const anomshap::ScoreModel& e, const Vector& x, double h = 1e-5) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector a = x, b = x;
    a(i) += h;
    b(i) -= h;
    g(i) = (e.score(a) - e.score(b)) / (2.0 * h);
  }
  return g;
}

inline double relative_error(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

// Brute-force Shapley formula with factorial weights, independent of the
// library's enumeration.
template <class V>
Vector brute_shapley(std::size_t d, V&& v) {
  Vector phi = Vector::Zero(static_cast<Eigen::Index>(d));
  auto fact = [](std::size_t n) {
    double f = 1.0;
    for (std::size_t i = 2; i <= n; ++i) f *= static_cast<double>(i);
    return f;
  };
  const std::uint64_t total = std::uint64_t{1} << d;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::uint64_t s = 0; s < total; ++s) {
      if (s >> i & 1) continue;
      const auto size = static_cast<std::size_t>(__builtin_popcountll(s));
      const double w = fact(size) * fact(d - size - 1) / fact(d);
      phi(static_cast<Eigen::Index>(i)) += w * (v(s | (std::uint64_t{1} << i)) - v(s));
    }
  }
  return phi;
}

}  // namespace fixtures

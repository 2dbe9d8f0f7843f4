#include "anomshap/cluster.hpp"

#include <limits>

#include "anomshap/errors.hpp"
#include "anomshap/rng.hpp"

namespace anomshap {
namespace {

double assign(const Matrix& points, const Matrix& centers, std::vector<std::size_t>& assignment,
              Vector& dist2) {
  double inertia = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
      const double dd = (points.row(i) - centers.row(c)).squaredNorm();
      if (dd < best) {
        best = dd;
        arg = static_cast<std::size_t>(c);
      }
    }
    assignment[static_cast<std::size_t>(i)] = arg;
    dist2(i) = best;
    inertia += best;
  }
  return inertia;
}

}  // namespace

Matrix kmeans_plus_plus(const Matrix& points, std::size_t k, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k == 0) throw ArgumentError("k-means needs k >= 1");
  if (k > n) throw ArgumentError("k = " + std::to_string(k) + " exceeds the " +
                                 std::to_string(n) + " available points");
  auto rng = make_engine(seed, "kmeans++");
  Matrix centers(static_cast<Eigen::Index>(k), points.cols());
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  centers.row(0) = points.row(static_cast<Eigen::Index>(first(rng)));
  Vector dist2 = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (std::size_t c = 1; c < k; ++c) {
    const double total = dist2.sum();
    std::size_t pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      for (pick = 0; pick + 1 < n; ++pick) {
        target -= dist2(static_cast<Eigen::Index>(pick));
        if (target <= 0.0 && dist2(static_cast<Eigen::Index>(pick)) > 0.0) break;
      }
    } else {
      pick = first(rng);
    }
    centers.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(pick));
    dist2 = dist2.cwiseMin(
        (points.rowwise() - centers.row(static_cast<Eigen::Index>(c))).rowwise().squaredNorm());
  }
  return centers;
}

KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                    std::size_t restarts, std::size_t max_iter) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k > n) throw ArgumentError("k = " + std::to_string(k) + " exceeds the " +
                                 std::to_string(n) + " available points");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
    KMeansResult run;
    run.centers = kmeans_plus_plus(points, k, derive_seed(seed, "kmeans", r));
    run.assignment.assign(n, 0);
    Vector dist2(points.rows());
    double inertia = assign(points, run.centers, run.assignment, dist2);
    for (std::size_t it = 0; it < max_iter; ++it) {
      Matrix sums = Matrix::Zero(run.centers.rows(), points.cols());
      std::vector<std::size_t> counts(k, 0);
      for (std::size_t i = 0; i < n; ++i) {
        sums.row(static_cast<Eigen::Index>(run.assignment[i])) += points.row(static_cast<Eigen::Index>(i));
        ++counts[run.assignment[i]];
      }
      for (std::size_t c = 0; c < k; ++c) {
        const auto cc = static_cast<Eigen::Index>(c);
        if (counts[c] > 0) {
          run.centers.row(cc) = sums.row(cc) / static_cast<double>(counts[c]);
        } else {
          Eigen::Index far = 0;
          dist2.maxCoeff(&far);
          run.centers.row(cc) = points.row(far);
          dist2(far) = 0.0;
        }
      }
      const auto previous = run.assignment;
      const double next = assign(points, run.centers, run.assignment, dist2);
      const bool stable = previous == run.assignment;
      inertia = next;
      if (stable) break;
    }
    run.inertia = inertia;
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

}  // namespace anomshap

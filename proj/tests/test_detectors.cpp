#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"

#include "anomshap/cluster.hpp"
#include "anomshap/errors.hpp"
#include "anomshap/model_io.hpp"
#include "anomshap/rng.hpp"

using namespace anomshap;

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

Dataset blobs(const std::vector<Vector>& centers, std::size_t per, double sd, std::uint64_t seed) {
  auto rng = make_engine(seed, "test-blobs");
  std::normal_distribution<double> n(0.0, sd);
  const auto d = static_cast<std::size_t>(centers.front().size());
  Matrix rows(static_cast<Eigen::Index>(centers.size() * per), static_cast<Eigen::Index>(d));
  Eigen::Index r = 0;
  for (const auto& c : centers)
    for (std::size_t i = 0; i < per; ++i, ++r)
      for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j) rows(r, j) = c(j) + n(rng);
  std::vector<std::string> names;
  for (std::size_t j = 0; j < d; ++j) names.push_back("x" + std::to_string(j + 1));
  return Dataset(rows, names, std::vector<FeatureKind>(d, FeatureKind::real),
                 std::vector<Label>(rows.rows(), Label::normal));
}

double direct_density(const GmmModel& g, const Vector& x) {
  double p = 0.0;
  const double d = static_cast<double>(x.size());
  for (std::size_t k = 0; k < g.components(); ++k) {
    const Matrix& s = g.covariances()[k];
    const Vector diff = x - g.means()[k];
    const double quad = diff.dot(s.inverse() * diff);
    p += g.weights()[k] * std::exp(-0.5 * quad) /
         std::sqrt(std::pow(2.0 * std::numbers::pi, d) * s.determinant());
  }
  return p;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_CASE("standard normal energy") {
  GmmModel g({1.0}, {Vector::Zero(1)}, {Matrix::Identity(1, 1)});
  CHECK(g.energy(Vector::Zero(1)) == doctest::Approx(0.918939).epsilon(1e-6));
  CHECK(g.energy(Vector::Zero(1)) == doctest::Approx(kHalfLog2Pi).epsilon(1e-14));
}

TEST_CASE("single Gaussian is minimized at its mean") {
  auto g = fixtures::random_gmm(2, 1, 3);
  const Vector mu = g.means()[0];
  const double at_mean = g.energy(mu);
  for (double a = -1.0; a <= 1.0; a += 0.05)
    for (double b = -1.0; b <= 1.0; b += 0.05) CHECK(g.energy(mu + vec({a, b})) >= at_mean);
  CHECK(g.energy_gradient(mu).norm() < 1e-12);
}

TEST_CASE("symmetric two-component mixture at the midpoint") {
  const double a = 2.0;
  GmmModel g({0.5, 0.5}, {Vector::Constant(1, -a), Vector::Constant(1, a)},
             {Matrix::Identity(1, 1), Matrix::Identity(1, 1)});
  const double density = 0.5 * std::exp(-0.5 * a * a) / std::sqrt(2 * std::numbers::pi) * 2.0;
  CHECK(g.energy(Vector::Zero(1)) == doctest::Approx(-std::log(density)).epsilon(1e-13));
}

TEST_CASE("energy agrees with a direct mixture density") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto g = fixtures::random_gmm(3, 3, seed);
    std::mt19937_64 rng(seed + 100);
    for (int t = 0; t < 10; ++t) {
      Vector x = fixtures::random_vector(3, rng, 1.5);
      const double p = direct_density(g, x);
      CHECK(std::abs(std::exp(-g.energy(x)) - p) <= 1e-10 * p);
    }
  }
}

TEST_CASE("energy stays finite far from every component") {
  auto g = fixtures::random_gmm(4, 3, 1);
  Vector far = Vector::Constant(4, 1e3);
  CHECK(std::isfinite(g.energy(far)));
  CHECK(g.energy_gradient(far).allFinite());
}

TEST_CASE("GMM gradient") {
  GmmModel unit({1.0}, {Vector::Zero(3)}, {Matrix::Identity(3, 3)});
  Vector x = vec({0.3, -1.2, 2.0});
  CHECK((unit.energy_gradient(x) - x).norm() < 1e-14);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto g = fixtures::random_gmm(3, 2, seed);
    std::mt19937_64 rng(seed);
    Vector p = fixtures::random_vector(3, rng, 2.0);
    CHECK(fixtures::relative_error(g.energy_gradient(p), fixtures::central_difference(g, p)) < 1e-5);
  }
}

TEST_CASE("marginal energy") {
  auto g = fixtures::random_gmm(4, 2, 5);
  std::mt19937_64 rng(5);
  Vector x = fixtures::random_vector(4, rng);
  const std::size_t all[] = {0, 1, 2, 3};
  CHECK(g.marginal_energy(x, all) == doctest::Approx(g.energy(x)).epsilon(1e-13));

  GmmModel unit({1.0}, {vec({0.5, -1.0, 2.0})}, {Matrix::Identity(3, 3)});
  Vector y = vec({1.5, 0.0, 0.0});
  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t s[] = {i};
    const double r = y(static_cast<Eigen::Index>(i)) - unit.means()[0](static_cast<Eigen::Index>(i));
    CHECK(unit.marginal_energy(y, s) == doctest::Approx(kHalfLog2Pi + 0.5 * r * r).epsilon(1e-13));
  }
  CHECK_THROWS_AS(g.marginal_energy(x, std::span<const std::size_t>{}), ArgumentError);

  // Nested marginalization equals direct restriction.
  const std::size_t outer[] = {0, 2, 3};
  const std::size_t inner_local[] = {0, 2};
  const std::size_t inner_global[] = {0, 3};
  auto nested = g.marginal(outer).marginal(inner_local);
  Vector xo(3);
  xo << x(0), x(2), x(3);
  Vector xi(2);
  xi << x(0), x(3);
  CHECK(std::abs(nested.energy(xi) - g.marginal_energy(x, inner_global)) < 1e-12);
  CHECK(std::abs(g.marginal(outer).energy(xo) - g.marginal_energy(x, outer)) < 1e-12);
}

TEST_CASE("GMM constructor validation") {
  CHECK_THROWS_AS(GmmModel({1.0}, {Vector::Zero(2)}, {Matrix::Zero(2, 2)}), ArgumentError);
  CHECK_THROWS_AS(GmmModel({0.5, 0.6}, {Vector::Zero(1), Vector::Zero(1)},
                           {Matrix::Identity(1, 1), Matrix::Identity(1, 1)}),
                  ArgumentError);
  CHECK_THROWS_AS(GmmModel({1.0}, {Vector::Zero(2)}, {Matrix::Identity(3, 3)}), ArgumentError);
  auto g = fixtures::random_gmm(3, 2, 9);
  double total = 0.0;
  for (auto w : g.weights()) total += w;
  CHECK(std::abs(total - 1.0) < 1e-12);
  for (std::size_t k = 0; k < g.components(); ++k)
    CHECK(g.cholesky(k).diagonal().minCoeff() > 0.0);
}

TEST_CASE("fit_gmm recovers a standard normal") {
  auto data = generate_synthetic_gaussian(2, 0.0, 10000, 21);
  Matrix one = data.rows().col(0);
  Dataset d1(one, {"x"}, {FeatureKind::real}, data.labels());
  auto fit = fit_gmm(d1, {.components = 1, .seed = 3});
  CHECK(std::abs(fit.model.means()[0](0)) < 0.05);
  CHECK(std::abs(fit.model.covariances()[0](0, 0) - 1.0) < 0.05);
}

TEST_CASE("fit_gmm separates clusters at +-10") {
  auto data = blobs({Vector::Constant(2, -10.0), Vector::Constant(2, 10.0)}, 300, 1.0, 4);
  auto fit = fit_gmm(data, {.components = 2, .seed = 1});
  std::vector<double> firsts = {fit.model.means()[0](0), fit.model.means()[1](0)};
  std::sort(firsts.begin(), firsts.end());
  CHECK(std::abs(firsts[0] + 10.0) < 0.1);
  CHECK(std::abs(firsts[1] - 10.0) < 0.1);
  for (std::size_t i = 1; i < fit.log_likelihood_trace.size(); ++i)
    CHECK(fit.log_likelihood_trace[i] >= fit.log_likelihood_trace[i - 1] - 1e-9);
}

TEST_CASE("fit_gmm preconditions and determinism") {
  auto tiny = blobs({Vector::Zero(2)}, 4, 1.0, 0);
  CHECK_THROWS_AS(fit_gmm(tiny, {.components = 5}), FitError);
  auto data = blobs({Vector::Constant(3, -3.0), Vector::Constant(3, 3.0)}, 100, 1.0, 2);
  auto a = fit_gmm(data, {.components = 2, .seed = 9, .execution = Execution::serial});
  auto b = fit_gmm(data, {.components = 2, .seed = 9, .execution = Execution::parallel});
  CHECK(a.log_likelihood == b.log_likelihood);
  CHECK(a.model.means()[0] == b.model.means()[0]);
  CHECK(a.log_likelihood_trace == b.log_likelihood_trace);
}

TEST_CASE("E-step kernel is schedule independent") {
  auto g = fixtures::random_gmm(5, 3, 2);
  auto data = blobs({Vector::Zero(5)}, 500, 2.0, 6);
  Matrix r1, r2;
  Vector l1 = gmm_e_step(g, data.rows(), r1, Execution::serial);
  Vector l2 = gmm_e_step(g, data.rows(), r2, Execution::parallel);
  CHECK(l1 == l2);
  CHECK(r1 == r2);
  CHECK((r1.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("select_model picks three components on three-cluster data") {
  auto data = blobs({vec({-6, 0}), vec({6, 0}), vec({0, 8})}, 400, 1.0, 8);
  auto valid = blobs({vec({-6, 0}), vec({6, 0}), vec({0, 8})}, 2000, 1.0, 9);
  std::vector<std::shared_ptr<const ScoreModel>> candidates;
  for (std::size_t k : {2, 3, 4})
    candidates.push_back(std::make_shared<GmmModel>(fit_gmm(data, {.components = k, .seed = 1}).model));
  auto chosen = select_model(candidates, valid);
  CHECK(chosen == candidates[1]);
  CHECK(select_model({candidates[0]}, valid) == candidates[0]);
  CHECK_THROWS_AS(select_model({}, valid), ArgumentError);
}

TEST_CASE("subspace recovers a line") {
  auto rng = make_engine(5, "test-line");
  std::normal_distribution<double> n(0.0, 1.0);
  const Vector dir = vec({3.0, 4.0}) / 5.0;
  Matrix rows(2000, 2);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    rows.row(i) = (n(rng) * 3.0 * dir).transpose();
    rows(i, 0) += 1e-3 * n(rng);
    rows(i, 1) += 1e-3 * n(rng);
  }
  Dataset d(rows, {"a", "b"}, {FeatureKind::real, FeatureKind::real},
            std::vector<Label>(2000, Label::normal));
  auto m = fit_subspace(d, 1);
  const double cosine = std::abs(m.basis().col(0).dot(dir));
  CHECK(std::acos(std::min(1.0, cosine)) < 0.01);
  CHECK_THROWS_AS(fit_subspace(d, 2), ArgumentError);
  CHECK_THROWS_AS(fit_subspace(d, 0), ArgumentError);
}

TEST_CASE("subspace reconstruction error against an eigendecomposition oracle") {
  auto data = generate_synthetic_gaussian(4, 0.0, 3000, 12);
  auto m = fit_subspace(data, 1);
  const Matrix& b = m.basis();
  CHECK(((b.transpose() * b) - Matrix::Identity(1, 1)).cwiseAbs().maxCoeff() < 1e-10);
  Vector mean = data.rows().colwise().mean().transpose();
  Matrix centered = data.rows().rowwise() - mean.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(centered.transpose() * centered);
  Vector top = es.eigenvectors().col(3);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 10; ++t) {
    Vector x = fixtures::random_vector(4, rng);
    Vector c = x - mean;
    const double oracle = (c - top * top.dot(c)).squaredNorm();
    CHECK(std::abs(m.recon_error(x) - oracle) < 1e-8);
  }
}

TEST_CASE("subspace score identities") {
  auto m = fixtures::random_subspace(5, 2, 4);
  CHECK(m.recon_error(m.mean()) == 0.0);
  CHECK(m.recon_error_gradient(m.mean()).norm() == 0.0);
  Vector in_span = m.mean() + m.basis() * vec({1.5, -0.7});
  CHECK(m.recon_error(in_span) < 1e-20);
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    Vector x = fixtures::random_vector(5, rng, 2.0);
    CHECK(std::abs(m.recon_error_per_feature(x).sum() - m.recon_error(x)) < 1e-10);
    CHECK(fixtures::relative_error(m.recon_error_gradient(x), fixtures::central_difference(m, x)) < 1e-5);
    const std::size_t s[] = {1, 3};
    Vector pf = m.recon_error_per_feature(x);
    CHECK(m.marginal_score(x, s) == doctest::Approx(pf(1) + pf(3)));
  }
  CHECK_THROWS_AS(SubspaceModel(Vector::Zero(3), Matrix::Ones(3, 1)), ArgumentError);
  CHECK_THROWS_AS(SubspaceModel(Vector::Zero(2), Matrix::Identity(2, 2)), ArgumentError);
}

TEST_CASE("capability errors from CallableScore") {
  CallableScore plain(2, "plain", [](const Vector& x) { return x.squaredNorm(); });
  CHECK_FALSE(plain.supports(Capability::gradient));
  CHECK_THROWS_AS(plain.gradient(Vector::Zero(2)), CapabilityError);
  const std::size_t s[] = {0};
  CHECK_THROWS_AS(plain.marginal_score(Vector::Zero(2), s), CapabilityError);
}

TEST_CASE("kmeans finds separated blobs") {
  auto data = blobs({vec({-5, -5}), vec({5, 5})}, 200, 0.5, 3);
  auto r = kmeans(data.rows(), 2, 1);
  std::vector<double> xs = {r.centers(0, 0), r.centers(1, 0)};
  std::sort(xs.begin(), xs.end());
  CHECK(std::abs(xs[0] + 5) < 0.2);
  CHECK(std::abs(xs[1] - 5) < 0.2);
  CHECK_THROWS_AS(kmeans(data.rows().topRows(3), 4, 0), ArgumentError);
}

TEST_CASE("model bundle round trip") {
  auto g = std::make_shared<GmmModel>(fixtures::random_gmm(3, 2, 7));
  ModelBundle bundle{g, {{"a", FeatureKind::real}, {"b", FeatureKind::real}, {"c", FeatureKind::binary}},
                     NormStats{vec({1, 2, 0}), vec({0.5, 3, 1})}, {{"seed", "7"}}};
  std::stringstream buf;
  write_bundle(buf, bundle);
  auto back = read_bundle(buf);
  auto* h = dynamic_cast<const GmmModel*>(back.model.get());
  REQUIRE(h);
  Vector x = vec({0.1, -0.4, 1.0});
  CHECK(h->energy(x) == g->energy(x));
  CHECK(back.features[2].kind == FeatureKind::binary);
  CHECK(back.norm_stats->std == bundle.norm_stats->std);
  CHECK(back.metadata.at("seed") == "7");

  std::stringstream again;
  write_bundle(again, bundle);
  CHECK_THROWS_AS(read_bundle(again, 4), ModelFormatError);

  auto s = std::make_shared<SubspaceModel>(fixtures::random_subspace(4, 2, 1));
  std::stringstream sbuf;
  write_bundle(sbuf, ModelBundle{s, {{"a", FeatureKind::real}, {"b", FeatureKind::real},
                                     {"c", FeatureKind::real}, {"d", FeatureKind::real}}, std::nullopt, {}});
  auto sback = read_bundle(sbuf, 4);
  Vector y = vec({1, 2, 3, 4});
  CHECK(sback.model->score(y) == s->score(y));
  CHECK_FALSE(sback.norm_stats);

  auto hidden = std::make_shared<RestrictedModel>(g, Capability::gradient);
  CHECK_FALSE(hidden->supports(Capability::marginal));
  const std::size_t first[] = {0};
  CHECK_THROWS_AS(hidden->marginal_score(x, first), CapabilityError);
  CHECK(hidden->gradient(x) == g->gradient(x));
  std::stringstream hbuf;
  write_bundle(hbuf, ModelBundle{hidden, bundle.features, bundle.norm_stats, {}});
  auto hback = read_bundle(hbuf);
  CHECK(hback.model->capabilities() == Capability::gradient);
  CHECK(hback.model->score(x) == g->score(x));

  std::stringstream junk("not a model\n");
  CHECK_THROWS_AS(read_bundle(junk), ModelFormatError);
}

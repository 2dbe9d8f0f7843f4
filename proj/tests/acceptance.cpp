// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 on any FAIL.
#include <boost/math/distributions/chi_squared.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include "fixtures.hpp"

#include "anomshap/bench.hpp"
#include "anomshap/rng.hpp"

using namespace anomshap;

namespace {

enum class Outcome { pass, fail, skip };

struct Verdict {
  Outcome outcome;
  std::string detail;
};

Verdict pass_if(bool ok, std::string detail) {
  return {ok ? Outcome::pass : Outcome::fail, std::move(detail)};
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

Vector brute(const CharacteristicFn& v) {
  const auto d = v.dim();
  return fixtures::brute_shapley(d, [&](std::uint64_t b) { return v.evaluate(Coalition::from_bits(d, b)); });
}

FunctionCharFn table_game(std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  auto table = std::make_shared<std::vector<double>>(std::size_t{1} << d);
  for (auto& x : *table) x = n(rng);
  return FunctionCharFn(d, [table](const Coalition& s) {
    std::uint64_t bits = 0;
    for (auto i : s.members()) bits |= std::uint64_t{1} << i;
    return (*table)[bits];
  });
}

double harmonic_mean_rr(std::size_t d) {
  double h = 0.0;
  for (std::size_t k = 1; k <= d; ++k) h += 1.0 / static_cast<double>(k);
  return h / static_cast<double>(d);
}

// Normal rows from the correlated Gaussian plus 100 single-feature anomalies,
// split and z-scored.
DataSplits synthetic_splits(std::uint64_t seed) {
  const std::size_t d = 6;
  auto normal = generate_synthetic_gaussian(d, 0.9, 4000, seed);
  auto pool = generate_synthetic_gaussian(d, 0.9, 100, derive_seed(seed, "synthetic", 1));
  Matrix rows(4100, static_cast<Eigen::Index>(d));
  rows.topRows(4000) = normal.rows();
  std::vector<Label> labels(4000, Label::normal);
  for (std::size_t i = 0; i < 100; ++i) {
    auto rec = inject_anomaly(pool.row(i), 1, normal.feature_kinds(), derive_seed(seed, "inject", i), i);
    rows.row(static_cast<Eigen::Index>(4000 + i)) = rec.perturbed_point.transpose();
    labels.push_back(Label::anomalous);
  }
  Dataset all(rows, normal.feature_names(), normal.feature_kinds(), labels);
  return normalize(split(all, 0.2, seed));
}

std::shared_ptr<const ScoreModel> select_gmm(const DataSplits& s, std::uint64_t seed) {
  std::vector<std::shared_ptr<const ScoreModel>> candidates;
  for (std::size_t k : {2, 3, 4})
    candidates.push_back(std::make_shared<GmmModel>(fit_gmm(s.train, {.components = k, .seed = seed}).model));
  return select_model(candidates, s.valid);
}

struct Synthetic {
  DataSplits splits;
  std::shared_ptr<const ScoreModel> gmm;
};

const Synthetic& synthetic() {
  static const Synthetic s = [] {
    auto splits = synthetic_splits(2024);
    auto gmm = select_gmm(splits, 2024);
    return Synthetic{std::move(splits), std::move(gmm)};
  }();
  return s;
}

// --------------------------------------------------------------------------

Verdict exact_equivalence() {
  double worst = 0.0;
  std::size_t games = 0;
  for (std::size_t d = 2; d <= 8; ++d) {
    for (std::uint64_t t = 0; t < 50; ++t) {
      std::unique_ptr<CharacteristicFn> v;
      std::unique_ptr<GmmModel> e;
      std::mt19937_64 rng(1000 * d + t);
      switch (t % 3) {
        case 0:
          v = std::make_unique<FunctionCharFn>(table_game(d, 1000 * d + t));
          break;
        case 1: {
          e = std::make_unique<GmmModel>(fixtures::random_gmm(d, 2, 1000 * d + t));
          Vector x = fixtures::random_vector(d, rng, 2.0);
          v = std::make_unique<AshCharFn>(*e, ash_prepare(*e, x, 0.01));
          break;
        }
        default: {
          e = std::make_unique<GmmModel>(fixtures::random_gmm(d, 3, 1000 * d + t));
          Vector x = fixtures::random_vector(d, rng, 2.0);
          ReferenceSet refs{{fixtures::random_vector(d, rng), fixtures::random_vector(d, rng),
                             fixtures::random_vector(d, rng)},
                            ReferenceOrigin::given};
          v = std::make_unique<ReferenceCharFn>(*e, x, refs, "ref");
        }
      }
      auto fit = attribute(*v, {.exhaustive = true});
      worst = std::max(worst, (fit.phi - brute(*v)).cwiseAbs().maxCoeff());
      ++games;
    }
  }
  return pass_if(worst < 1e-8, std::to_string(games) + " games, max |dphi| = " + fmt(worst));
}

Verdict efficiency_and_dummy() {
  double worst_eff = 0.0, worst_dummy = 0.0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const std::size_t d = 3 + t % 5;
    auto e = fixtures::random_gmm(d, 2, 5000 + t);
    std::mt19937_64 rng(5000 + t);
    Vector x = fixtures::random_vector(d, rng, 2.0);
    Matrix rows(40, static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < 40; ++i) rows.row(i) = fixtures::random_vector(d, rng).transpose();
    std::vector<std::string> names;
    for (std::size_t j = 0; j < d; ++j) names.push_back("f" + std::to_string(j));
    Dataset train(rows, names, std::vector<FeatureKind>(d, FeatureKind::real),
                  std::vector<Label>(40, Label::normal));
    const double target = e.score(x);
    AttributeConfig cfg{.m = 256, .seed = t};
    ReferenceShapConfig rcfg{.k = 8, .attribute = cfg};
    std::vector<Attribution> results = {
        attribute_ash(e, x, 0.01, cfg),
        attribute_ash(e, x, 0.01, {.exhaustive = true}),
        ksh_attribution(e, x, train, rcfg),
        wksh_attribution(e, x, train, rcfg),
        exact_shapley(AshCharFn(e, ash_prepare(e, x, 0.01))),
        exact_shapley(ReferenceCharFn(e, x, build_references(ReferenceOrigin::train_mean, train, std::nullopt, 1, 0), "mean")),
    };
    for (const auto& a : results) worst_eff = std::max(worst_eff, std::abs(a.phi0 + a.phi.sum() - target));

    // the score ignores the last coordinate
    const std::size_t inert = d - 1;
    std::vector<std::size_t> kept(d - 1);
    std::iota(kept.begin(), kept.end(), 0);
    auto marginal = std::make_shared<GmmModel>(e.marginal(kept));
    CallableScore blind(d, "blind", [marginal, d](const Vector& y) { return marginal->energy(y.head(static_cast<Eigen::Index>(d - 1))); });
    ReferenceSet refs{{fixtures::random_vector(d, rng), fixtures::random_vector(d, rng)}, ReferenceOrigin::given};
    auto fit = attribute(ReferenceCharFn(blind, x, refs, "ref"), {.exhaustive = true});
    worst_dummy = std::max(worst_dummy, std::abs(fit.phi(static_cast<Eigen::Index>(inert))));
  }
  return pass_if(worst_eff < 1e-6 && worst_dummy < 1e-8,
                 "max efficiency gap " + fmt(worst_eff) + ", max inert |phi| " + fmt(worst_dummy));
}

Verdict gradient_correctness() {
  double worst_gmm = 0.0, worst_sub = 0.0;
  auto relative = [](const Vector& g, const Vector& fd) {
    return (g - fd).norm() / std::max(fd.norm(), 1e-12);
  };
  for (std::uint64_t t = 0; t < 100; ++t) {
    const std::size_t d = 2 + t % 5;
    std::mt19937_64 rng(7000 + t);
    auto g = fixtures::random_gmm(d, 1 + t % 3, 7000 + t);
    Vector x = fixtures::random_vector(d, rng, 2.0);
    worst_gmm = std::max(worst_gmm, relative(g.energy_gradient(x), fixtures::central_difference(g, x)));
    auto s = fixtures::random_subspace(d, 1 + t % (d - 1), 7000 + t);
    Vector y = fixtures::random_vector(d, rng, 2.0);
    worst_sub = std::max(worst_sub, relative(s.recon_error_gradient(y), fixtures::central_difference(s, y)));
  }
  return pass_if(worst_gmm < 1e-5 && worst_sub < 1e-5,
                 "max relative error gmm " + fmt(worst_gmm) + ", subspace " + fmt(worst_sub));
}

Verdict em_soundness() {
  double worst_drop = 0.0, worst_mean = 0.0;
  for (std::uint64_t t = 0; t < 5; ++t) {
    const std::size_t d = 2 + t % 2, k = 2 + t % 2;
    auto rng = make_engine(t, "acceptance-em");
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<Vector> truth;
    for (std::size_t c = 0; c < k; ++c) {
      Vector mu = Vector::Zero(static_cast<Eigen::Index>(d));
      mu(static_cast<Eigen::Index>(c % d)) = 6.0 * static_cast<double>(c + 1) / 2.0 * (c % 2 ? -1.0 : 1.0);
      mu(0) += 7.0 * static_cast<double>(c);
      truth.push_back(mu);
    }
    const std::size_t per = 5000;
    Matrix rows(static_cast<Eigen::Index>(k * per), static_cast<Eigen::Index>(d));
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t i = 0; i < per; ++i)
        for (std::size_t j = 0; j < d; ++j)
          rows(static_cast<Eigen::Index>(c * per + i), static_cast<Eigen::Index>(j)) =
              truth[c](static_cast<Eigen::Index>(j)) + n(rng);
    std::vector<std::string> names;
    for (std::size_t j = 0; j < d; ++j) names.push_back("x" + std::to_string(j));
    Dataset data(rows, names, std::vector<FeatureKind>(d, FeatureKind::real),
                 std::vector<Label>(k * per, Label::normal));
    auto fit = fit_gmm(data, {.components = k, .seed = t});
    const auto& ll = fit.log_likelihood_trace;
    for (std::size_t i = 1; i < ll.size(); ++i) worst_drop = std::max(worst_drop, ll[i - 1] - ll[i]);
    for (const auto& mu : truth) {
      double nearest = 1e300;
      for (const auto& m : fit.model.means()) nearest = std::min(nearest, (m - mu).norm());
      worst_mean = std::max(worst_mean, nearest);
    }
  }
  return pass_if(worst_drop <= 1e-9 && worst_mean < 0.1,
                 "largest log-likelihood drop " + fmt(worst_drop) + ", max mean error " + fmt(worst_mean));
}

Verdict sampler_fidelity() {
  const std::size_t d = 6, draws = 100000;
  auto mass = SubsetSampler::size_mass(d);
  std::vector<double> counts(d, 0.0);
  for (const auto& s : SubsetSampler(d, draws, 31).draw()) counts[s.size()] += 1.0;
  double chi2 = 0.0;
  for (std::size_t s = 0; s < d; ++s) {
    const double expected = mass[s] * static_cast<double>(draws);
    chi2 += (counts[s] - expected) * (counts[s] - expected) / expected;
  }
  boost::math::chi_squared dist(static_cast<double>(d - 1));
  const double p = boost::math::cdf(boost::math::complement(dist, chi2));
  return pass_if(p > 0.01, "chi2 = " + fmt(chi2) + ", p = " + fmt(p));
}

Verdict estimator_convergence() {
  auto e = fixtures::two_cluster_gmm(6);
  Vector x = Vector::Constant(6, 1.5);
  x(1) = -0.5;
  x(4) = 3.2;
  AshCharFn v(e, ash_prepare(e, x, 0.01));
  const Vector exact = exact_shapley(v).phi;
  std::vector<double> rmse;
  std::ostringstream detail;
  for (std::size_t m : {64, 256, 1024, 4096}) {
    double acc = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto a = attribute(v, {.m = m, .seed = seed});
      acc += std::sqrt((a.phi - exact).squaredNorm() / 6.0);
    }
    rmse.push_back(acc / 20.0);
    detail << "m=" << m << ":" << fmt(rmse.back()) << " ";
  }
  bool monotone = true;
  for (std::size_t i = 1; i < rmse.size(); ++i) monotone = monotone && rmse[i] <= rmse[i - 1];
  return pass_if(monotone, detail.str());
}

BenchConfig localization_config() {
  BenchConfig cfg;
  cfg.n_trials = 100;
  cfg.d_anom = 1;
  cfg.seed = 7;
  cfg.gamma = 0.01;
  return cfg;
}

Verdict synthetic_localization() {
  const auto& syn = synthetic();
  const Strategy strategies[] = {Strategy::ash, Strategy::random};
  auto cfg = localization_config();
  auto res = run_synth_benchmark(syn.splits, *syn.gmm, strategies, cfg);
  cfg.exact_ash = true;
  const Strategy ash_only[] = {Strategy::ash};
  auto oracle = run_synth_benchmark(syn.splits, *syn.gmm, ash_only, cfg);
  const double ash = *res.reports[0].mrr;
  const double random = *res.reports[1].mrr;
  const double exact = *oracle.reports[0].mrr;
  return pass_if(ash >= 0.6 && ash > harmonic_mean_rr(6),
                 "ASH MRR " + fmt(ash) + " (exact-Shapley oracle " + fmt(exact) + "), random " +
                     fmt(random) + ", H6/6 " + fmt(harmonic_mean_rr(6)));
}

Verdict gamma_insensitivity() {
  const auto& syn = synthetic();
  const double grid[] = {0.001, 0.01, 0.1};
  auto rows = gamma_sweep(syn.splits, *syn.gmm, grid, localization_config());
  double lo = 1.0, hi = 0.0;
  std::ostringstream detail;
  for (const auto& r : rows) {
    lo = std::min(lo, *r.report.mrr);
    hi = std::max(hi, *r.report.mrr);
    detail << "gamma=" << r.gamma << ":" << fmt(*r.report.mrr) << " ";
  }
  detail << "spread " << fmt(hi - lo);
  return pass_if(hi - lo <= 0.1, detail.str());
}

Verdict ig_completeness() {
  const auto& syn = synthetic();
  auto subspace = fit_subspace(syn.splits.train, 2);
  const Vector r = syn.splits.train.rows().colwise().mean().transpose();
  std::mt19937_64 rng(99);
  double worst = 0.0;
  for (const ScoreModel* e : {syn.gmm.get(), static_cast<const ScoreModel*>(&subspace)}) {
    for (int t = 0; t < 100; ++t) {
      Vector x = fixtures::random_vector(6, rng, 1.5);
      auto ig = integrated_gradients(*e, x, r, 64);
      const double gap = e->score(x) - e->score(r);
      worst = std::max(worst, std::abs(ig.sum() - gap) / std::max(1.0, std::abs(gap)));
    }
  }
  return pass_if(worst <= 1e-3, "max scaled completeness gap " + fmt(worst));
}

Verdict thyroid() {
  const char* path = std::getenv("ANOMSHAP_THYROID_CSV");
  if (!path) return {Outcome::skip, "set ANOMSHAP_THYROID_CSV to a local Thyroid CSV to run"};
  auto splits = normalize(split(load_csv(path), 0.2, 1));
  auto gmm = select_gmm(splits, 1);
  const Strategy ash[] = {Strategy::ash};
  auto cfg = localization_config();
  const double mrr = *run_synth_benchmark(splits, *gmm, ash, cfg).reports[0].mrr;
  return pass_if(std::abs(mrr - 0.903) <= 0.10, "ASH MRR " + fmt(mrr) + " vs 0.903");
}

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Verdict()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "exact Shapley equivalence", 30, exact_equivalence},
      {2, "efficiency and dummy", 30, efficiency_and_dummy},
      {3, "gradient correctness", 5, gradient_correctness},
      {4, "EM soundness", 60, em_soundness},
      {5, "sampler fidelity", 10, sampler_fidelity},
      {6, "estimator convergence", 300, estimator_convergence},
      {7, "synthetic localization", 300, synthetic_localization},
      {8, "gamma insensitivity", 600, gamma_insensitivity},
      {9, "IG completeness", 10, ig_completeness},
      {10, "Thyroid MRR", 900, thyroid},
  };
  bool ok = true;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {Outcome::fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (v.outcome == Outcome::pass && secs > c.budget_s) {
      v.outcome = Outcome::fail;
      v.detail += "; over time budget";
    }
    const char* tag = v.outcome == Outcome::pass ? "PASS" : v.outcome == Outcome::fail ? "FAIL" : "SKIP";
    if (v.outcome == Outcome::fail) ok = false;
    std::cout << tag << "  " << std::setw(2) << c.id << "  " << std::left << std::setw(26) << c.name
              << std::right << " " << std::fixed << std::setprecision(2) << std::setw(7) << secs
              << "s / " << std::setprecision(0) << c.budget_s << "s  " << v.detail << std::endl;
    std::cout.unsetf(std::ios::floatfield);
  }
  return ok ? 0 : 1;
}

#include "anomshap/shapley.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <numeric>

#include "anomshap/rng.hpp"

namespace anomshap {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

/// |S|! (d-|S|-1)! / d! for each size.
std::vector<double> marginal_weights(std::size_t d) {
  std::vector<double> w(d);
  const double log_d_fact = std::lgamma(static_cast<double>(d) + 1.0);
  for (std::size_t s = 0; s < d; ++s)
    w[s] = std::exp(std::lgamma(static_cast<double>(s) + 1.0) +
                    std::lgamma(static_cast<double>(d - s)) - log_d_fact);
  return w;
}

}  // namespace

Attribution exact_shapley(const CharacteristicFn& v, Execution exec) {
  const auto start = Clock::now();
  const std::size_t d = v.dim();
  if (d == 0) throw ArgumentError("characteristic function has no players");
  if (d > kExactShapleyMaxDim)
    throw ArgumentError("exact Shapley enumeration is limited to d <= " +
                        std::to_string(kExactShapleyMaxDim) + "; got " + std::to_string(d));
  const std::size_t n = std::size_t{1} << d;
  std::vector<double> values(n);
  for_each_index(exec, n, [&](std::size_t bits) {
    values[bits] = v.evaluate(Coalition::from_bits(d, bits));
  });

  const auto w = marginal_weights(d);
  Attribution out;
  out.strategy = v.name();
  out.phi0 = values[0];
  out.phi = Vector::Zero(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    double acc = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      if (s & bit) continue;
      acc += w[static_cast<std::size_t>(std::popcount(s))] * (values[s | bit] - values[s]);
    }
    out.phi(static_cast<Eigen::Index>(i)) = acc;
  }
  out.m = n;
  out.elapsed_ms = elapsed_ms(start);
  return out;
}

SubsetSampler::SubsetSampler(std::size_t d, std::size_t m, std::uint64_t seed)
    : d_(d), m_(m), seed_(seed) {
  if (d < 1) throw ArgumentError("sampler needs d >= 1");
  if (m < 1) throw ArgumentError("sampler needs m >= 1");
}

std::vector<double> SubsetSampler::size_mass(std::size_t d) {
  if (d < 1) throw ArgumentError("size mass needs d >= 1");
  std::vector<double> mass(d);
  if (d == 1) {
    mass[0] = 1.0;
    return mass;
  }
  for (std::size_t s = 0; s < d; ++s)
    mass[s] = static_cast<double>(d - 1) / static_cast<double>(d - s);
  const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  for (double& p : mass) p /= total;
  return mass;
}

std::vector<Coalition> SubsetSampler::draw() const {
  const auto mass = size_mass(d_);
  std::discrete_distribution<std::size_t> size_dist(mass.begin(), mass.end());
  auto rng = make_engine(seed_, "sampler");
  std::vector<std::size_t> order(d_);
  std::vector<Coalition> out;
  out.reserve(m_);
  for (std::size_t j = 0; j < m_; ++j) {
    const std::size_t s = size_dist(rng);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < s; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, d_ - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    out.push_back(Coalition::from_members(d_, std::span<const std::size_t>(order.data(), s)));
  }
  return out;
}

std::vector<Coalition> sample_subsets(const SubsetSampler& sampler) {
  auto out = sampler.draw();
  out.push_back(Coalition(sampler.dim()));
  out.push_back(Coalition::full(sampler.dim()));
  return out;
}

std::vector<double> evaluate_coalitions(const CharacteristicFn& v,
                                        std::span<const Coalition> coalitions, Execution exec) {
  std::vector<double> out(coalitions.size());
  for_each_index(exec, coalitions.size(), [&](std::size_t j) { out[j] = v.evaluate(coalitions[j]); });
  return out;
}

double shapley_kernel_weight(std::size_t d, std::size_t s) {
  if (s == 0 || s >= d) throw ArgumentError("Shapley kernel is finite only for 0 < |S| < d");
  const double log_binom = std::lgamma(static_cast<double>(d) + 1.0) -
                           std::lgamma(static_cast<double>(s) + 1.0) -
                           std::lgamma(static_cast<double>(d - s) + 1.0);
  return static_cast<double>(d - 1) /
         (std::exp(log_binom) * static_cast<double>(s) * static_cast<double>(d - s));
}

Attribution fit_least_squares(std::span<const CoalitionValue> values, double v_empty,
                              double v_full, std::size_t d) {
  if (d == 0) throw ArgumentError("least-squares fit needs d >= 1");
  Attribution out;
  out.phi0 = v_empty;
  const double total = v_full - v_empty;
  if (d == 1) {
    out.phi = Vector::Constant(1, total);
    return out;
  }

  // Unknowns phi_0..phi_{d-2}; phi_{d-1} = total - sum of the others.
  std::vector<const CoalitionValue*> rows;
  for (const auto& cv : values) {
    if (cv.coalition.dim() != d) throw ArgumentError("coalition dimension does not match d");
    if (cv.coalition.empty() || cv.coalition.is_full()) continue;  // residual is identically 0
    if (!(cv.weight > 0.0)) continue;
    rows.push_back(&cv);
  }
  const auto p = static_cast<Eigen::Index>(d - 1);
  const auto r = static_cast<Eigen::Index>(rows.size());
  if (r < p)
    throw RankDeficientError("only " + std::to_string(r) + " informative coalitions for " +
                             std::to_string(p) + " free coefficients");
  Matrix design(r, p);
  Vector target(r);
  for (Eigen::Index j = 0; j < r; ++j) {
    const auto& cv = *rows[static_cast<std::size_t>(j)];
    const double sw = std::sqrt(cv.weight);
    const double last = cv.coalition.contains(d - 1) ? 1.0 : 0.0;
    for (Eigen::Index i = 0; i < p; ++i)
      design(j, i) = sw * ((cv.coalition.contains(static_cast<std::size_t>(i)) ? 1.0 : 0.0) - last);
    target(j) = sw * (cv.value - v_empty - last * total);
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < p)
    throw RankDeficientError("coalition design has rank " + std::to_string(qr.rank()) +
                             " < " + std::to_string(p));
  const Vector head = qr.solve(target);
  out.phi.resize(static_cast<Eigen::Index>(d));
  out.phi.head(p) = head;
  out.phi(p) = total - head.sum();
  return out;
}

Attribution attribute(const CharacteristicFn& v, const AttributeConfig& config) {
  const auto start = Clock::now();
  const std::size_t d = v.dim();
  if (d == 0) throw ArgumentError("characteristic function has no players");
  const Coalition empty(d);
  const Coalition full = Coalition::full(d);

  Attribution out;
  if (d == 1) {
    out = fit_least_squares({}, v.evaluate(empty), v.evaluate(full), d);
    out.m = 0;
  } else if (config.exhaustive) {
    if (d > kExhaustiveFitMaxDim)
      throw ArgumentError("exhaustive fit is limited to d <= " + std::to_string(kExhaustiveFitMaxDim));
    const std::size_t n = std::size_t{1} << d;
    std::vector<Coalition> coalitions;
    coalitions.reserve(n);
    for (std::size_t bits = 0; bits < n; ++bits) coalitions.push_back(Coalition::from_bits(d, bits));
    const auto values = evaluate_coalitions(v, coalitions, config.execution);
    std::vector<CoalitionValue> rows;
    for (std::size_t bits = 1; bits + 1 < n; ++bits)
      rows.push_back({coalitions[bits], values[bits],
                      shapley_kernel_weight(d, coalitions[bits].size())});
    out = fit_least_squares(rows, values.front(), values.back(), d);
    out.m = n;
  } else {
    const std::size_t m = config.m.value_or(default_sample_count(d));
    const SubsetSampler sampler(d, m, config.seed);
    const auto coalitions = sample_subsets(sampler);
    const auto values = evaluate_coalitions(v, coalitions, config.execution);
    const double v_empty = values[m];
    const double v_full = values[m + 1];
    auto weight_of = [&](const Coalition& s) {
      if (config.weighting == SampleWeighting::uniform || s.empty()) return 1.0;
      return 1.0 / static_cast<double>(s.size());
    };
    std::vector<CoalitionValue> rows;
    rows.reserve(m + d);
    for (std::size_t j = 0; j < m; ++j) rows.push_back({coalitions[j], values[j], weight_of(coalitions[j])});
    try {
      out = fit_least_squares(rows, v_empty, v_full, d);
    } catch (const RankDeficientError&) {
      std::vector<Coalition> singles;
      for (std::size_t i = 0; i < d; ++i) singles.push_back(Coalition::of(d, {i}));
      const auto extra = evaluate_coalitions(v, singles, config.execution);
      for (std::size_t i = 0; i < d; ++i) rows.push_back({singles[i], extra[i], 1.0});
      try {
        out = fit_least_squares(rows, v_empty, v_full, d);
      } catch (const RankDeficientError& e) {
        throw EstimationError(std::string("least-squares design stays rank deficient: ") + e.what());
      }
    }
    out.m = m;
  }
  out.strategy = v.name();
  out.seed = config.seed;
  out.elapsed_ms = elapsed_ms(start);
  return out;
}

Attribution attribute_ash(const ScoreModel& e, const Vector& x, double gamma,
                          const AttributeConfig& config, const LbfgsOptions& optimizer) {
  const auto start = Clock::now();
  AshCharFn v(e, ash_prepare(e, x, gamma, optimizer, config.execution));
  Attribution out = attribute(v, config);
  out.gamma = gamma;
  out.elapsed_ms = elapsed_ms(start);
  return out;
}

}  // namespace anomshap

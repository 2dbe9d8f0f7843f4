#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "anomshap/baselines.hpp"

namespace anomshap {

enum class Strategy { ash, ig, ksh, wksh, marg, sfe, random, oracle };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& text);
/// Comma-separated list, e.g. "ash,ig,ksh".
std::vector<Strategy> parse_strategies(const std::string& text);

/// 1-based rank of `truth` when features are sorted by descending score;
/// ties are broken by ascending feature index.
std::size_t rank_of(const Vector& scores, std::size_t truth);
double reciprocal_rank(const Vector& scores, std::size_t truth);
int hits_at_n(const Vector& scores, std::size_t truth, std::size_t n);
/// Mann-Whitney AUROC with the truth set as positives; ties count 1/2.
/// Throws MetricError if the truth set is empty or covers every feature.
double auroc(const Vector& scores, std::span<const std::size_t> truth);
/// Clamps negative attributions to zero.
Vector positive_phi_transform(const Vector& phi);

struct BenchConfig {
  std::size_t d_anom = 1;
  std::size_t n_trials = 100;
  std::uint64_t seed = 0;
  double gamma = 0.01;
  std::optional<std::size_t> m;
  std::size_t ig_steps = 64;
  std::size_t k_refs = 8;
  bool positive_phi = false;
  /// For d_anom > 1, also report MRR and hits@n using the best-ranked
  /// perturbed feature.
  bool multi_truth_mrr = false;
  /// Replace sampled ASH estimates with exact enumeration (small d only).
  bool exact_ash = false;
  std::vector<std::size_t> hits_cutoffs = {1, 3};
  SampleWeighting weighting = SampleWeighting::importance;
  Execution execution = Execution::parallel;  // across trials
  LbfgsOptions optimizer;
};

struct TrialResult {
  std::size_t trial = 0;
  std::size_t base_row = 0;
  std::vector<std::size_t> perturbed_indices;
  Strategy strategy = Strategy::ash;
  std::string detector;
  Vector scores;
};

struct MetricsReport {
  std::string strategy;
  std::string detector;
  std::optional<double> mrr;
  std::map<std::size_t, double> hits_at;
  std::optional<double> auroc;
  std::size_t n_trials = 0;
  std::size_t d_anom = 0;
  std::uint64_t seed = 0;
  std::optional<double> gamma;
};

struct BenchResult {
  std::vector<MetricsReport> reports;  // one per strategy, in request order
  std::vector<TrialResult> trials;     // trial-major, strategy-minor
};

/// Synthetic-anomaly protocol on splits.test_norm: each trial draws a base
/// row (with replacement), perturbs d_anom features and asks every strategy
/// to attribute the perturbed point. Trial t uses seeds derived from
/// (seed, t), so trials are paired across strategies, gamma values and
/// thread schedules.
BenchResult run_synth_benchmark(const DataSplits& splits, const ScoreModel& detector,
                                std::span<const Strategy> strategies, const BenchConfig& config);

struct GammaSweepRow {
  double gamma = 0.0;
  MetricsReport report;
};

/// ASH benchmark at each gamma with identical trial seeds.
std::vector<GammaSweepRow> gamma_sweep(const DataSplits& splits, const ScoreModel& detector,
                                       std::span<const double> gammas, const BenchConfig& config);

/// Columns: strategy,detector,metric,value,n_trials,seed.
void write_report_csv(std::ostream& out, const std::vector<MetricsReport>& reports);
void write_trials_csv(std::ostream& out, const std::vector<TrialResult>& trials);
std::string format_report_table(const std::vector<MetricsReport>& reports);
std::string format_gamma_table(const std::vector<GammaSweepRow>& rows);
std::vector<MetricsReport> gamma_reports(const std::vector<GammaSweepRow>& rows);

}  // namespace anomshap

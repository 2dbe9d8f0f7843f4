#include "anomshap/bench.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "anomshap/rng.hpp"

namespace anomshap {
namespace {

constexpr std::pair<Strategy, const char*> kStrategyNames[] = {
    {Strategy::ash, "ash"},   {Strategy::ig, "ig"},         {Strategy::ksh, "ksh"},
    {Strategy::wksh, "wksh"}, {Strategy::marg, "marg"},     {Strategy::sfe, "sfe"},
    {Strategy::random, "random"}, {Strategy::oracle, "oracle"},
};

bool is_shapley_like(Strategy s) {
  return s == Strategy::ash || s == Strategy::ig || s == Strategy::ksh || s == Strategy::wksh;
}

std::string format_value(double v) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(3) << v;
  return ss.str();
}

}  // namespace

std::string to_string(Strategy s) {
  for (const auto& [value, name] : kStrategyNames)
    if (value == s) return name;
  return "unknown";
}

Strategy parse_strategy(const std::string& text) {
  for (const auto& [value, name] : kStrategyNames)
    if (text == name) return value;
  throw ArgumentError("unknown strategy '" + text + "'");
}

std::vector<Strategy> parse_strategies(const std::string& text) {
  std::vector<Strategy> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse_strategy(item));
  if (out.empty()) throw ArgumentError("strategy list is empty");
  return out;
}

std::size_t rank_of(const Vector& scores, std::size_t truth) {
  if (truth >= static_cast<std::size_t>(scores.size())) throw ArgumentError("truth index out of range");
  const double t = scores(static_cast<Eigen::Index>(truth));
  std::size_t rank = 1;
  for (Eigen::Index j = 0; j < scores.size(); ++j) {
    const auto jj = static_cast<std::size_t>(j);
    if (scores(j) > t || (scores(j) == t && jj < truth)) ++rank;
  }
  return rank;
}

double reciprocal_rank(const Vector& scores, std::size_t truth) {
  return 1.0 / static_cast<double>(rank_of(scores, truth));
}

int hits_at_n(const Vector& scores, std::size_t truth, std::size_t n) {
  if (n < 1 || n > static_cast<std::size_t>(scores.size()))
    throw ArgumentError("hits@n needs 1 <= n <= d");
  return rank_of(scores, truth) <= n ? 1 : 0;
}

double auroc(const Vector& scores, std::span<const std::size_t> truth) {
  const auto d = static_cast<std::size_t>(scores.size());
  std::vector<bool> positive(d, false);
  for (auto i : truth) {
    if (i >= d) throw ArgumentError("truth index out of range");
    positive[i] = true;
  }
  const auto n_pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
  if (n_pos == 0 || n_pos == d)
    throw MetricError("AUROC is undefined unless the truth set is a non-empty proper subset");
  double wins = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    if (!positive[i]) continue;
    for (std::size_t j = 0; j < d; ++j) {
      if (positive[j]) continue;
      const double a = scores(static_cast<Eigen::Index>(i));
      const double b = scores(static_cast<Eigen::Index>(j));
      wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
    }
  }
  return wins / static_cast<double>(n_pos * (d - n_pos));
}

Vector positive_phi_transform(const Vector& phi) { return phi.cwiseMax(0.0); }

BenchResult run_synth_benchmark(const DataSplits& splits, const ScoreModel& detector,
                                std::span<const Strategy> strategies, const BenchConfig& config) {
  if (config.n_trials == 0) throw MetricError("benchmark needs at least one trial");
  if (strategies.empty()) throw ArgumentError("benchmark needs at least one strategy");
  const auto& pool = splits.test_norm;
  if (pool.size() == 0) throw ArgumentError("test_norm split is empty");
  const std::size_t d = detector.dim();
  if (pool.dim() != d) throw ArgumentError("detector dimension does not match the data");
  if (config.d_anom < 1 || config.d_anom > d) throw ArgumentError("d_anom must lie in [1, d]");

  for (auto s : strategies) {
    if ((s == Strategy::marg || s == Strategy::sfe) && !detector.supports(Capability::marginal))
      throw CapabilityError(to_string(s) + " cannot be computed for detector '" + detector.name() +
                            "': it has no subset marginals");
    if ((s == Strategy::ash || s == Strategy::ig) && !detector.supports(Capability::gradient))
      throw CapabilityError(to_string(s) + " needs gradients from detector '" + detector.name() + "'");
  }

  // Trial-independent references.
  const bool need_ksh = std::find(strategies.begin(), strategies.end(), Strategy::ksh) != strategies.end();
  std::optional<ReferenceSet> centers;
  if (need_ksh)
    centers = build_references(ReferenceOrigin::kmeans_centers, splits.train, std::nullopt,
                               std::min(config.k_refs, splits.train.size()),
                               derive_seed(config.seed, "kmeans"));
  const Vector train_mean = splits.train.size() > 0
                                ? Vector(splits.train.rows().colwise().mean().transpose())
                                : Vector::Zero(static_cast<Eigen::Index>(d));

  const std::size_t n_strat = strategies.size();
  std::vector<TrialResult> trials(config.n_trials * n_strat);

  for_each_index(config.execution, config.n_trials, [&](std::size_t t) {
    auto rng = make_engine(config.seed, "trials", t);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    const std::size_t base = pick(rng);
    const auto record = inject_anomaly(pool.row(base), config.d_anom, pool.feature_kinds(),
                                       derive_seed(config.seed, "inject", t), base);
    const Vector& x = record.perturbed_point;

    AttributeConfig attr;
    attr.m = config.m;
    attr.seed = derive_seed(config.seed, "sampler", t);
    attr.weighting = config.weighting;
    attr.execution = Execution::serial;

    for (std::size_t k = 0; k < n_strat; ++k) {
      const Strategy s = strategies[k];
      Vector scores;
      switch (s) {
        case Strategy::ash:
          if (config.exact_ash) {
            AshCharFn v(detector, ash_prepare(detector, x, config.gamma, config.optimizer, Execution::serial));
            scores = exact_shapley(v, Execution::serial).phi;
          } else {
            scores = attribute_ash(detector, x, config.gamma, attr, config.optimizer).phi;
          }
          break;
        case Strategy::ig:
          scores = integrated_gradients(detector, x, train_mean, config.ig_steps, Execution::serial);
          break;
        case Strategy::ksh:
          scores = reference_shap_attribution(detector, x, *centers, "ksh", attr).phi;
          break;
        case Strategy::wksh: {
          auto refs = build_references(ReferenceOrigin::knn_of_x, splits.train, x,
                                       std::min(config.k_refs, splits.train.size()), attr.seed);
          scores = reference_shap_attribution(detector, x, std::move(refs), "wksh", attr).phi;
          break;
        }
        case Strategy::marg:
          scores = marginal_attribution(detector, x);
          break;
        case Strategy::sfe:
          scores = sfe_scores(sfe_greedy(detector, x));
          break;
        case Strategy::random: {
          auto noise = make_engine(config.seed, "random", t);
          std::uniform_real_distribution<double> u(0.0, 1.0);
          scores.resize(static_cast<Eigen::Index>(d));
          for (Eigen::Index j = 0; j < scores.size(); ++j) scores(j) = u(noise);
          break;
        }
        case Strategy::oracle:
          scores = (x - pool.row(base)).cwiseAbs();
          break;
      }
      if (config.positive_phi && is_shapley_like(s)) scores = positive_phi_transform(scores);
      trials[t * n_strat + k] = TrialResult{t, base, record.perturbed_indices, s, detector.name(),
                                            std::move(scores)};
    }
  });

  BenchResult result;
  const bool rank_metrics = config.d_anom == 1 || config.multi_truth_mrr;
  for (std::size_t k = 0; k < n_strat; ++k) {
    MetricsReport rep;
    rep.strategy = to_string(strategies[k]);
    rep.detector = detector.name();
    rep.n_trials = config.n_trials;
    rep.d_anom = config.d_anom;
    rep.seed = config.seed;
    if (strategies[k] == Strategy::ash) rep.gamma = config.gamma;
    double rr_sum = 0.0, auc_sum = 0.0;
    std::map<std::size_t, double> hits;
    for (std::size_t t = 0; t < config.n_trials; ++t) {
      const auto& tr = trials[t * n_strat + k];
      std::size_t best = d;
      for (auto i : tr.perturbed_indices) best = std::min(best, rank_of(tr.scores, i));
      rr_sum += 1.0 / static_cast<double>(best);
      for (auto n : config.hits_cutoffs)
        if (n >= 1 && n <= d) hits[n] += best <= n ? 1.0 : 0.0;
      if (config.d_anom < d) auc_sum += auroc(tr.scores, tr.perturbed_indices);
    }
    const auto n = static_cast<double>(config.n_trials);
    if (rank_metrics) {
      rep.mrr = rr_sum / n;
      for (auto& [cut, count] : hits) rep.hits_at[cut] = count / n;
    }
    if (config.d_anom < d) rep.auroc = auc_sum / n;
    result.reports.push_back(std::move(rep));
  }
  result.trials = std::move(trials);
  return result;
}

std::vector<GammaSweepRow> gamma_sweep(const DataSplits& splits, const ScoreModel& detector,
                                       std::span<const double> gammas, const BenchConfig& config) {
  if (gammas.empty()) throw ArgumentError("gamma grid is empty");
  const Strategy ash[] = {Strategy::ash};
  std::vector<GammaSweepRow> rows;
  for (double g : gammas) {
    if (!(g >= 0.0)) throw ArgumentError("gamma must be non-negative");
    BenchConfig cfg = config;
    cfg.gamma = g;
    rows.push_back({g, run_synth_benchmark(splits, detector, ash, cfg).reports.front()});
  }
  return rows;
}

std::vector<MetricsReport> gamma_reports(const std::vector<GammaSweepRow>& rows) {
  std::vector<MetricsReport> out;
  for (const auto& row : rows) {
    MetricsReport rep = row.report;
    std::ostringstream name;
    name << rep.strategy << "@gamma=" << row.gamma;
    rep.strategy = name.str();
    out.push_back(std::move(rep));
  }
  return out;
}

void write_report_csv(std::ostream& out, const std::vector<MetricsReport>& reports) {
  out << "strategy,detector,metric,value,n_trials,seed\n";
  out << std::setprecision(17);
  auto line = [&](const MetricsReport& r, const std::string& metric, double value) {
    out << r.strategy << ',' << r.detector << ',' << metric << ',' << value << ',' << r.n_trials
        << ',' << r.seed << '\n';
  };
  for (const auto& r : reports) {
    if (r.mrr) line(r, "mrr", *r.mrr);
    for (const auto& [n, v] : r.hits_at) line(r, "hits@" + std::to_string(n), v);
    if (r.auroc) line(r, "auroc", *r.auroc);
  }
}

void write_trials_csv(std::ostream& out, const std::vector<TrialResult>& trials) {
  out << "trial,strategy,detector,base_row,perturbed,scores\n";
  out << std::setprecision(17);
  for (const auto& t : trials) {
    out << t.trial << ',' << to_string(t.strategy) << ',' << t.detector << ',' << t.base_row << ',';
    for (std::size_t i = 0; i < t.perturbed_indices.size(); ++i)
      out << (i ? ";" : "") << t.perturbed_indices[i];
    out << ',';
    for (Eigen::Index j = 0; j < t.scores.size(); ++j) out << (j ? ";" : "") << t.scores(j);
    out << '\n';
  }
}

std::string format_report_table(const std::vector<MetricsReport>& reports) {
  std::vector<std::string> headers = {"strategy", "detector"};
  bool any_mrr = false, any_auc = false;
  std::vector<std::size_t> cutoffs;
  for (const auto& r : reports) {
    any_mrr |= r.mrr.has_value();
    any_auc |= r.auroc.has_value();
    for (const auto& [n, v] : r.hits_at)
      if (std::find(cutoffs.begin(), cutoffs.end(), n) == cutoffs.end()) cutoffs.push_back(n);
  }
  std::sort(cutoffs.begin(), cutoffs.end());
  if (any_mrr) headers.push_back("MRR");
  for (auto n : cutoffs) headers.push_back("hits@" + std::to_string(n));
  if (any_auc) headers.push_back("AUROC");

  std::vector<std::vector<std::string>> cells;
  for (const auto& r : reports) {
    std::vector<std::string> row = {r.strategy, r.detector};
    if (any_mrr) row.push_back(r.mrr ? format_value(*r.mrr) : "-");
    for (auto n : cutoffs) {
      auto it = r.hits_at.find(n);
      row.push_back(it != r.hits_at.end() ? format_value(it->second) : "-");
    }
    if (any_auc) row.push_back(r.auroc ? format_value(*r.auroc) : "-");
    cells.push_back(std::move(row));
  }
  std::vector<std::size_t> width(headers.size());
  for (std::size_t c = 0; c < headers.size(); ++c) {
    width[c] = headers[c].size();
    for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << "  ";
      if (c < 2)
        out << std::left << std::setw(static_cast<int>(width[c])) << row[c];
      else
        out << std::right << std::setw(static_cast<int>(width[c])) << row[c];
    }
    out << '\n';
  };
  emit(headers);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  for (const auto& row : cells) emit(row);
  if (!reports.empty())
    out << "(n_trials=" << reports.front().n_trials << ", d_anom=" << reports.front().d_anom
        << ", seed=" << reports.front().seed << ")\n";
  return out.str();
}

std::string format_gamma_table(const std::vector<GammaSweepRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(10) << "gamma" << std::right << std::setw(8) << "MRR";
  std::vector<std::size_t> cutoffs;
  if (!rows.empty())
    for (const auto& [n, v] : rows.front().report.hits_at) cutoffs.push_back(n);
  for (auto n : cutoffs) out << std::setw(9) << ("hits@" + std::to_string(n));
  out << '\n' << std::string(18 + 9 * cutoffs.size(), '-') << '\n';
  for (const auto& row : rows) {
    std::ostringstream g;
    g << row.gamma;
    out << std::left << std::setw(10) << g.str() << std::right << std::setw(8)
        << (row.report.mrr ? format_value(*row.report.mrr) : "-");
    for (auto n : cutoffs) {
      auto it = row.report.hits_at.find(n);
      out << std::setw(9) << (it != row.report.hits_at.end() ? format_value(it->second) : "-");
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace anomshap

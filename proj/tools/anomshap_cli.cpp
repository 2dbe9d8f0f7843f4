#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "anomshap/attribution_json.hpp"
#include "anomshap/bench.hpp"
#include "anomshap/gmm.hpp"
#include "anomshap/subspace.hpp"
#include "anomshap/model_io.hpp"
#include "anomshap/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace anomshap;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitFit = 3;
constexpr int kExitCapability = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::size_t> parse_size_list(const std::string& text, const char* what) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size() || v == 0) throw UsageError(std::string("bad ") + what + " value '" + item + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw UsageError(std::string(what) + " list is empty");
  return out;
}

std::vector<double> parse_double_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size()) throw UsageError(std::string("bad ") + what + " value '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(std::string(what) + " list is empty");
  return out;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Detector training shared by `train` and `bench`.

struct DetectorOptions {
  std::string data;
  std::string schema;
  std::string detector = "gmm";
  std::string k = "2,3,4";
  std::size_t latent = 0;  // 0: d / 2
  std::uint64_t seed = 0;
  double valid_fraction = 0.2;
  std::size_t max_iter = 500;
  double ridge = 1e-6;
  bool no_marginals = false;
};

void add_detector_options(CLI::App* cmd, DetectorOptions& o) {
  cmd->add_option("--data", o.data, "CSV with header and a 0/1 label column")->required();
  cmd->add_option("--schema", o.schema, "sidecar file of name,kind lines");
  cmd->add_option("--detector", o.detector, "gmm or subspace")
      ->check(CLI::IsMember({"gmm", "subspace"}))
      ->capture_default_str();
  cmd->add_option("--k", o.k, "candidate GMM component counts")->capture_default_str();
  cmd->add_option("--latent", o.latent, "subspace dimension (default d/2)");
  cmd->add_option("--seed", o.seed, "base seed for every random stream")->capture_default_str();
  cmd->add_option("--valid-fraction", o.valid_fraction)->check(CLI::Range(0.0, 0.9))->capture_default_str();
  cmd->add_option("--max-iter", o.max_iter, "EM iteration cap")->capture_default_str();
  cmd->add_option("--ridge", o.ridge, "covariance ridge")->capture_default_str();
  cmd->add_flag("--no-marginals", o.no_marginals, "hide subset marginals from strategies");
}

struct Trained {
  DataSplits splits;
  std::shared_ptr<const ScoreModel> model;
  json report;
};

Dataset read_dataset(const std::string& data, const std::string& schema) {
  if (!fs::exists(data)) throw UsageError("data file not found: " + data);
  std::vector<FeatureSpec> spec;
  if (!schema.empty()) {
    if (!fs::exists(schema)) throw UsageError("schema file not found: " + schema);
    spec = load_schema(schema);
  }
  return load_csv(data, spec);
}

Trained train_detector(const DetectorOptions& o, Execution exec) {
  auto data = read_dataset(o.data, o.schema);
  auto splits = normalize(split(data, o.valid_fraction, o.seed));
  const std::size_t d = data.dim();
  json report;
  std::shared_ptr<const ScoreModel> model;
  if (o.detector == "gmm") {
    const auto ks = parse_size_list(o.k, "--k");
    std::vector<std::shared_ptr<const ScoreModel>> candidates;
    json fits = json::array();
    for (auto k : ks) {
      GmmFitOptions fo{.components = k, .seed = derive_seed(o.seed, "em-init", k), .max_iter = o.max_iter,
                       .ridge = o.ridge, .execution = exec};
      auto fit = fit_gmm(splits.train, fo);
      auto m = std::make_shared<GmmModel>(std::move(fit.model));
      fits.push_back({{"k", k},
                      {"train_log_likelihood", fit.log_likelihood},
                      {"iterations", fit.iterations},
                      {"valid_mean_energy", mean_score(*m, splits.valid)}});
      candidates.push_back(std::move(m));
    }
    model = select_model(candidates, splits.valid);
    report["candidates"] = fits;
    report["selected_k"] = dynamic_cast<const GmmModel&>(*model).components();
  } else {
    const std::size_t q = o.latent ? o.latent : std::max<std::size_t>(1, d / 2);
    if (q >= d) throw UsageError("--latent must be smaller than the feature count " + std::to_string(d));
    model = std::make_shared<SubspaceModel>(fit_subspace(splits.train, q));
    report["latent"] = q;
    report["valid_mean_error"] = mean_score(*model, splits.valid);
  }
  if (o.no_marginals) model = std::make_shared<RestrictedModel>(model, Capability::gradient);
  report["split_sizes"] = {{"train", splits.train.size()},
                           {"valid", splits.valid.size()},
                           {"test_norm", splits.test_norm.size()},
                           {"test_anom", splits.test_anom.size()}};
  return {std::move(splits), std::move(model), std::move(report)};
}

json detector_config(const DetectorOptions& o) {
  return {{"data", o.data},           {"schema", o.schema}, {"detector", o.detector},
          {"k", o.k},                 {"latent", o.latent}, {"seed", o.seed},
          {"valid_fraction", o.valid_fraction},            {"max_iter", o.max_iter},
          {"ridge", o.ridge},         {"no_marginals", o.no_marginals}};
}

// ---------------------------------------------------------------------------

int run_train(const DetectorOptions& o, const std::string& out, Execution exec) {
  auto trained = train_detector(o, exec);
  ModelBundle bundle;
  bundle.model = trained.model;
  const auto& train = trained.splits.train;
  for (std::size_t j = 0; j < train.dim(); ++j)
    bundle.features.push_back({train.feature_names()[j], train.feature_kinds()[j]});
  bundle.norm_stats = trained.splits.norm_stats;
  const json cfg = detector_config(o);
  for (const auto& [key, value] : cfg.items())
    bundle.metadata[key] = value.is_string() ? value.get<std::string>() : value.dump();
  bundle.metadata["data"] = fs::absolute(o.data).string();
  if (!o.schema.empty()) bundle.metadata["schema"] = fs::absolute(o.schema).string();
  save_bundle(out, bundle);

  json echo = {{"command", "train"}, {"config", cfg}, {"out", out}, {"result", trained.report}};
  std::cout << echo.dump(2) << '\n';
  return kExitOk;
}

struct AttributeOptions {
  std::string model;
  std::string strategy = "ash";
  std::string data;
  std::optional<std::size_t> row;
  std::string values;
  double gamma = 0.01;
  std::optional<std::size_t> m;
  std::uint64_t seed = 0;
  std::size_t ig_steps = 64;
  std::size_t k_refs = 8;
  std::string weighting = "importance";
  std::string out;
};

std::string meta(const ModelBundle& b, const std::string& key, const std::string& fallback = "") {
  auto it = b.metadata.find(key);
  return it == b.metadata.end() ? fallback : it->second;
}

int run_attribute(const AttributeOptions& o, Execution exec) {
  if (!fs::exists(o.model)) throw UsageError("model file not found: " + o.model);
  if (o.row.has_value() == !o.values.empty()) throw UsageError("give exactly one of --row or --values");
  const Strategy strategy = parse_strategy(o.strategy);
  if (strategy == Strategy::random || strategy == Strategy::oracle)
    throw UsageError("strategy '" + o.strategy + "' is only available in bench");

  auto bundle = load_bundle(o.model);
  const auto& e = *bundle.model;
  const std::size_t d = e.dim();
  const std::string data_path = o.data.empty() ? meta(bundle, "data") : o.data;

  Vector raw;
  if (o.row) {
    auto data = read_dataset(data_path, meta(bundle, "schema"));
    if (data.dim() != d) throw UsageError("data has " + std::to_string(data.dim()) + " features, model expects " + std::to_string(d));
    if (*o.row >= data.size()) throw UsageError("--row " + std::to_string(*o.row) + " is out of range");
    raw = data.row(*o.row);
  } else {
    const auto v = parse_double_list(o.values, "--values");
    if (v.size() != d) throw UsageError("--values needs " + std::to_string(d) + " numbers");
    raw = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(d));
  }
  const Vector x = bundle.norm_stats ? bundle.norm_stats->apply(raw) : raw;

  auto training_rows = [&] {
    DetectorOptions det;
    det.data = data_path;
    det.schema = meta(bundle, "schema");
    det.seed = std::stoull(meta(bundle, "seed", "0"));
    det.valid_fraction = std::stod(meta(bundle, "valid_fraction", "0.2"));
    auto s = split(read_dataset(det.data, det.schema), det.valid_fraction, det.seed);
    return bundle.norm_stats ? s.train.with_rows(bundle.norm_stats->apply_rows(s.train.rows())) : s.train;
  };

  AttributeConfig cfg;
  cfg.m = o.m;
  cfg.seed = o.seed;
  cfg.weighting = o.weighting == "uniform" ? SampleWeighting::uniform : SampleWeighting::importance;
  cfg.execution = exec;

  Attribution a;
  a.strategy = o.strategy;
  a.seed = o.seed;
  switch (strategy) {
    case Strategy::ash:
      a = attribute_ash(e, x, o.gamma, cfg);
      a.strategy = "ash";
      break;
    case Strategy::ksh:
      a = ksh_attribution(e, x, training_rows(), {.k = o.k_refs, .attribute = cfg});
      break;
    case Strategy::wksh:
      a = wksh_attribution(e, x, training_rows(), {.k = o.k_refs, .attribute = cfg});
      break;
    case Strategy::ig: {
      const Dataset train = training_rows();
      const Vector r = train.rows().colwise().mean().transpose();
      a.phi = integrated_gradients(e, x, r, o.ig_steps, exec);
      a.phi0 = e.score(r);
      break;
    }
    case Strategy::marg:
      a.phi = marginal_attribution(e, x);
      break;
    case Strategy::sfe:
      a.phi = sfe_scores(sfe_greedy(e, x));
      break;
    default:
      break;
  }

  std::vector<std::string> names;
  for (const auto& f : bundle.features) names.push_back(f.name);
  json out = to_json(a, names);
  out["score"] = e.score(x);
  out["config"] = {{"command", "attribute"},
                   {"model", o.model},
                   {"strategy", o.strategy},
                   {"data", data_path},
                   {"row", o.row ? json(*o.row) : json(nullptr)},
                   {"values", o.values},
                   {"gamma", o.gamma},
                   {"m", o.m.value_or(default_sample_count(d))},
                   {"seed", o.seed},
                   {"ig_steps", o.ig_steps},
                   {"k_refs", o.k_refs},
                   {"weighting", o.weighting}};
  // timings differ between runs; keep the attribution file reproducible
  out.erase("elapsed_ms");
  const std::string text = out.dump(2) + "\n";
  if (o.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream(o.out) << text;
    std::cerr << "elapsed_ms " << a.elapsed_ms << '\n';
  }
  return kExitOk;
}

struct BenchOptions {
  DetectorOptions detector;
  std::string strategies = "ash,ig,ksh,wksh,marg,sfe";
  std::size_t d_anom = 1;
  std::size_t trials = 100;
  double gamma = 0.01;
  std::optional<std::size_t> m;
  std::string gamma_sweep;
  bool positive_phi = false;
  bool multi_truth_mrr = false;
  bool exact_ash = false;
  std::size_t ig_steps = 64;
  std::size_t k_refs = 8;
  std::string weighting = "importance";
  std::string out;
};

int run_bench(const BenchOptions& o, Execution exec) {
  const auto strategies = parse_strategies(o.strategies);
  auto trained = train_detector(o.detector, exec);

  BenchConfig cfg;
  cfg.d_anom = o.d_anom;
  cfg.n_trials = o.trials;
  cfg.seed = o.detector.seed;
  cfg.gamma = o.gamma;
  cfg.m = o.m;
  cfg.ig_steps = o.ig_steps;
  cfg.k_refs = o.k_refs;
  cfg.positive_phi = o.positive_phi;
  cfg.multi_truth_mrr = o.multi_truth_mrr;
  cfg.exact_ash = o.exact_ash;
  cfg.weighting = o.weighting == "uniform" ? SampleWeighting::uniform : SampleWeighting::importance;
  cfg.execution = exec;

  json config = detector_config(o.detector);
  config["command"] = "bench";
  config["strategies"] = o.strategies;
  config["danom"] = o.d_anom;
  config["trials"] = o.trials;
  config["gamma"] = o.gamma;
  config["m"] = o.m ? json(*o.m) : json("2d+2048");
  config["gamma_sweep"] = o.gamma_sweep;
  config["positive_phi"] = o.positive_phi;
  config["multi_truth_mrr"] = o.multi_truth_mrr;
  config["exact_ash"] = o.exact_ash;
  config["ig_steps"] = o.ig_steps;
  config["k_refs"] = o.k_refs;
  config["weighting"] = o.weighting;
  config["detector_fit"] = trained.report;

  std::vector<MetricsReport> reports;
  std::vector<TrialResult> trials;
  std::string table;
  if (!o.gamma_sweep.empty()) {
    const auto grid = parse_double_list(o.gamma_sweep, "--gamma-sweep");
    auto rows = gamma_sweep(trained.splits, *trained.model, grid, cfg);
    table = format_gamma_table(rows);
    reports = gamma_reports(rows);
  } else {
    auto res = run_synth_benchmark(trained.splits, *trained.model, strategies, cfg);
    table = format_report_table(res.reports);
    reports = std::move(res.reports);
    trials = std::move(res.trials);
  }

  std::ostringstream header;
  for (const auto& [key, value] : config.items())
    if (key != "detector_fit") header << "# " << key << " = " << (value.is_string() ? value.get<std::string>() : value.dump()) << '\n';
  std::cout << header.str() << table;

  if (!o.out.empty()) {
    std::ofstream(o.out + ".csv") << [&] {
      std::ostringstream s;
      write_report_csv(s, reports);
      return s.str();
    }();
    if (!trials.empty()) {
      std::ofstream t(o.out + ".trials.csv");
      write_trials_csv(t, trials);
    }
    std::ofstream(o.out + ".txt") << header.str() << table;
    std::ofstream(o.out + ".config.json") << config.dump(2) << '\n';
  }
  return kExitOk;
}

struct SynthOptions {
  std::size_t d = 6;
  double rho = 0.9;
  std::size_t n = 4000;
  std::size_t anomalies = 100;
  std::uint64_t seed = 0;
  std::string out;
};

int run_synth(const SynthOptions& o) {
  auto normal = generate_synthetic_gaussian(o.d, o.rho, o.n, o.seed);
  Matrix rows(static_cast<Eigen::Index>(o.n + o.anomalies), static_cast<Eigen::Index>(o.d));
  rows.topRows(static_cast<Eigen::Index>(o.n)) = normal.rows();
  std::vector<Label> labels(o.n, Label::normal);
  if (o.anomalies > 0) {
    auto pool = generate_synthetic_gaussian(o.d, o.rho, o.anomalies, derive_seed(o.seed, "synthetic", 1));
    for (std::size_t i = 0; i < o.anomalies; ++i) {
      auto rec = inject_anomaly(pool.row(i), 1, pool.feature_kinds(), derive_seed(o.seed, "inject", i), i);
      rows.row(static_cast<Eigen::Index>(o.n + i)) = rec.perturbed_point.transpose();
      labels.push_back(Label::anomalous);
    }
  }
  save_csv(o.out, Dataset(rows, normal.feature_names(), normal.feature_kinds(), labels));
  json echo = {{"command", "synth"}, {"d", o.d}, {"rho", o.rho}, {"n", o.n},
               {"anomalies", o.anomalies}, {"seed", o.seed}, {"out", o.out}};
  std::cout << echo.dump(2) << '\n';
  return kExitOk;
}

// `--config FILE` holds key=value lines (long option names without dashes).
// They are spliced in right after the subcommand so that later flags win.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::vector<std::string> out;
  std::vector<std::string> injected;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      out.push_back(args[i]);
      continue;
    }
    std::ifstream in(path);
    if (!in) throw UsageError("config file not found: " + path);
    std::string line;
    while (std::getline(in, line)) {
      const auto start = line.find_first_not_of(" \t");
      if (start == std::string::npos || line[start] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw UsageError("config line without '=': " + line);
      auto trim = [](std::string s) {
        s.erase(0, s.find_first_not_of(" \t"));
        s.erase(s.find_last_not_of(" \t\r") + 1);
        return s;
      };
      injected.push_back("--" + trim(line.substr(0, eq)) + "=" + trim(line.substr(eq + 1)));
    }
  }
  if (!injected.empty()) {
    // args[0] is the program name, args[1] the subcommand
    const auto at = out.size() > 1 ? out.begin() + 2 : out.end();
    out.insert(at, injected.begin(), injected.end());
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("Shapley attributions of anomaly scores");
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  int threads = 0;
  app.add_option("--threads", threads, "cap on worker threads (0: runtime default)");
  bool serial = false;
  app.add_flag("--serial", serial, "use the serial reference kernels");

  DetectorOptions train_opts;
  std::string train_out;
  auto* train = app.add_subcommand("train", "fit a detector and write a model file");
  add_detector_options(train, train_opts);
  train->add_option("--out", train_out, "model file")->required();
  train->add_option("--threads", threads);

  AttributeOptions attr;
  auto* attribute_cmd = app.add_subcommand("attribute", "attribute one point's anomaly score");
  attribute_cmd->add_option("--model", attr.model)->required();
  attribute_cmd->add_option("--strategy", attr.strategy, "ash, ig, ksh, wksh, marg or sfe")->capture_default_str();
  attribute_cmd->add_option("--data", attr.data, "CSV for --row and reference strategies (default: training data)");
  attribute_cmd->add_option("--row", attr.row, "0-based row of --data");
  attribute_cmd->add_option("--values", attr.values, "comma-separated raw feature values");
  attribute_cmd->add_option("--gamma", attr.gamma)->check(CLI::NonNegativeNumber)->capture_default_str();
  attribute_cmd->add_option("--m", attr.m, "sampled coalitions (default 2d+2048)");
  attribute_cmd->add_option("--seed", attr.seed)->capture_default_str();
  attribute_cmd->add_option("--ig-steps", attr.ig_steps)->check(CLI::PositiveNumber)->capture_default_str();
  attribute_cmd->add_option("--k-refs", attr.k_refs)->check(CLI::PositiveNumber)->capture_default_str();
  attribute_cmd->add_option("--weighting", attr.weighting)->check(CLI::IsMember({"importance", "uniform"}))->capture_default_str();
  attribute_cmd->add_option("--out", attr.out, "JSON file (default stdout)");
  attribute_cmd->add_option("--threads", threads);

  BenchOptions bench;
  auto* bench_cmd = app.add_subcommand("bench", "synthetic-anomaly benchmark");
  add_detector_options(bench_cmd, bench.detector);
  bench_cmd->add_option("--strategies", bench.strategies)->capture_default_str();
  bench_cmd->add_option("--danom", bench.d_anom)->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--trials", bench.trials)->capture_default_str();
  bench_cmd->add_option("--gamma", bench.gamma)->check(CLI::NonNegativeNumber)->capture_default_str();
  bench_cmd->add_option("--m", bench.m, "sampled coalitions (default 2d+2048)");
  bench_cmd->add_option("--gamma-sweep", bench.gamma_sweep, "comma-separated gamma grid for ASH");
  bench_cmd->add_flag("--positive-phi", bench.positive_phi, "clamp negative attributions before ranking");
  bench_cmd->add_flag("--multi-truth-mrr", bench.multi_truth_mrr, "report MRR/hits when danom > 1");
  bench_cmd->add_flag("--exact-ash", bench.exact_ash, "ash by full enumeration instead of sampling");
  bench_cmd->add_option("--ig-steps", bench.ig_steps)->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--k-refs", bench.k_refs)->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--weighting", bench.weighting)->check(CLI::IsMember({"importance", "uniform"}))->capture_default_str();
  bench_cmd->add_option("--out", bench.out, "prefix for .csv, .trials.csv, .txt and .config.json");
  bench_cmd->add_option("--threads", threads);

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "write a correlated-Gaussian CSV with labeled anomalies");
  synth_cmd->add_option("--d", synth.d)->capture_default_str();
  synth_cmd->add_option("--rho", synth.rho)->capture_default_str();
  synth_cmd->add_option("--n", synth.n)->capture_default_str();
  synth_cmd->add_option("--anomalies", synth.anomalies)->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed)->capture_default_str();
  synth_cmd->add_option("--out", synth.out)->required();

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = expand_config(std::move(args));
    std::vector<char*> cargs;
    for (auto& a : args) cargs.push_back(a.data());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  set_max_threads(threads);
  const Execution exec = serial ? Execution::serial : Execution::parallel;
  try {
    if (*train) return run_train(train_opts, train_out, exec);
    if (*attribute_cmd) return run_attribute(attr, exec);
    if (*bench_cmd) return run_bench(bench, exec);
    if (*synth_cmd) return run_synth(synth);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CapabilityError& e) {
    std::cerr << "capability error: " << e.what() << '\n';
    return kExitCapability;
  } catch (const ConstantFeatureError& e) {
    std::cerr << "fit error: feature '" << e.feature() << "' is constant on the training split\n";
    return kExitFit;
  } catch (const FitError& e) {
    std::cerr << "fit error: " << e.what() << '\n';
    return kExitFit;
  } catch (const SizingError& e) {
    std::cerr << "fit error: " << e.what() << '\n';
    return kExitFit;
  } catch (const OptimizationError& e) {
    std::cerr << "fit error: " << e.what() << '\n';
    return kExitFit;
  } catch (const EstimationError& e) {
    std::cerr << "fit error: " << e.what() << '\n';
    return kExitFit;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

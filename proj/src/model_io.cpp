#include "anomshap/model_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "anomshap/errors.hpp"
#include "anomshap/gmm.hpp"
#include "anomshap/subspace.hpp"

namespace anomshap {
namespace {

constexpr const char* kMagic = "anomshap-model";
constexpr int kVersion = 1;

void write_values(std::ostream& out, const char* key, const double* data, Eigen::Index n) {
  out << key;
  for (Eigen::Index i = 0; i < n; ++i) out << ' ' << data[i];
  out << '\n';
}

void write_vector(std::ostream& out, const char* key, const Vector& v) {
  write_values(out, key, v.data(), v.size());
}

void write_matrix(std::ostream& out, const char* key, const Matrix& m) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  write_values(out, key, rm.data(), rm.size());
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  /// Next non-blank line split as keyword + remainder stream.
  std::istringstream expect(const std::string& key) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::istringstream ss(line);
      std::string word;
      ss >> word;
      if (word != key) fail("expected '" + key + "', found '" + word + "'");
      return ss;
    }
    fail("unexpected end of file, expected '" + key + "'");
  }

  template <class T>
  T scalar(const std::string& key) {
    auto ss = expect(key);
    T value{};
    if (!(ss >> value)) fail("bad value for '" + key + "'");
    return value;
  }

  Vector vector(const std::string& key, std::size_t n) {
    auto ss = expect(key);
    Vector v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      if (!(ss >> v(static_cast<Eigen::Index>(i))))
        fail("'" + key + "' needs " + std::to_string(n) + " values");
    std::string extra;
    if (ss >> extra) fail("'" + key + "' has more than " + std::to_string(n) + " values");
    return v;
  }

  Matrix matrix(const std::string& key, std::size_t rows, std::size_t cols) {
    const Vector flat = vector(key, rows * cols);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c)
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            flat(static_cast<Eigen::Index>(r * cols + c));
    return m;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ModelFormatError("model file line " + std::to_string(line_) + ": " + what);
  }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

}  // namespace

void write_bundle(std::ostream& out, const ModelBundle& bundle) {
  if (!bundle.model) throw ArgumentError("bundle has no model");
  const ScoreModel* base = bundle.model.get();
  if (const auto* restricted = dynamic_cast<const RestrictedModel*>(base)) base = restricted->inner().get();
  const auto& model = *base;
  const auto d = model.dim();
  out << std::setprecision(17);
  out << kMagic << ' ' << kVersion << '\n';
  out << "kind " << model.name() << '\n';
  out << "dim " << d << '\n';
  out << "capabilities " << to_string(bundle.model->capabilities()) << '\n';

  out << "features " << bundle.features.size() << '\n';
  for (const auto& f : bundle.features) out << "feature " << f.name << ' ' << to_string(f.kind) << '\n';

  out << "norm_stats " << (bundle.norm_stats ? 1 : 0) << '\n';
  if (bundle.norm_stats) {
    write_vector(out, "norm_mean", bundle.norm_stats->mean);
    write_vector(out, "norm_std", bundle.norm_stats->std);
  }
  out << "metadata " << bundle.metadata.size() << '\n';
  for (const auto& [key, value] : bundle.metadata) out << "meta " << key << ' ' << value << '\n';

  if (const auto* gmm = dynamic_cast<const GmmModel*>(&model)) {
    out << "components " << gmm->components() << '\n';
    for (std::size_t c = 0; c < gmm->components(); ++c) {
      out << "weight " << gmm->weights()[c] << '\n';
      write_vector(out, "mean", gmm->means()[c]);
      write_matrix(out, "covariance", gmm->covariances()[c]);
    }
  } else if (const auto* sub = dynamic_cast<const SubspaceModel*>(&model)) {
    out << "latent " << sub->latent_dim() << '\n';
    write_vector(out, "mean", sub->mean());
    write_matrix(out, "basis", sub->basis());
  } else {
    throw ArgumentError("detector '" + model.name() + "' cannot be serialized");
  }
  out << "end\n";
}

ModelBundle read_bundle(std::istream& in, std::optional<std::size_t> expected_dim) {
  Reader rd(in);
  if (rd.scalar<int>(kMagic) != kVersion) rd.fail("unsupported format version");
  const auto kind = rd.scalar<std::string>("kind");
  const auto d = rd.scalar<std::size_t>("dim");
  if (d == 0) rd.fail("dimension must be >= 1");
  if (expected_dim && *expected_dim != d)
    throw ModelFormatError("model dimension " + std::to_string(d) +
                           " does not match expected dimension " + std::to_string(*expected_dim));

  Capability caps = Capability::none;
  try {
    caps = parse_capabilities(rd.scalar<std::string>("capabilities"));
  } catch (const ArgumentError& e) {
    rd.fail(e.what());
  }

  ModelBundle bundle;
  const auto n_features = rd.scalar<std::size_t>("features");
  if (n_features != 0 && n_features != d) rd.fail("feature count does not match dimension");
  for (std::size_t j = 0; j < n_features; ++j) {
    auto ss = rd.expect("feature");
    std::string name, kind_text;
    if (!(ss >> name >> kind_text)) rd.fail("feature line needs a name and a kind");
    try {
      bundle.features.push_back({name, parse_feature_kind(kind_text)});
    } catch (const SchemaError& e) {
      rd.fail(e.what());
    }
  }
  if (rd.scalar<int>("norm_stats") == 1) {
    NormStats stats;
    stats.mean = rd.vector("norm_mean", d);
    stats.std = rd.vector("norm_std", d);
    bundle.norm_stats = std::move(stats);
  }
  const auto n_meta = rd.scalar<std::size_t>("metadata");
  for (std::size_t i = 0; i < n_meta; ++i) {
    auto ss = rd.expect("meta");
    std::string key, value;
    ss >> key;
    std::getline(ss >> std::ws, value);
    bundle.metadata[key] = value;
  }

  try {
    if (kind == "gmm") {
      const auto k = rd.scalar<std::size_t>("components");
      if (k == 0) rd.fail("mixture needs at least one component");
      std::vector<double> weights;
      std::vector<Vector> means;
      std::vector<Matrix> covs;
      for (std::size_t c = 0; c < k; ++c) {
        weights.push_back(rd.scalar<double>("weight"));
        means.push_back(rd.vector("mean", d));
        covs.push_back(rd.matrix("covariance", d, d));
      }
      bundle.model = std::make_shared<GmmModel>(std::move(weights), std::move(means), std::move(covs));
    } else if (kind == "subspace") {
      const auto q = rd.scalar<std::size_t>("latent");
      Vector mean = rd.vector("mean", d);
      Matrix basis = rd.matrix("basis", d, q);
      bundle.model = std::make_shared<SubspaceModel>(std::move(mean), std::move(basis));
    } else {
      rd.fail("unknown model kind '" + kind + "'");
    }
  } catch (const ArgumentError& e) {
    rd.fail(e.what());
  }
  rd.expect("end");
  if (bundle.model->capabilities() != caps)
    bundle.model = std::make_shared<RestrictedModel>(bundle.model, caps);
  return bundle;
}

void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write model file " + path.string());
  write_bundle(out, bundle);
}

ModelBundle load_bundle(const std::filesystem::path& path, std::optional<std::size_t> expected_dim) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open model file " + path.string());
  return read_bundle(in, expected_dim);
}

}  // namespace anomshap

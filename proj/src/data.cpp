#include "anomshap/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "anomshap/errors.hpp"
#include "anomshap/rng.hpp"

namespace anomshap {
namespace {

std::string trim(std::string_view s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  auto end = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(begin, end - begin + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"')
    out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    fields.push_back(trim(std::string_view(line).substr(
        start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = first + text.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

bool is_blank(const std::string& line) {
  return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace

const char* to_string(FeatureKind kind) {
  return kind == FeatureKind::binary ? "binary" : "real";
}

FeatureKind parse_feature_kind(const std::string& text) {
  if (text == "real") return FeatureKind::real;
  if (text == "binary") return FeatureKind::binary;
  throw SchemaError("unknown feature kind '" + text + "' (expected real or binary)");
}

Dataset::Dataset(Matrix rows, std::vector<std::string> feature_names,
                 std::vector<FeatureKind> feature_kinds, std::vector<Label> labels)
    : rows_(std::move(rows)),
      feature_names_(std::move(feature_names)),
      feature_kinds_(std::move(feature_kinds)),
      labels_(std::move(labels)) {
  const auto d = feature_kinds_.size();
  if (d == 0) throw ArgumentError("dataset needs at least one feature");
  if (static_cast<std::size_t>(rows_.cols()) != d && rows_.rows() > 0)
    throw ArgumentError("row width does not match feature count");
  if (rows_.rows() == 0) rows_.resize(0, static_cast<Eigen::Index>(d));
  if (feature_names_.size() != d) throw ArgumentError("feature name count does not match d");
  if (labels_.size() != size()) throw ArgumentError("label count does not match row count");
  for (std::size_t j = 0; j < d; ++j) {
    if (feature_kinds_[j] != FeatureKind::binary) continue;
    for (Eigen::Index i = 0; i < rows_.rows(); ++i) {
      const double v = rows_(i, static_cast<Eigen::Index>(j));
      if (v != 0.0 && v != 1.0)
        throw SchemaError("binary feature '" + feature_names_[j] +
                          "' holds a value outside {0,1}");
    }
  }
}

std::size_t Dataset::count(Label label) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Matrix out(static_cast<Eigen::Index>(indices.size()), rows_.cols());
  std::vector<Label> labels;
  labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= size()) throw ArgumentError("row index out of range");
    out.row(static_cast<Eigen::Index>(r)) = rows_.row(static_cast<Eigen::Index>(indices[r]));
    labels.push_back(labels_[indices[r]]);
  }
  Dataset result;
  result.rows_ = std::move(out);
  result.feature_names_ = feature_names_;
  result.feature_kinds_ = feature_kinds_;
  result.labels_ = std::move(labels);
  return result;
}

Dataset Dataset::with_rows(Matrix rows) const {
  if (rows.rows() != rows_.rows() || rows.cols() != rows_.cols())
    throw ArgumentError("replacement rows have a different shape");
  Dataset result;
  result.rows_ = std::move(rows);
  result.feature_names_ = feature_names_;
  result.feature_kinds_ = feature_kinds_;
  result.labels_ = labels_;
  return result;
}

Vector NormStats::apply(const Vector& x) const {
  return (x - mean).cwiseQuotient(std);
}

Vector NormStats::invert(const Vector& z) const {
  return z.cwiseProduct(std) + mean;
}

Matrix NormStats::apply_rows(const Matrix& rows) const {
  return (rows.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array();
}

Matrix NormStats::invert_rows(const Matrix& rows) const {
  return (rows.array().rowwise() * std.transpose().array()).matrix().rowwise() +
         mean.transpose();
}

std::vector<FeatureSpec> load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open schema file " + path.string());
  std::vector<FeatureSpec> schema;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line) || trim(line).front() == '#') continue;
    auto fields = split_fields(line);
    if (fields.size() != 2) throw ParseError("schema line needs 'name,kind'", line_no);
    if (schema.empty() && fields[0] == "name" && fields[1] == "kind") continue;
    try {
      schema.push_back({fields[0], parse_feature_kind(fields[1])});
    } catch (const SchemaError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  if (schema.empty()) throw SchemaError("schema file lists no features");
  return schema;
}

Dataset load_csv(const std::filesystem::path& path, const std::vector<FeatureSpec>& schema) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open data file " + path.string());
  std::string line;
  std::size_t line_no = 0;
  do {
    if (!std::getline(in, line)) throw ParseError("missing header row", line_no + 1);
    ++line_no;
  } while (is_blank(line));

  const auto header = split_fields(line);
  std::optional<std::size_t> label_col;
  std::vector<std::size_t> feature_cols;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "label") {
      if (label_col) throw ParseError("duplicate label column", line_no);
      label_col = c;
    } else {
      feature_cols.push_back(c);
      names.push_back(header[c]);
    }
  }
  if (!label_col) throw SchemaError("header has no 'label' column");
  if (names.empty()) throw ParseError("header has no feature columns", line_no);

  std::vector<FeatureKind> kinds(names.size(), FeatureKind::real);
  if (!schema.empty()) {
    if (schema.size() != names.size())
      throw SchemaError("schema lists " + std::to_string(schema.size()) +
                        " features but the file has " + std::to_string(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (schema[j].name != names[j])
        throw SchemaError("schema feature '" + schema[j].name +
                          "' does not match column '" + names[j] + "'");
      kinds[j] = schema[j].kind;
    }
  }

  std::vector<double> values;
  std::vector<Label> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      double v = 0.0;
      if (!parse_double(fields[feature_cols[j]], v))
        throw ParseError("non-numeric value '" + fields[feature_cols[j]] + "' in column '" +
                             names[j] + "'",
                         line_no);
      if (kinds[j] == FeatureKind::binary && v != 0.0 && v != 1.0)
        throw SchemaError("binary feature '" + names[j] + "' holds " + fields[feature_cols[j]] +
                          " at line " + std::to_string(line_no));
      values.push_back(v);
    }
    const auto& lab = fields[*label_col];
    if (lab == "0")
      labels.push_back(Label::normal);
    else if (lab == "1")
      labels.push_back(Label::anomalous);
    else
      throw ParseError("label must be 0 or 1, got '" + lab + "'", line_no);
  }

  const auto n = static_cast<Eigen::Index>(labels.size());
  const auto d = static_cast<Eigen::Index>(names.size());
  Matrix rows = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                               Eigen::RowMajor>>(values.data(), n, d);
  return Dataset(std::move(rows), std::move(names), std::move(kinds), std::move(labels));
}

void save_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write " + path.string());
  for (const auto& name : data.feature_names()) out << name << ',';
  out << "label\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < data.dim(); ++j)
      out << data.rows()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) << ',';
    out << (data.labels()[i] == Label::anomalous ? 1 : 0) << '\n';
  }
}

DataSplits split(const Dataset& data, double valid_fraction, std::uint64_t seed) {
  if (!(valid_fraction >= 0.0 && valid_fraction < 1.0))
    throw ArgumentError("valid_fraction must lie in [0, 1)");
  std::vector<std::size_t> normal, anomalous;
  for (std::size_t i = 0; i < data.size(); ++i)
    (data.labels()[i] == Label::anomalous ? anomalous : normal).push_back(i);
  if (anomalous.size() < 2 || normal.size() < 3 * anomalous.size())
    throw SizingError("split needs >= 2 anomalous rows and >= 3x as many normal rows (have " +
                      std::to_string(anomalous.size()) + " anomalous, " +
                      std::to_string(normal.size()) + " normal)");

  auto rng = make_engine(seed, "split");
  std::shuffle(normal.begin(), normal.end(), rng);
  const std::size_t n_test = anomalous.size();
  std::vector<std::size_t> test_norm(normal.begin(), normal.begin() + n_test);
  std::vector<std::size_t> rest(normal.begin() + n_test, normal.end());
  const auto n_valid = static_cast<std::size_t>(std::floor(rest.size() * valid_fraction));
  std::vector<std::size_t> valid(rest.begin(), rest.begin() + n_valid);
  std::vector<std::size_t> train(rest.begin() + n_valid, rest.end());

  return DataSplits{data.subset(train), data.subset(valid), data.subset(test_norm),
                    data.subset(anomalous), std::nullopt};
}

DataSplits normalize(const DataSplits& splits) {
  if (splits.norm_stats) throw ArgumentError("splits are already normalized");
  const auto& train = splits.train;
  if (train.size() == 0) throw SizingError("cannot normalize with an empty train split");
  const auto d = static_cast<Eigen::Index>(train.dim());
  NormStats stats{Vector::Zero(d), Vector::Ones(d)};
  for (Eigen::Index j = 0; j < d; ++j) {
    if (train.feature_kinds()[static_cast<std::size_t>(j)] == FeatureKind::binary) continue;
    const auto col = train.rows().col(j);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().mean();
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean))))
      throw ConstantFeatureError(train.feature_names()[static_cast<std::size_t>(j)]);
    stats.mean(j) = mean;
    stats.std(j) = sd;
  }
  auto apply = [&](const Dataset& ds) { return ds.with_rows(stats.apply_rows(ds.rows())); };
  return DataSplits{apply(splits.train), apply(splits.valid), apply(splits.test_norm),
                    apply(splits.test_anom), stats};
}

DataSplits denormalize(const DataSplits& splits) {
  if (!splits.norm_stats) throw ArgumentError("splits are not normalized");
  const auto& stats = *splits.norm_stats;
  auto invert = [&](const Dataset& ds) { return ds.with_rows(stats.invert_rows(ds.rows())); };
  return DataSplits{invert(splits.train), invert(splits.valid), invert(splits.test_norm),
                    invert(splits.test_anom), std::nullopt};
}

PerturbationRecord inject_anomaly(const Vector& row, std::size_t d_anom,
                                  const std::vector<FeatureKind>& kinds, std::uint64_t seed,
                                  std::size_t base_row_index) {
  const auto d = static_cast<std::size_t>(row.size());
  if (kinds.size() != d) throw ArgumentError("feature kind count does not match row length");
  if (d_anom < 1 || d_anom > d)
    throw ArgumentError("d_anom must lie in [1, d]; got " + std::to_string(d_anom));

  auto rng = make_engine(seed, "inject");
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  // Partial Fisher-Yates: the first d_anom entries are a uniform draw.
  for (std::size_t i = 0; i < d_anom; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, d - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(d_anom));
  std::sort(chosen.begin(), chosen.end());

  Vector out = row;
  std::bernoulli_distribution sign(0.5);
  std::uniform_real_distribution<double> magnitude(1.0, 2.0);
  for (auto j : chosen) {
    const auto k = static_cast<Eigen::Index>(j);
    if (kinds[j] == FeatureKind::binary) {
      out(k) = out(k) == 0.0 ? 1.0 : 0.0;
    } else {
      const double s = sign(rng) ? 1.0 : -1.0;
      out(k) += s * magnitude(rng);
    }
  }
  return PerturbationRecord{base_row_index, std::move(chosen), std::move(out)};
}

Dataset generate_synthetic_gaussian(std::size_t d, double rho, std::size_t n, std::uint64_t seed) {
  if (d < 2) throw ArgumentError("synthetic Gaussian needs d >= 2");
  if (!(std::abs(rho) < 1.0)) throw ArgumentError("correlation must satisfy |rho| < 1");
  if (rho <= -1.0 / static_cast<double>(d - 1))
    throw ArgumentError("rho <= -1/(d-1) gives a covariance that is not positive definite");

  const auto dd = static_cast<Eigen::Index>(d);
  Matrix cov = Matrix::Constant(dd, dd, rho);
  cov.diagonal().setOnes();
  const Matrix chol = Eigen::LLT<Matrix>(cov).matrixL();

  auto rng = make_engine(seed, "synthetic");
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix rows(static_cast<Eigen::Index>(n), dd);
  Vector z(dd);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < dd; ++j) z(j) = normal(rng);
    rows.row(i) = (chol * z).transpose();
  }
  std::vector<std::string> names;
  for (std::size_t j = 0; j < d; ++j) names.push_back("x" + std::to_string(j + 1));
  return Dataset(std::move(rows), std::move(names), std::vector<FeatureKind>(d, FeatureKind::real),
                 std::vector<Label>(n, Label::normal));
}

}  // namespace anomshap

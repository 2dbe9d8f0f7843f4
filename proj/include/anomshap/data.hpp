#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace anomshap {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class FeatureKind { real, binary };
enum class Label : std::uint8_t { normal = 0, anomalous = 1 };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::real;
};

const char* to_string(FeatureKind kind);
FeatureKind parse_feature_kind(const std::string& text);

/// Immutable table of samples (one per row) with per-feature kinds and
/// per-row labels.
class Dataset {
 public:
  Dataset() = default;
  /// Validates shapes and that binary columns hold only 0/1.
  Dataset(Matrix rows, std::vector<std::string> feature_names,
          std::vector<FeatureKind> feature_kinds, std::vector<Label> labels);

  std::size_t size() const noexcept { return static_cast<std::size_t>(rows_.rows()); }
  std::size_t dim() const noexcept { return feature_kinds_.size(); }

  const Matrix& rows() const noexcept { return rows_; }
  Vector row(std::size_t i) const { return rows_.row(static_cast<Eigen::Index>(i)).transpose(); }
  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
  const std::vector<FeatureKind>& feature_kinds() const noexcept { return feature_kinds_; }
  const std::vector<Label>& labels() const noexcept { return labels_; }

  std::size_t count(Label label) const;
  Dataset subset(const std::vector<std::size_t>& indices) const;
  /// Same columns and labels, rows replaced (used by normalization).
  Dataset with_rows(Matrix rows) const;

 private:
  Matrix rows_;
  std::vector<std::string> feature_names_;
  std::vector<FeatureKind> feature_kinds_;
  std::vector<Label> labels_;
};

/// Per-feature z-score statistics taken from the training partition.
/// Binary features carry mean 0 and std 1 so that the transform is the
/// identity on them.
struct NormStats {
  Vector mean;
  Vector std;

  Vector apply(const Vector& x) const;
  Vector invert(const Vector& z) const;
  Matrix apply_rows(const Matrix& rows) const;
  Matrix invert_rows(const Matrix& rows) const;
};

struct DataSplits {
  Dataset train;
  Dataset valid;
  Dataset test_norm;
  Dataset test_anom;
  std::optional<NormStats> norm_stats;
};

struct PerturbationRecord {
  std::size_t base_row_index = 0;
  std::vector<std::size_t> perturbed_indices;  // ascending
  Vector perturbed_point;
};

/// Reads `name,kind` lines (kind in {real, binary}). A leading `name,kind`
/// header line is accepted and skipped.
std::vector<FeatureSpec> load_schema(const std::filesystem::path& path);

/// Parses a CSV with a header row and a required `label` column (0/1).
/// Feature columns are every other column in file order. When `schema` is
/// non-empty it must name exactly those columns; otherwise all features are
/// treated as real-valued.
Dataset load_csv(const std::filesystem::path& path,
                 const std::vector<FeatureSpec>& schema = {});

void save_csv(const std::filesystem::path& path, const Dataset& data);

/// test_anom = all anomalous rows; test_norm = same-size random normal
/// sample; remaining normal rows shuffled and split with
/// floor(remaining * valid_fraction) rows going to validation.
DataSplits split(const Dataset& data, double valid_fraction, std::uint64_t seed);

/// z-scores real features of all four partitions with train mean and
/// population standard deviation.
DataSplits normalize(const DataSplits& splits);
DataSplits denormalize(const DataSplits& splits);

/// Perturbs `d_anom` distinct coordinates chosen uniformly: real features
/// are shifted by s*u with s = +-1 and u ~ U[1,2]; binary features flip.
PerturbationRecord inject_anomaly(const Vector& row, std::size_t d_anom,
                                  const std::vector<FeatureKind>& kinds,
                                  std::uint64_t seed,
                                  std::size_t base_row_index = 0);

/// n draws from N(0, C) with unit variances and constant correlation rho.
Dataset generate_synthetic_gaussian(std::size_t d, double rho, std::size_t n,
                                    std::uint64_t seed);

}  // namespace anomshap

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace fhmc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// In-memory marker for a missing cell.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) noexcept { return std::isnan(v); }

// Lower bound applied to per-column standard deviations.
inline constexpr double kStdFloor = 1e-8;

// Named real matrix; missing cells hold kMissing. Every other entry is finite
// and feature names are unique and non-empty.
class DataMatrix {
public:
  DataMatrix() = default;
  DataMatrix(std::vector<std::string> feature_names, Matrix values);

  // Columns named x1..xd.
  static DataMatrix with_default_names(Matrix values);

  Index rows() const noexcept { return values_.rows(); }
  Index cols() const noexcept { return values_.cols(); }
  const std::vector<std::string> &feature_names() const noexcept {
    return names_;
  }
  const Matrix &values() const noexcept { return values_; }
  double operator()(Index i, Index j) const { return values_(i, j); }

  bool has_missing() const;
  std::optional<Index> column_index(const std::string &name) const;

  // Same names, new values (validated).
  DataMatrix with_values(Matrix values) const;

  friend bool operator==(const DataMatrix &a, const DataMatrix &b);

private:
  std::vector<std::string> names_;
  Matrix values_;
};

using MaskBits = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// bits(i, j) is true iff entry (i, j) is missing.
class Mask {
public:
  Mask() = default;
  explicit Mask(MaskBits bits) : bits_(std::move(bits)) {}

  static Mask from_values(const Matrix &values);
  static Mask none(Index rows, Index cols);

  Index rows() const noexcept { return bits_.rows(); }
  Index cols() const noexcept { return bits_.cols(); }
  bool missing(Index i, Index j) const { return bits_(i, j); }
  const MaskBits &bits() const noexcept { return bits_; }

  Index count() const { return bits_.count(); }
  Index column_count(Index j) const { return bits_.col(j).count(); }
  Index row_count(Index i) const { return bits_.row(i).count(); }

  friend bool operator==(const Mask &a, const Mask &b) {
    return a.bits_.rows() == b.bits_.rows() &&
           a.bits_.cols() == b.bits_.cols() && (a.bits_ == b.bits_).all();
  }

private:
  MaskBits bits_;
};

// A data matrix with its missingness mask. Construction checks that the mask
// agrees with the missing sentinels and that every column has at least one
// observed value.
class MaskedDataset {
public:
  MaskedDataset() = default;
  explicit MaskedDataset(DataMatrix data);
  MaskedDataset(DataMatrix data, Mask mask);

  const DataMatrix &data() const noexcept { return data_; }
  const Mask &mask() const noexcept { return mask_; }
  Index rows() const noexcept { return data_.rows(); }
  Index cols() const noexcept { return data_.cols(); }

  std::vector<double> observed(Index column) const;

  friend bool operator==(const MaskedDataset &a, const MaskedDataset &b) {
    return a.data_ == b.data_ && a.mask_ == b.mask_;
  }

private:
  DataMatrix data_;
  Mask mask_;
};

struct StandardizationParams {
  Vector means;
  Vector stds;
  std::vector<std::string> warnings;
};

std::set<std::string> default_missing_tokens();

MaskedDataset load_csv(const std::filesystem::path &path,
                       const std::set<std::string> &missing_tokens =
                           default_missing_tokens());
void save_csv(const DataMatrix &data, const std::filesystem::path &path);
inline void save_csv(const MaskedDataset &dataset,
                     const std::filesystem::path &path) {
  save_csv(dataset.data(), path);
}

struct InjectionResult {
  MaskedDataset masked;
  DataMatrix ground_truth;
};

// Masks every cell independently (MCAR) with probability `rate`.
InjectionResult inject_missing(const MaskedDataset &complete, double rate,
                               std::uint64_t seed);
// Per-column rates, one per feature.
InjectionResult inject_missing(const MaskedDataset &complete,
                               const std::vector<double> &column_rates,
                               std::uint64_t seed);

std::pair<MaskedDataset, StandardizationParams>
standardize(const MaskedDataset &dataset);
MaskedDataset destandardize(const MaskedDataset &dataset,
                            const StandardizationParams &params);
Matrix destandardize_values(const Matrix &values,
                            const StandardizationParams &params);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

struct KFoldSplit {
  std::vector<Fold> folds;
  bool stratified = false;
  std::vector<std::string> warnings;
};

KFoldSplit kfold_split(std::size_t n_rows, std::size_t k,
                       const std::optional<std::vector<int>> &labels,
                       std::uint64_t seed);

} // namespace fhmc

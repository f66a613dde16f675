#include "fhmc/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "fhmc/error.hpp"
#include "fhmc/random.hpp"

namespace fhmc {

namespace {

void validate_names(const std::vector<std::string> &names, Index cols) {
  if (static_cast<Index>(names.size()) != cols) {
    throw ValidationError("feature name count " + std::to_string(names.size()) +
                          " does not match column count " +
                          std::to_string(cols));
  }
  std::unordered_set<std::string> seen;
  for (const auto &name : names) {
    if (name.empty()) {
      throw ValidationError("feature names must be non-empty");
    }
    if (!seen.insert(name).second) {
      throw ValidationError("duplicate feature name '" + name + "'");
    }
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string> split_csv_line(const std::string &line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string quote_if_needed(const std::string &s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) {
    return s;
  }
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') {
      out += "\"\"";
    } else {
      out.push_back(c);
    }
  }
  out.push_back('"');
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "' for reading");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) {
      end = text.size();
    }
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

void check_shape(const MaskedDataset &dataset,
                 const StandardizationParams &params) {
  if (params.means.size() != dataset.cols() ||
      params.stds.size() != dataset.cols()) {
    throw ValidationError("standardization parameters have " +
                          std::to_string(params.means.size()) +
                          " columns, dataset has " +
                          std::to_string(dataset.cols()));
  }
}

} // namespace

DataMatrix::DataMatrix(std::vector<std::string> feature_names, Matrix values)
    : names_(std::move(feature_names)), values_(std::move(values)) {
  validate_names(names_, values_.cols());
  for (Index j = 0; j < values_.cols(); ++j) {
    for (Index i = 0; i < values_.rows(); ++i) {
      const double v = values_(i, j);
      if (!is_missing(v) && !std::isfinite(v)) {
        throw ValidationError("non-finite value at row " + std::to_string(i) +
                              ", column '" + names_[j] + "'");
      }
    }
  }
}

DataMatrix DataMatrix::with_default_names(Matrix values) {
  std::vector<std::string> names;
  names.reserve(values.cols());
  for (Index j = 0; j < values.cols(); ++j) {
    names.push_back("x" + std::to_string(j + 1));
  }
  return DataMatrix(std::move(names), std::move(values));
}

bool DataMatrix::has_missing() const { return values_.hasNaN(); }

std::optional<Index> DataMatrix::column_index(const std::string &name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) {
    return std::nullopt;
  }
  return static_cast<Index>(it - names_.begin());
}

DataMatrix DataMatrix::with_values(Matrix values) const {
  return DataMatrix(names_, std::move(values));
}

bool operator==(const DataMatrix &a, const DataMatrix &b) {
  if (a.names_ != b.names_ || a.rows() != b.rows() || a.cols() != b.cols()) {
    return false;
  }
  for (Index j = 0; j < a.cols(); ++j) {
    for (Index i = 0; i < a.rows(); ++i) {
      const double x = a.values_(i, j);
      const double y = b.values_(i, j);
      if (is_missing(x) != is_missing(y) || (!is_missing(x) && x != y)) {
        return false;
      }
    }
  }
  return true;
}

Mask Mask::from_values(const Matrix &values) {
  return Mask(values.array().isNaN());
}

Mask Mask::none(Index rows, Index cols) {
  return Mask(MaskBits::Constant(rows, cols, false));
}

MaskedDataset::MaskedDataset(DataMatrix data)
    : MaskedDataset(data, Mask::from_values(data.values())) {}

MaskedDataset::MaskedDataset(DataMatrix data, Mask mask)
    : data_(std::move(data)), mask_(std::move(mask)) {
  if (mask_.rows() != data_.rows() || mask_.cols() != data_.cols()) {
    throw ValidationError("mask shape does not match data shape");
  }
  for (Index j = 0; j < data_.cols(); ++j) {
    for (Index i = 0; i < data_.rows(); ++i) {
      if (is_missing(data_(i, j)) != mask_.missing(i, j)) {
        throw ValidationError("mask disagrees with data at row " +
                              std::to_string(i) + ", column '" +
                              data_.feature_names()[j] + "'");
      }
    }
    if (data_.rows() > 0 && mask_.column_count(j) == data_.rows()) {
      throw ValidationError("column '" + data_.feature_names()[j] +
                            "' has no observed values");
    }
  }
}

std::vector<double> MaskedDataset::observed(Index column) const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(rows()));
  for (Index i = 0; i < rows(); ++i) {
    if (!mask_.missing(i, column)) {
      out.push_back(data_(i, column));
    }
  }
  return out;
}

std::set<std::string> default_missing_tokens() { return {"", "NA", "NaN"}; }

MaskedDataset load_csv(const std::filesystem::path &path,
                       const std::set<std::string> &missing_tokens) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) {
    throw ParseError("'" + path.string() + "': missing header row");
  }
  std::vector<std::string> names = split_csv_line(lines.front());
  for (auto &name : names) {
    name = std::string(trim(name));
  }
  const Index cols = static_cast<Index>(names.size());
  const Index rows = static_cast<Index>(lines.size()) - 1;
  Matrix values(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const std::size_t line_no = static_cast<std::size_t>(i) + 2;
    const std::vector<std::string> fields = split_csv_line(lines[i + 1]);
    if (static_cast<Index>(fields.size()) != cols) {
      throw ParseError("'" + path.string() + "' line " +
                       std::to_string(line_no) + " (data row " +
                       std::to_string(i + 1) + "): expected " +
                       std::to_string(cols) + " fields, found " +
                       std::to_string(fields.size()));
    }
    for (Index j = 0; j < cols; ++j) {
      const std::string_view cell = trim(fields[j]);
      if (missing_tokens.count(std::string(cell)) != 0) {
        values(i, j) = kMissing;
        continue;
      }
      double v = 0.0;
      const char *begin = cell.data();
      const char *end = cell.data() + cell.size();
      if (!cell.empty() && *begin == '+') {
        ++begin;
      }
      const auto [ptr, ec] = std::from_chars(begin, end, v);
      if (cell.empty() || ec != std::errc() || ptr != end ||
          !std::isfinite(v)) {
        throw ParseError("'" + path.string() + "' line " +
                         std::to_string(line_no) + " (data row " +
                         std::to_string(i + 1) + "), column '" +
                         names[static_cast<std::size_t>(j)] +
                         "': cannot parse '" + std::string(cell) + "'");
      }
      values(i, j) = v;
    }
  }
  return MaskedDataset(DataMatrix(std::move(names), std::move(values)));
}

void save_csv(const DataMatrix &data, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  std::string text;
  const auto &names = data.feature_names();
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (j > 0) {
      text.push_back(',');
    }
    text += quote_if_needed(names[j]);
  }
  text.push_back('\n');
  char buf[64];
  for (Index i = 0; i < data.rows(); ++i) {
    for (Index j = 0; j < data.cols(); ++j) {
      if (j > 0) {
        text.push_back(',');
      }
      const double v = data(i, j);
      if (!is_missing(v)) {
        const auto res = std::to_chars(buf, buf + sizeof(buf), v,
                                       std::chars_format::general, 17);
        text.append(buf, res.ptr);
      }
    }
    text.push_back('\n');
  }
  out << text;
  if (!out) {
    throw IoError("failed writing '" + path.string() + "'");
  }
}

InjectionResult inject_missing(const MaskedDataset &complete, double rate,
                               std::uint64_t seed) {
  return inject_missing(
      complete, std::vector<double>(static_cast<std::size_t>(complete.cols()),
                                    rate),
      seed);
}

InjectionResult inject_missing(const MaskedDataset &complete,
                               const std::vector<double> &column_rates,
                               std::uint64_t seed) {
  if (static_cast<Index>(column_rates.size()) != complete.cols()) {
    throw ValidationError("expected one missing rate per column");
  }
  for (double r : column_rates) {
    if (!(r >= 0.0 && r < 1.0)) {
      throw DomainError("missing rate must lie in [0, 1), got " +
                        std::to_string(r));
    }
  }
  if (complete.mask().count() != 0) {
    throw ValidationError("inject_missing requires a dataset without missing "
                          "entries");
  }
  const Matrix &truth = complete.data().values();
  Matrix masked = truth;
  const Index n = complete.rows();
  for (Index j = 0; j < complete.cols(); ++j) {
    const double rate = column_rates[static_cast<std::size_t>(j)];
    if (rate == 0.0 || n == 0) {
      continue;
    }
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(j)}));
    std::bernoulli_distribution drop(rate);
    std::vector<bool> column(static_cast<std::size_t>(n));
    while (true) {
      Index dropped = 0;
      for (Index i = 0; i < n; ++i) {
        column[static_cast<std::size_t>(i)] = drop(rng);
        dropped += column[static_cast<std::size_t>(i)] ? 1 : 0;
      }
      if (dropped < n) {
        break;
      }
    }
    for (Index i = 0; i < n; ++i) {
      if (column[static_cast<std::size_t>(i)]) {
        masked(i, j) = kMissing;
      }
    }
  }
  return {MaskedDataset(complete.data().with_values(std::move(masked))),
          complete.data()};
}

std::pair<MaskedDataset, StandardizationParams>
standardize(const MaskedDataset &dataset) {
  const Index d = dataset.cols();
  StandardizationParams params;
  params.means.resize(d);
  params.stds.resize(d);
  Matrix values = dataset.data().values();
  for (Index j = 0; j < d; ++j) {
    const std::vector<double> obs = dataset.observed(j);
    if (obs.size() < 2) {
      throw ValidationError("column '" + dataset.data().feature_names()[j] +
                            "' needs at least 2 observed values to "
                            "standardize");
    }
    const double n = static_cast<double>(obs.size());
    const double mean = std::accumulate(obs.begin(), obs.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : obs) {
      ss += (v - mean) * (v - mean);
    }
    double sd = std::sqrt(ss / n);
    if (sd < kStdFloor) {
      params.warnings.push_back("column '" +
                                dataset.data().feature_names()[j] +
                                "' is constant; std clamped to 1e-8");
      sd = kStdFloor;
    }
    params.means(j) = mean;
    params.stds(j) = sd;
    for (Index i = 0; i < values.rows(); ++i) {
      if (!dataset.mask().missing(i, j)) {
        values(i, j) = (values(i, j) - mean) / sd;
      }
    }
  }
  return {MaskedDataset(dataset.data().with_values(std::move(values)),
                        dataset.mask()),
          std::move(params)};
}

Matrix destandardize_values(const Matrix &values,
                            const StandardizationParams &params) {
  if (params.means.size() != values.cols() ||
      params.stds.size() != values.cols()) {
    throw ValidationError("standardization parameters do not match the "
                          "column count");
  }
  Matrix out = values;
  for (Index j = 0; j < out.cols(); ++j) {
    // NaN cells stay NaN under the affine map.
    out.col(j) = out.col(j).array() * params.stds(j) + params.means(j);
  }
  return out;
}

MaskedDataset destandardize(const MaskedDataset &dataset,
                            const StandardizationParams &params) {
  check_shape(dataset, params);
  return MaskedDataset(dataset.data().with_values(
                           destandardize_values(dataset.data().values(),
                                                params)),
                       dataset.mask());
}

KFoldSplit kfold_split(std::size_t n_rows, std::size_t k,
                       const std::optional<std::vector<int>> &labels,
                       std::uint64_t seed) {
  if (k < 2 || k > n_rows) {
    throw ValidationError("k-fold split needs 2 <= k <= n_rows (k=" +
                          std::to_string(k) +
                          ", n_rows=" + std::to_string(n_rows) + ")");
  }
  if (labels && labels->size() != n_rows) {
    throw ValidationError("label vector length does not match n_rows");
  }
  KFoldSplit split;
  Rng rng(seed);
  std::vector<std::size_t> order;
  order.reserve(n_rows);

  bool stratify = labels.has_value();
  std::map<int, std::vector<std::size_t>> by_class;
  if (stratify) {
    for (std::size_t i = 0; i < n_rows; ++i) {
      by_class[(*labels)[i]].push_back(i);
    }
    for (const auto &[label, members] : by_class) {
      if (members.size() < k) {
        split.warnings.push_back(
            "class " + std::to_string(label) + " has " +
            std::to_string(members.size()) + " members (< k=" +
            std::to_string(k) + "); falling back to an unstratified split");
        stratify = false;
        break;
      }
    }
  }
  if (stratify) {
    // Dealing class-sorted shuffled indices round-robin keeps every class's
    // per-fold count within one row of its share.
    for (auto &[label, members] : by_class) {
      std::shuffle(members.begin(), members.end(), rng);
      order.insert(order.end(), members.begin(), members.end());
    }
  } else {
    order.resize(n_rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
  }
  split.stratified = stratify;

  std::vector<std::size_t> fold_of(n_rows);
  for (std::size_t p = 0; p < n_rows; ++p) {
    fold_of[order[p]] = p % k;
  }
  split.folds.resize(k);
  for (std::size_t i = 0; i < n_rows; ++i) {
    for (std::size_t f = 0; f < k; ++f) {
      (fold_of[i] == f ? split.folds[f].test : split.folds[f].train)
          .push_back(i);
    }
  }
  return split;
}

} // namespace fhmc

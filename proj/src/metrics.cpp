#include "fhmc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fhmc/error.hpp"
#include "fhmc/parallel.hpp"

namespace fhmc {

namespace {

constexpr std::size_t kMaxDiscriminatorFeatures = 4096;
constexpr int kMaxHalvings = 60;

struct ColumnScaler {
  Vector mean;
  Vector scale;

  static ColumnScaler fit(const Matrix &x) {
    ColumnScaler s;
    const double n = static_cast<double>(x.rows());
    s.mean = x.colwise().mean().transpose();
    s.scale = ((x.rowwise() - s.mean.transpose()).array().square().colwise().sum() / n)
                  .sqrt()
                  .transpose();
    for (Index j = 0; j < s.scale.size(); ++j) {
      if (!(s.scale(j) > kStdFloor)) {
        s.scale(j) = 1.0;
      }
    }
    return s;
  }

  Matrix apply(const Matrix &x) const {
    return (x.rowwise() - mean.transpose()).array().rowwise() /
           scale.transpose().array();
  }
};

Matrix with_interactions(const Matrix &x) {
  const Index d = x.cols();
  Matrix out(x.rows(), d + d * (d + 1) / 2);
  out.leftCols(d) = x;
  Index c = d;
  for (Index a = 0; a < d; ++a) {
    for (Index b = a; b < d; ++b) {
      out.col(c++) = x.col(a).cwiseProduct(x.col(b));
    }
  }
  return out;
}

Matrix rows_of(const Matrix &x, const std::vector<std::size_t> &idx) {
  Matrix out(static_cast<Index>(idx.size()), x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.row(static_cast<Index>(r)) = x.row(static_cast<Index>(idx[r]));
  }
  return out;
}

Matrix with_intercept(const Matrix &x) {
  Matrix out(x.rows(), x.cols() + 1);
  out.leftCols(x.cols()) = x;
  out.col(x.cols()).setOnes();
  return out;
}

double softplus(double s) {
  return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
}

double sigmoid(double s) {
  if (s >= 0.0) {
    return 1.0 / (1.0 + std::exp(-s));
  }
  const double e = std::exp(s);
  return e / (1.0 + e);
}

// Objective and gradient of the penalised mean negative log-likelihood.
struct LogisticObjective {
  const Matrix &xa;
  const std::vector<int> &labels;
  int n_classes;
  double l2;

  Index outputs() const { return n_classes == 2 ? 1 : n_classes; }

  double value(const Matrix &w) const {
    const Matrix s = xa * w;
    const double n = static_cast<double>(xa.rows());
    double loss = 0.0;
    for (Index i = 0; i < s.rows(); ++i) {
      const int y = labels[static_cast<std::size_t>(i)];
      if (n_classes == 2) {
        loss += softplus(s(i, 0)) - (y == 1 ? s(i, 0) : 0.0);
      } else {
        const double m = s.row(i).maxCoeff();
        loss += m + std::log((s.row(i).array() - m).exp().sum()) - s(i, y);
      }
    }
    const Index p = w.rows() - 1;
    return loss / n + 0.5 * l2 * w.topRows(p).squaredNorm();
  }

  Matrix gradient(const Matrix &w) const {
    Matrix resid = xa * w;
    for (Index i = 0; i < resid.rows(); ++i) {
      const int y = labels[static_cast<std::size_t>(i)];
      if (n_classes == 2) {
        resid(i, 0) = sigmoid(resid(i, 0)) - (y == 1 ? 1.0 : 0.0);
      } else {
        const double m = resid.row(i).maxCoeff();
        resid.row(i) = (resid.row(i).array() - m).exp().matrix();
        resid.row(i) /= resid.row(i).sum();
        resid(i, y) -= 1.0;
      }
    }
    Matrix g = xa.transpose() * resid / static_cast<double>(xa.rows());
    const Index p = w.rows() - 1;
    g.topRows(p) += l2 * w.topRows(p);
    return g;
  }
};

std::vector<int> sorted_labels(const std::vector<int> &y) {
  std::vector<int> out = y;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Matrix complete_values(const DataMatrix &m, const char *what) {
  if (m.has_missing()) {
    throw ValidationError(std::string(what) + " contains missing entries");
  }
  return m.values();
}

} // namespace

void MetricsReport::validate() const {
  if (!nrmse && !pmse && !classification && !covariance_distance) {
    throw ValidationError("metrics report carries no metric");
  }
  if (nrmse && !(*nrmse >= 0.0)) {
    throw ValidationError("nrmse must be >= 0");
  }
  if (pmse && !(*pmse >= 0.0 && *pmse <= 0.25)) {
    throw ValidationError("pmse must lie in [0, 0.25]");
  }
  if (covariance_distance && !(*covariance_distance >= 0.0)) {
    throw ValidationError("covariance_distance must be >= 0");
  }
  if (classification) {
    for (double v : {classification->accuracy, classification->precision_macro,
                     classification->recall_macro, classification->f1_macro}) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ValidationError("classification scores must lie in [0, 1]");
      }
    }
  }
}

void PropensityConfig::validate() const {
  if (classifier_epochs < 1) {
    throw ValidationError("classifier_epochs must be >= 1");
  }
  if (!(learning_rate > 0.0)) {
    throw ValidationError("learning_rate must be > 0");
  }
  if (!(l2 >= 0.0)) {
    throw ValidationError("l2 must be >= 0");
  }
  if (folds < 2) {
    throw ValidationError("folds must be >= 2");
  }
}

double nrmse(const DataMatrix &x_true, const DataMatrix &x_imp,
             const Mask &mask) {
  if (x_true.rows() != x_imp.rows() || x_true.cols() != x_imp.cols() ||
      mask.rows() != x_true.rows() || mask.cols() != x_true.cols()) {
    throw ValidationError("nrmse: shapes of truth, imputation and mask differ");
  }
  std::vector<double> t, e;
  for (Index j = 0; j < x_true.cols(); ++j) {
    for (Index i = 0; i < x_true.rows(); ++i) {
      if (!mask.missing(i, j)) {
        continue;
      }
      if (is_missing(x_true(i, j)) || is_missing(x_imp(i, j))) {
        throw ValidationError("nrmse: missing value at a scored entry");
      }
      t.push_back(x_true(i, j));
      e.push_back(x_true(i, j) - x_imp(i, j));
    }
  }
  if (t.empty()) {
    throw ValidationError("nrmse: mask has no missing entries");
  }
  const double n = static_cast<double>(t.size());
  const double mean = std::accumulate(t.begin(), t.end(), 0.0) / n;
  double var = 0.0, mse = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    var += (t[k] - mean) * (t[k] - mean);
    mse += e[k] * e[k];
  }
  if (var == 0.0) {
    throw UndefinedMetricError(
        "nrmse: true values at missing entries have zero variance");
  }
  return std::sqrt(mse / var);
}

Matrix population_covariance(const Matrix &x) {
  if (x.rows() < 2) {
    throw ValidationError("covariance needs at least 2 rows");
  }
  const Matrix centered = x.rowwise() - x.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(x.rows());
}

double covariance_distance(const DataMatrix &a, const DataMatrix &b) {
  if (a.cols() != b.cols()) {
    throw ValidationError("covariance_distance: column counts differ");
  }
  const Matrix ca = population_covariance(complete_values(a, "first matrix"));
  const Matrix cb = population_covariance(complete_values(b, "second matrix"));
  const double denom = ca.norm();
  if (denom == 0.0) {
    throw UndefinedMetricError(
        "covariance_distance: reference covariance is zero");
  }
  return (ca - cb).norm() / denom;
}

LogisticFit train_logistic(const Matrix &x, const std::vector<int> &labels,
                           int n_classes, std::size_t epochs,
                           double learning_rate, double l2) {
  if (static_cast<std::size_t>(x.rows()) != labels.size() || x.rows() == 0) {
    throw ValidationError("train_logistic: need one label per (non-empty) row");
  }
  if (n_classes < 2) {
    throw ValidationError("train_logistic: need at least two classes");
  }
  for (int y : labels) {
    if (y < 0 || y >= n_classes) {
      throw ValidationError("train_logistic: label out of range");
    }
  }
  const Matrix xa = with_intercept(x);
  const LogisticObjective obj{xa, labels, n_classes, l2};
  Matrix w = Matrix::Zero(xa.cols(), obj.outputs());
  LogisticFit fit;
  double loss = obj.value(w);
  double rate = learning_rate;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    fit.loss_history.push_back(loss);
    const Matrix g = obj.gradient(w);
    const double gnorm = g.norm();
    if (!std::isfinite(gnorm) || !std::isfinite(loss)) {
      throw TrainingError("logistic regression diverged at epoch " +
                          std::to_string(epoch));
    }
    if (gnorm < 1e-10) {
      break;
    }
    bool moved = false;
    for (int h = 0; h <= kMaxHalvings; ++h) {
      const Matrix candidate = w - rate * g;
      const double next = obj.value(candidate);
      if (std::isfinite(next) && next <= loss) {
        w = candidate;
        loss = next;
        moved = true;
        break;
      }
      rate *= 0.5;
    }
    if (!moved) {
      if (gnorm > 1e-6) {
        throw TrainingError("logistic regression stalled at epoch " +
                            std::to_string(epoch) +
                            " with gradient norm " + std::to_string(gnorm));
      }
      break;
    }
  }
  fit.loss_history.push_back(loss);
  fit.weights = std::move(w);
  return fit;
}

Matrix predict_logistic(const LogisticFit &fit, const Matrix &x,
                        int n_classes) {
  const Matrix s = with_intercept(x) * fit.weights;
  Matrix p(x.rows(), n_classes);
  for (Index i = 0; i < x.rows(); ++i) {
    if (n_classes == 2) {
      p(i, 1) = sigmoid(s(i, 0));
      p(i, 0) = 1.0 - p(i, 1);
    } else {
      const double m = s.row(i).maxCoeff();
      p.row(i) = (s.row(i).array() - m).exp().matrix();
      p.row(i) /= p.row(i).sum();
    }
  }
  return p;
}

double pmse_from_probabilities(const std::vector<double> &p, double c) {
  if (p.empty()) {
    throw ValidationError("pmse: no probabilities");
  }
  double acc = 0.0;
  for (double v : p) {
    acc += (v - c) * (v - c);
  }
  return acc / static_cast<double>(p.size());
}

double pmse(const DataMatrix &original, const DataMatrix &synthetic,
            const PropensityConfig &cfg) {
  cfg.validate();
  if (original.cols() != synthetic.cols()) {
    throw ValidationError("pmse: column counts differ");
  }
  if (original.rows() == 0 || synthetic.rows() == 0) {
    throw ValidationError("pmse: inputs must be non-empty");
  }
  const Index d = original.cols();
  if (cfg.interactions &&
      static_cast<std::size_t>(d + d * (d + 1) / 2) > kMaxDiscriminatorFeatures) {
    throw ValidationError("pmse: too many columns for interaction features; "
                          "set interactions to false");
  }
  const Index n0 = original.rows();
  const Index n1 = synthetic.rows();
  Matrix x(n0 + n1, d);
  x.topRows(n0) = complete_values(original, "original data");
  x.bottomRows(n1) = complete_values(synthetic, "synthetic data");
  std::vector<int> y(static_cast<std::size_t>(n0 + n1), 0);
  std::fill(y.begin() + n0, y.end(), 1);
  const double c = static_cast<double>(n1) / static_cast<double>(n0 + n1);

  const KFoldSplit split =
      kfold_split(static_cast<std::size_t>(n0 + n1), cfg.folds, y, cfg.seed);
  std::vector<double> p(y.size(), c);
  for (const Fold &fold : split.folds) {
    Matrix train = rows_of(x, fold.train);
    Matrix test = rows_of(x, fold.test);
    const ColumnScaler base = ColumnScaler::fit(train);
    train = base.apply(train);
    test = base.apply(test);
    if (cfg.interactions) {
      train = with_interactions(train);
      test = with_interactions(test);
      const ColumnScaler expanded = ColumnScaler::fit(train);
      train = expanded.apply(train);
      test = expanded.apply(test);
    }
    std::vector<int> train_y;
    train_y.reserve(fold.train.size());
    for (std::size_t i : fold.train) {
      train_y.push_back(y[i]);
    }
    const LogisticFit fit = train_logistic(train, train_y, 2,
                                           cfg.classifier_epochs,
                                           cfg.learning_rate, cfg.l2);
    const Matrix prob = predict_logistic(fit, test, 2);
    for (std::size_t r = 0; r < fold.test.size(); ++r) {
      p[fold.test[r]] = prob(static_cast<Index>(r), 1);
    }
  }
  return pmse_from_probabilities(p, c);
}

const char *classifier_name(Classifier c) {
  return c == Classifier::logistic ? "logistic" : "nearest_neighbor";
}

ClassificationScores macro_scores(const std::vector<int> &y_true,
                                  const std::vector<int> &y_pred,
                                  const std::vector<int> &label_set) {
  if (y_true.size() != y_pred.size() || y_true.empty()) {
    throw ValidationError("macro_scores: need equal-length non-empty labels");
  }
  if (label_set.empty()) {
    throw ValidationError("macro_scores: empty label set");
  }
  ClassificationScores s;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    correct += y_true[i] == y_pred[i] ? 1 : 0;
  }
  s.accuracy = static_cast<double>(correct) / static_cast<double>(y_true.size());
  for (int label : label_set) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
      const bool t = y_true[i] == label;
      const bool p = y_pred[i] == label;
      tp += (t && p) ? 1 : 0;
      fp += (!t && p) ? 1 : 0;
      fn += (t && !p) ? 1 : 0;
    }
    const double precision =
        tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double recall =
        tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    const double f1 = precision + recall > 0.0
                          ? 2.0 * precision * recall / (precision + recall)
                          : 0.0;
    s.precision_macro += precision;
    s.recall_macro += recall;
    s.f1_macro += f1;
  }
  const double k = static_cast<double>(label_set.size());
  s.precision_macro /= k;
  s.recall_macro /= k;
  s.f1_macro /= k;
  return s;
}

ClassificationScores classification_eval(const Matrix &train_x,
                                         const std::vector<int> &train_y,
                                         const Matrix &test_x,
                                         const std::vector<int> &test_y,
                                         Classifier classifier,
                                         const ClassifierConfig &cfg) {
  if (static_cast<std::size_t>(train_x.rows()) != train_y.size() ||
      static_cast<std::size_t>(test_x.rows()) != test_y.size() ||
      train_x.cols() != test_x.cols()) {
    throw ValidationError("classification_eval: shape mismatch");
  }
  if (!train_x.allFinite() || !test_x.allFinite()) {
    throw ValidationError("classification_eval: features must be complete");
  }
  const std::vector<int> labels = sorted_labels(train_y);
  if (labels.size() < 2) {
    throw ValidationError("classification_eval: training set has a single "
                          "class");
  }
  auto index_of = [&](int label) {
    auto it = std::lower_bound(labels.begin(), labels.end(), label);
    if (it == labels.end() || *it != label) {
      throw ValidationError("classification_eval: test label " +
                            std::to_string(label) +
                            " is not in the training label set");
    }
    return static_cast<int>(it - labels.begin());
  };
  for (int y : test_y) {
    index_of(y);
  }

  std::vector<int> pred(test_y.size());
  if (classifier == Classifier::logistic) {
    const ColumnScaler scaler = ColumnScaler::fit(train_x);
    std::vector<int> idx;
    idx.reserve(train_y.size());
    for (int y : train_y) {
      idx.push_back(index_of(y));
    }
    const int k = static_cast<int>(labels.size());
    const LogisticFit fit = train_logistic(scaler.apply(train_x), idx, k,
                                           cfg.epochs, cfg.learning_rate,
                                           cfg.l2);
    const Matrix prob = predict_logistic(fit, scaler.apply(test_x), k);
    for (Index i = 0; i < prob.rows(); ++i) {
      Index best = 0;
      prob.row(i).maxCoeff(&best);
      pred[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(best)];
    }
  } else {
    for (Index i = 0; i < test_x.rows(); ++i) {
      Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Index r = 0; r < train_x.rows(); ++r) {
        const double dist = (train_x.row(r) - test_x.row(i)).squaredNorm();
        if (dist < best_d) {
          best_d = dist;
          best = r;
        }
      }
      pred[static_cast<std::size_t>(i)] = train_y[static_cast<std::size_t>(best)];
    }
  }
  return macro_scores(test_y, pred, labels);
}

ClassificationScores cross_validate(const Matrix &x,
                                    const std::vector<int> &y, std::size_t k,
                                    Classifier classifier, std::uint64_t seed,
                                    const ClassifierConfig &cfg,
                                    std::size_t jobs) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) {
    throw ValidationError("cross_validate: need one label per row");
  }
  const KFoldSplit split =
      kfold_split(static_cast<std::size_t>(x.rows()), k, y, seed);
  std::vector<ClassificationScores> scores(split.folds.size());
  parallel_for(split.folds.size(), jobs, [&](std::size_t f) {
    const Fold &fold = split.folds[f];
    std::vector<int> ytr, yte;
    for (std::size_t i : fold.train) {
      ytr.push_back(y[i]);
    }
    for (std::size_t i : fold.test) {
      yte.push_back(y[i]);
    }
    scores[f] = classification_eval(rows_of(x, fold.train), ytr,
                                    rows_of(x, fold.test), yte, classifier,
                                    cfg);
  });
  ClassificationScores mean;
  for (const auto &s : scores) {
    mean.accuracy += s.accuracy;
    mean.precision_macro += s.precision_macro;
    mean.recall_macro += s.recall_macro;
    mean.f1_macro += s.f1_macro;
  }
  const double n = static_cast<double>(scores.size());
  mean.accuracy /= n;
  mean.precision_macro /= n;
  mean.recall_macro /= n;
  mean.f1_macro /= n;
  return mean;
}

PcaResult pca_project(const DataMatrix &data, std::size_t components) {
  const Matrix x = complete_values(data, "pca input");
  if (x.rows() < 2) {
    throw ValidationError("pca_project: need at least 2 rows");
  }
  const Index d = x.cols();
  const Index k = static_cast<Index>(components);
  if (k < 1 || k > d) {
    throw ValidationError("pca_project: components must lie in [1, n_cols]");
  }
  constexpr int kIterations = 1000;
  constexpr double kTol = 1e-10;

  PcaResult out;
  out.center = x.colwise().mean().transpose();
  const Matrix centered = x.rowwise() - out.center.transpose();
  const Matrix cov = centered.transpose() * centered /
                     static_cast<double>(x.rows());
  Matrix deflated = cov;
  Matrix basis(d, k);
  Vector eigenvalues(k);
  for (Index c = 0; c < k; ++c) {
    Vector v(d);
    for (Index j = 0; j < d; ++j) {
      v(j) = 1.0 + 0.5 * std::sin(1.0 + static_cast<double>(j) +
                                  7.0 * static_cast<double>(c));
    }
    auto orthogonalize = [&](Vector &w) {
      for (Index prev = 0; prev < c; ++prev) {
        w -= basis.col(prev).dot(w) * basis.col(prev);
      }
    };
    orthogonalize(v);
    if (v.norm() < 1e-12) {
      for (Index j = 0; j < d && v.norm() < 1e-12; ++j) {
        v = Vector::Unit(d, j);
        orthogonalize(v);
      }
    }
    v.normalize();
    for (int it = 0; it < kIterations; ++it) {
      Vector w = deflated * v;
      orthogonalize(w);
      const double norm = w.norm();
      if (norm < 1e-300) {
        break;
      }
      w /= norm;
      const bool done = (w - v).norm() < kTol || (w + v).norm() < kTol;
      v = w;
      if (done) {
        break;
      }
    }
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) {
      v = -v;
    }
    basis.col(c) = v;
    eigenvalues(c) = std::max(0.0, v.dot(cov * v));
    deflated -= eigenvalues(c) * v * v.transpose();
  }

  std::vector<Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return eigenvalues(a) > eigenvalues(b);
  });
  out.components.resize(d, k);
  out.explained_variance_ratio.resize(k);
  const double total = cov.trace();
  std::vector<std::string> names;
  for (Index c = 0; c < k; ++c) {
    const Index src = order[static_cast<std::size_t>(c)];
    out.components.col(c) = basis.col(src);
    out.explained_variance_ratio(c) =
        total > 0.0 ? eigenvalues(src) / total : 0.0;
    names.push_back("pc" + std::to_string(c + 1));
  }
  out.projected = DataMatrix(std::move(names), centered * out.components);
  return out;
}

Matrix pca_transform(const PcaResult &pca, const Matrix &x) {
  if (x.cols() != pca.center.size()) {
    throw ValidationError("pca_transform: column count mismatch");
  }
  return (x.rowwise() - pca.center.transpose()) * pca.components;
}

} // namespace fhmc

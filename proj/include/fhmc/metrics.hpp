#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fhmc/data_model.hpp"

namespace fhmc {

struct ClassificationScores {
  double accuracy = 0.0;
  double precision_macro = 0.0;
  double recall_macro = 0.0;
  double f1_macro = 0.0;
};

struct MetricsReport {
  std::optional<double> nrmse;
  std::optional<double> pmse;
  std::optional<ClassificationScores> classification;
  std::optional<double> covariance_distance;
  std::uint64_t seed = 0;
  // Free-form provenance (method name, mode, file names, ...).
  std::map<std::string, std::string> metadata;

  // Throws ValidationError if no metric is present or one is out of range.
  void validate() const;
};

struct PropensityConfig {
  std::size_t classifier_epochs = 500;
  double learning_rate = 0.1;
  double l2 = 1e-3;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  // Add all pairwise products (squares included) to the discriminator's
  // inputs so that it can see dependence between features.
  bool interactions = true;

  void validate() const;
};

// Root mean squared error over missing entries divided by the population
// standard deviation of the true values at those entries.
double nrmse(const DataMatrix &x_true, const DataMatrix &x_imp,
             const Mask &mask);

// Population covariance of the rows of `x`.
Matrix population_covariance(const Matrix &x);

// ||cov(a) - cov(b)||_F / ||cov(a)||_F.
double covariance_distance(const DataMatrix &a, const DataMatrix &b);

struct LogisticFit {
  Matrix weights; // (features + 1) x outputs, last row is the intercept
  std::vector<double> loss_history; // objective before each epoch, then final
};

// Full-batch gradient descent on the L2-penalised (intercept excluded) mean
// negative log-likelihood. With two classes a single sigmoid output is fitted;
// otherwise a softmax with one output per class. The step is halved whenever
// it would raise the objective, so the loss history is non-increasing.
// Labels must be 0..n_classes-1.
LogisticFit train_logistic(const Matrix &x, const std::vector<int> &labels,
                           int n_classes, std::size_t epochs,
                           double learning_rate, double l2);

// Class probabilities, one column per class.
Matrix predict_logistic(const LogisticFit &fit, const Matrix &x,
                        int n_classes);

// Propensity mean squared error of a real-vs-synthetic discriminator,
// evaluated on held-out rows of a k-fold split.
double pmse(const DataMatrix &original, const DataMatrix &synthetic,
            const PropensityConfig &cfg);

// pMSE formula for given probabilities and synthetic share c.
double pmse_from_probabilities(const std::vector<double> &p, double c);

enum class Classifier { logistic, nearest_neighbor };

const char *classifier_name(Classifier c);

// Macro scores over `label_set`; a label never seen in y_true or y_pred
// contributes 0 to every macro average.
ClassificationScores macro_scores(const std::vector<int> &y_true,
                                  const std::vector<int> &y_pred,
                                  const std::vector<int> &label_set);

struct ClassifierConfig {
  std::size_t epochs = 500;
  double learning_rate = 0.1;
  double l2 = 1e-3;
};

// Fits on train (features standardised with train statistics) and scores on
// test. Macro averages run over the train label set.
ClassificationScores classification_eval(const Matrix &train_x,
                                         const std::vector<int> &train_y,
                                         const Matrix &test_x,
                                         const std::vector<int> &test_y,
                                         Classifier classifier,
                                         const ClassifierConfig &cfg = {});

// Mean of per-fold scores over a (stratified where possible) k-fold split.
ClassificationScores cross_validate(const Matrix &x,
                                    const std::vector<int> &y, std::size_t k,
                                    Classifier classifier, std::uint64_t seed,
                                    const ClassifierConfig &cfg = {},
                                    std::size_t jobs = 1);

struct PcaResult {
  DataMatrix projected; // columns pc1..pcK
  Vector explained_variance_ratio;
  Matrix components; // d x K, orthonormal columns
  Vector center;
};

PcaResult pca_project(const DataMatrix &data, std::size_t components);

// Projects new rows with an existing PCA basis.
Matrix pca_transform(const PcaResult &pca, const Matrix &x);

// Row of a tidy plot-data table.
struct TidyRow {
  std::string series;
  double x = 0.0;
  double y = 0.0;
};

} // namespace fhmc

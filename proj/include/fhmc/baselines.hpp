#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "fhmc/data_model.hpp"

namespace fhmc {

struct KnnConfig {
  std::size_t k = 5;
  std::size_t jobs = 1;

  void validate(Index n_rows) const;
};

struct PpcaConfig {
  std::size_t n_components = 0; // 0 = min(10, d - 1)
  std::size_t max_em_iters = 500;
  double tol = 1e-6; // relative change of the observed-data log-likelihood
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  std::size_t resolved_components(Index n_cols) const;
  void validate(Index n_rows, Index n_cols) const;
};

// Missing entries replaced by the observed column mean.
DataMatrix mean_impute(const MaskedDataset &dataset);

// Euclidean distance over co-observed coordinates scaled by
// sqrt(d / |co-observed|); infinite when nothing is co-observed.
double knn_distance(const Matrix &values, const MaskBits &missing, Index a,
                    Index b);

// Each missing (i, j) gets the mean of column j over the k nearest other rows
// that observe j; ties go to the lower row index.
DataMatrix knn_impute(const MaskedDataset &dataset, const KnnConfig &cfg);

struct PpcaModel {
  Matrix w;  // d x q loadings
  Vector mu; // d
  double sigma2 = 1.0;
  std::vector<double> log_likelihood; // observed-data, one per EM iteration
  std::size_t iterations = 0;
  bool converged = false;

  // Orthogonal projection of complete rows onto the principal subspace.
  Matrix reconstruct(const Matrix &complete) const;
};

inline constexpr double kPpcaSigma2Floor = 1e-8;

// EM for x = W z + mu + eps with missing coordinates integrated out exactly.
// Throws NumericalError if the log-likelihood drops by more than
// 1e-9 * max(1, |LL|) between iterations.
PpcaModel ppca_fit(const MaskedDataset &dataset, const PpcaConfig &cfg);

// Missing entries replaced by E[x_missing | x_observed] under the fitted
// model.
DataMatrix ppca_impute(const MaskedDataset &dataset, const PpcaConfig &cfg);
DataMatrix ppca_impute(const MaskedDataset &dataset, const PpcaModel &model);

} // namespace fhmc

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "fhmc/samplers.hpp"

namespace fhmc {

// Gaussian likelihood for one feature, Laplace(0, b) prior on the mean and a
// N(0, s^2) prior on log sigma. Parameters are (mu, log_sigma).
struct FeatureModel {
  double prior_scale_mu = 1.0;        // b
  double prior_scale_log_sigma = 1.0; // s

  void validate() const;
};

// Sufficient statistics of one column. The centered sum of squares is floored
// at n * kStdFloor^2 so constant columns keep a finite posterior.
struct ColumnSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double centered_ss = 0.0;

  static ColumnSummary of(std::span<const double> observed);
};

double feature_log_posterior(const Eigen::Vector2d &params,
                             const ColumnSummary &column,
                             const FeatureModel &model);
double feature_log_posterior(const Eigen::Vector2d &params,
                             std::span<const double> observed,
                             const FeatureModel &model);

// Analytic gradient; the Laplace subgradient at mu == 0 is taken as 0.
Eigen::Vector2d feature_grad(const Eigen::Vector2d &params,
                             const ColumnSummary &column,
                             const FeatureModel &model);
Eigen::Vector2d feature_grad(const Eigen::Vector2d &params,
                             std::span<const double> observed,
                             const FeatureModel &model);

TargetDensity feature_target(const ColumnSummary &column,
                             const FeatureModel &model);

struct FeaturePosterior {
  std::size_t feature_index = 0;
  std::vector<double> mu_draws;
  std::vector<double> sigma_draws;
  double mu_hat = 0.0;
  double sigma_hat = 0.0;
  double acceptance_rate = 0.0;
};

// HMC over (mu, log sigma) for one column. The chain runs in coordinates
// centred and scaled by a Laplace approximation at the sample mean, which is
// a fixed linear change of variables (constant Jacobian).
FeaturePosterior fit_feature(std::span<const double> column,
                             const FeatureModel &model,
                             const SamplerConfig &cfg,
                             std::size_t feature_index = 0);

} // namespace fhmc

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fhmc/samplers.hpp"

namespace test_util {

inline std::filesystem::path scratch_dir(const std::string &name) {
  const auto dir = std::filesystem::temp_directory_path() / "fhmc_tests" / name;
  std::filesystem::create_directories(dir);
  return dir;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// One-sample Kolmogorov-Smirnov statistic against a continuous cdf.
inline double ks_statistic(std::vector<double> xs,
                           const std::function<double(double)> &cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f,
                  f - static_cast<double>(i) / n});
  }
  return d;
}

// Asymptotic Kolmogorov tail probability with the small-sample correction
// sqrt(n) + 0.12 + 0.11/sqrt(n).
inline double ks_p_value(double d, std::size_t n) {
  const double rn = std::sqrt(static_cast<double>(n));
  const double lambda = (rn + 0.12 + 0.11 / rn) * d;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-12) {
      break;
    }
  }
  return std::clamp(sum, 0.0, 1.0);
}

// Zero-mean Gaussian target with the given covariance, including analytic
// full conditionals.
inline fhmc::TargetDensity gaussian_target(const Eigen::MatrixXd &cov) {
  const Eigen::MatrixXd prec = cov.inverse();
  fhmc::TargetDensity t;
  t.dim = cov.rows();
  t.log_density = [prec](const Eigen::VectorXd &x) {
    return -0.5 * x.dot(prec * x);
  };
  t.grad_log_density = [prec](const Eigen::VectorXd &x) -> Eigen::VectorXd {
    return -(prec * x);
  };
  t.conditional_params = [prec](Eigen::Index i, const Eigen::VectorXd &x) {
    const double pii = prec(i, i);
    const double s = prec.row(i).dot(x) - pii * x(i);
    return std::pair<double, double>(-s / pii, 1.0 / std::sqrt(pii));
  };
  return t;
}

inline double sample_mean(const std::vector<double> &xs) {
  double s = 0.0;
  for (double x : xs) {
    s += x;
  }
  return s / static_cast<double>(xs.size());
}

inline double sample_var(const std::vector<double> &xs) {
  const double m = sample_mean(xs);
  double s = 0.0;
  for (double x : xs) {
    s += (x - m) * (x - m);
  }
  return s / static_cast<double>(xs.size());
}

} // namespace test_util

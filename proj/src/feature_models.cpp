#include "fhmc/feature_models.hpp"

#include <cmath>
#include <numbers>

#include "fhmc/data_model.hpp"
#include "fhmc/error.hpp"

namespace fhmc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Root of d/dl log p(mean, l) in l: -n + SS*exp(-2l) - l/s^2 + 1 = 0. The
// function is convex and strictly decreasing, so Newton converges
// monotonically after its first step.
double log_sigma_center(const ColumnSummary &c, const FeatureModel &m) {
  const double n = static_cast<double>(c.n);
  const double inv_s2 = 1.0 / (m.prior_scale_log_sigma * m.prior_scale_log_sigma);
  double l = 0.5 * std::log(c.centered_ss / n);
  for (int it = 0; it < 200; ++it) {
    const double tau = std::exp(-2.0 * l);
    const double f = -n + c.centered_ss * tau - l * inv_s2 + 1.0;
    const double df = -2.0 * c.centered_ss * tau - inv_s2;
    const double step = f / df;
    l -= step;
    if (std::abs(step) < 1e-12 * (1.0 + std::abs(l))) {
      break;
    }
  }
  return l;
}

} // namespace

void FeatureModel::validate() const {
  if (!(prior_scale_mu > 0.0) || !(prior_scale_log_sigma > 0.0)) {
    throw ValidationError("feature model prior scales must be > 0");
  }
}

ColumnSummary ColumnSummary::of(std::span<const double> observed) {
  if (observed.empty()) {
    throw ValidationError("column summary needs at least one value");
  }
  ColumnSummary c;
  c.n = observed.size();
  double sum = 0.0;
  for (double v : observed) {
    sum += v;
  }
  c.mean = sum / static_cast<double>(c.n);
  double ss = 0.0;
  for (double v : observed) {
    ss += (v - c.mean) * (v - c.mean);
  }
  c.centered_ss =
      std::max(ss, static_cast<double>(c.n) * kStdFloor * kStdFloor);
  return c;
}

double feature_log_posterior(const Eigen::Vector2d &params,
                             const ColumnSummary &c,
                             const FeatureModel &m) {
  const double mu = params(0);
  const double l = params(1);
  const double n = static_cast<double>(c.n);
  const double dev = c.mean - mu;
  const double sq = c.centered_ss + n * dev * dev;
  const double loglik = -0.5 * n * kLog2Pi - n * l - 0.5 * sq * std::exp(-2.0 * l);
  const double b = m.prior_scale_mu;
  const double s = m.prior_scale_log_sigma;
  const double log_prior_mu = -std::log(2.0 * b) - std::abs(mu) / b;
  const double log_prior_l = -0.5 * kLog2Pi - std::log(s) - 0.5 * (l / s) * (l / s);
  return loglik + log_prior_mu + log_prior_l + l;
}

double feature_log_posterior(const Eigen::Vector2d &params,
                             std::span<const double> observed,
                             const FeatureModel &model) {
  return feature_log_posterior(params, ColumnSummary::of(observed), model);
}

Eigen::Vector2d feature_grad(const Eigen::Vector2d &params,
                             const ColumnSummary &c, const FeatureModel &m) {
  const double mu = params(0);
  const double l = params(1);
  const double n = static_cast<double>(c.n);
  const double tau = std::exp(-2.0 * l);
  const double dev = c.mean - mu;
  const double sq = c.centered_ss + n * dev * dev;
  const double s = m.prior_scale_log_sigma;
  Eigen::Vector2d g;
  g(0) = n * dev * tau - sign(mu) / m.prior_scale_mu;
  g(1) = -n + sq * tau - l / (s * s) + 1.0;
  return g;
}

Eigen::Vector2d feature_grad(const Eigen::Vector2d &params,
                             std::span<const double> observed,
                             const FeatureModel &model) {
  return feature_grad(params, ColumnSummary::of(observed), model);
}

TargetDensity feature_target(const ColumnSummary &column,
                             const FeatureModel &model) {
  TargetDensity t;
  t.dim = 2;
  t.log_density = [column, model](const Vector &x) {
    return feature_log_posterior(Eigen::Vector2d(x(0), x(1)), column, model);
  };
  t.grad_log_density = [column, model](const Vector &x) -> Vector {
    return feature_grad(Eigen::Vector2d(x(0), x(1)), column, model);
  };
  return t;
}

FeaturePosterior fit_feature(std::span<const double> column,
                             const FeatureModel &model,
                             const SamplerConfig &cfg,
                             std::size_t feature_index) {
  model.validate();
  cfg.validate();
  if (column.size() < 2) {
    throw ValidationError("fit_feature needs at least 2 observed values");
  }
  const ColumnSummary summary = ColumnSummary::of(column);
  const double n = static_cast<double>(summary.n);
  const double l0 = log_sigma_center(summary, model);
  const double tau0 = std::exp(-2.0 * l0);
  const double s = model.prior_scale_log_sigma;
  // Inverse square roots of the negative Hessian diagonal at (mean, l0); the
  // cross term vanishes there.
  const Eigen::Vector2d center(summary.mean, l0);
  const Eigen::Vector2d scale(std::exp(l0) / std::sqrt(n),
                              1.0 / std::sqrt(2.0 * summary.centered_ss * tau0 +
                                              1.0 / (s * s)));

  TargetDensity whitened;
  whitened.dim = 2;
  whitened.log_density = [&](const Vector &z) {
    const Eigen::Vector2d p = center + scale.cwiseProduct(Eigen::Vector2d(z(0), z(1)));
    return feature_log_posterior(p, summary, model);
  };
  whitened.grad_log_density = [&](const Vector &z) -> Vector {
    const Eigen::Vector2d p = center + scale.cwiseProduct(Eigen::Vector2d(z(0), z(1)));
    return scale.cwiseProduct(feature_grad(p, summary, model));
  };

  const Chain chain = run_chain(Kernel::hmc, Vector::Zero(2), whitened, cfg);

  FeaturePosterior post;
  post.feature_index = feature_index;
  post.mu_draws.reserve(chain.states.size());
  post.sigma_draws.reserve(chain.states.size());
  double mu_sum = 0.0;
  double sigma_sum = 0.0;
  for (const Vector &z : chain.states) {
    const double mu = center(0) + scale(0) * z(0);
    const double sigma = std::exp(center(1) + scale(1) * z(1));
    post.mu_draws.push_back(mu);
    post.sigma_draws.push_back(sigma);
    mu_sum += mu;
    sigma_sum += sigma;
  }
  const double k = static_cast<double>(chain.states.size());
  post.mu_hat = mu_sum / k;
  post.sigma_hat = sigma_sum / k;
  post.acceptance_rate = static_cast<double>(chain.accept_count) /
                         static_cast<double>(chain.proposal_count);
  return post;
}

} // namespace fhmc

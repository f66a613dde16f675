#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "fhmc/baselines.hpp"
#include "fhmc/data_model.hpp"
#include "fhmc/error.hpp"
#include "fhmc/fixtures.hpp"
#include "fhmc/metrics.hpp"

using namespace fhmc;

namespace {

Matrix rank_one(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector w(4), mu(4);
  w << 1.0, -2.0, 0.5, 1.5;
  mu << 3.0, 0.0, -1.0, 2.0;
  Matrix x(n, 4);
  for (Index i = 0; i < n; ++i) {
    x.row(i) = (w * normal(rng) + mu).transpose();
  }
  return x;
}

} // namespace

TEST_SUITE("baselines") {

TEST_CASE("mean imputation uses observed column means") {
  Matrix v(3, 2);
  v << 1, kMissing, 3, 4, kMissing, 8;
  const DataMatrix out = mean_impute(MaskedDataset(DataMatrix::with_default_names(v)));
  CHECK(out(2, 0) == 2.0);
  CHECK(out(0, 1) == 6.0);
  CHECK(out(1, 1) == 4.0);
}

TEST_CASE("knn distance scales by the co-observed share") {
  Matrix v(2, 3);
  v << 0, 1, kMissing, 3, kMissing, 2;
  const MaskedDataset ds(DataMatrix::with_default_names(v));
  CHECK(knn_distance(v, ds.mask().bits(), 0, 1) ==
        doctest::Approx(std::sqrt(27.0)).epsilon(1e-15));
  Matrix w(2, 2);
  w << 1, kMissing, kMissing, 2;
  const MaskedDataset none(DataMatrix::with_default_names(w));
  CHECK(std::isinf(knn_distance(w, none.mask().bits(), 0, 1)));
}

TEST_CASE("knn imputation averages the nearest donors, ties to lower rows") {
  Matrix v(4, 2);
  v << 0, kMissing, 1, 10, -1, 20, 5, 30;
  const MaskedDataset ds(DataMatrix::with_default_names(v));
  CHECK(knn_impute(ds, KnnConfig{1, 1})(0, 1) == 10.0);
  CHECK(knn_impute(ds, KnnConfig{2, 1})(0, 1) == 15.0);
  CHECK(knn_impute(ds, KnnConfig{3, 1})(0, 1) == 20.0);
}

TEST_CASE("knn configuration validation") {
  Matrix v(3, 2);
  v << 0, kMissing, 1, 10, -1, 20;
  const MaskedDataset ds(DataMatrix::with_default_names(v));
  CHECK_THROWS_AS(knn_impute(ds, KnnConfig{3, 1}), ValidationError);
  CHECK_THROWS_AS(knn_impute(ds, KnnConfig{0, 1}), ValidationError);
  CHECK_NOTHROW(knn_impute(ds, KnnConfig{2, 1}));
}

TEST_CASE("knn imputes from the right cluster for every seed") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto data = fixtures::two_clusters(60, 5, 10.0, seed);
    const InjectionResult inj =
        inject_missing(MaskedDataset(data.data), 0.2, seed + 100);
    const DataMatrix out = knn_impute(inj.masked, KnnConfig{5, 2});
    bool all_close = true;
    for (Index i = 0; i < out.rows(); ++i) {
      const double centre = data.labels[static_cast<std::size_t>(i)] == 1 ? 10.0 : 0.0;
      for (Index j = 0; j < out.cols(); ++j) {
        if (inj.masked.mask().missing(i, j)) {
          all_close = all_close && std::abs(out(i, j) - centre) < 5.0;
        }
      }
    }
    CHECK_MESSAGE(all_close, "seed " << seed);
  }
}

TEST_CASE("knn results are independent of the thread count") {
  const MaskedDataset ds =
      inject_missing(MaskedDataset(fixtures::correlated_gaussian(80, 4, 0.5, 2)),
                     0.3, 3)
          .masked;
  CHECK(knn_impute(ds, KnnConfig{5, 1}) == knn_impute(ds, KnnConfig{5, 4}));
}

TEST_CASE("PPCA component count resolution and validation") {
  PpcaConfig cfg;
  CHECK(cfg.resolved_components(5) == 4);
  CHECK(cfg.resolved_components(40) == 10);
  cfg.n_components = 3;
  CHECK(cfg.resolved_components(40) == 3);
  CHECK_THROWS_AS(cfg.validate(10, 3), ValidationError);
  CHECK_THROWS_AS(cfg.validate(3, 10), ValidationError);
  cfg.n_components = 0;
  CHECK_THROWS_AS(cfg.validate(10, 1), ValidationError);
  cfg.tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(10, 4), ValidationError);
}

TEST_CASE("PPCA recovers an exact rank-one structure") {
  const Matrix x = rank_one(60, 4);
  const MaskedDataset complete(DataMatrix::with_default_names(x));
  PpcaConfig cfg;
  cfg.n_components = 1;
  cfg.seed = 2;
  const PpcaModel model = ppca_fit(complete, cfg);
  CHECK((model.reconstruct(x) - x).cwiseAbs().maxCoeff() < 1e-6);

  const InjectionResult inj = inject_missing(complete, 0.15, 9);
  cfg.max_em_iters = 5000;
  cfg.tol = 1e-12;
  const DataMatrix imputed = ppca_impute(inj.masked, cfg);
  double worst = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      worst = std::max(worst, std::abs(imputed(i, j) - x(i, j)));
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("PPCA on complete data matches the closed-form maximum likelihood") {
  const DataMatrix data = fixtures::correlated_gaussian(400, 5, 0.6, 7);
  Matrix x = data.values();
  x.col(1) *= 2.0;
  x.col(3) *= 0.7;
  PpcaConfig cfg;
  cfg.n_components = 2;
  cfg.tol = 1e-14;
  cfg.max_em_iters = 20000;
  const PpcaModel model = ppca_fit(MaskedDataset(data.with_values(x)), cfg);
  const Matrix centered = x.rowwise() - x.colwise().mean();
  const Matrix cov = centered.transpose() * centered / 400.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const Vector lambda = eig.eigenvalues(); // ascending
  const double sigma2 = (lambda(0) + lambda(1) + lambda(2)) / 3.0;
  const Matrix u = eig.eigenvectors().rightCols(2);
  const Vector top = lambda.tail(2).array() - sigma2;
  const Matrix wwt = u * top.asDiagonal() * u.transpose();
  CHECK(model.sigma2 == doctest::Approx(sigma2).epsilon(1e-4));
  CHECK((model.w * model.w.transpose() - wwt).cwiseAbs().maxCoeff() < 1e-3);
  CHECK((model.mu - x.colwise().mean().transpose()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("EM log-likelihood never decreases") {
  const MaskedDataset ds =
      inject_missing(MaskedDataset(fixtures::correlated_gaussian(150, 6, 0.7, 1)),
                     0.3, 4)
          .masked;
  PpcaConfig cfg;
  cfg.n_components = 2;
  cfg.tol = 1e-10;
  cfg.max_em_iters = 300;
  const PpcaModel model = ppca_fit(ds, cfg);
  REQUIRE(model.log_likelihood.size() > 2);
  for (std::size_t k = 1; k < model.log_likelihood.size(); ++k) {
    CHECK(model.log_likelihood[k] >=
          model.log_likelihood[k - 1] -
              1e-9 * std::max(1.0, std::abs(model.log_likelihood[k - 1])));
  }
  CHECK(model.sigma2 >= kPpcaSigma2Floor);
}

TEST_CASE("PPCA imputation keeps observed cells and beats the mean") {
  const MaskedDataset complete(fixtures::correlated_gaussian(300, 6, 0.8, 5));
  const InjectionResult inj = inject_missing(complete, 0.2, 6);
  PpcaConfig cfg;
  cfg.n_components = 1;
  const DataMatrix out = ppca_impute(inj.masked, cfg);
  for (Index i = 0; i < out.rows(); ++i) {
    for (Index j = 0; j < out.cols(); ++j) {
      if (!inj.masked.mask().missing(i, j)) {
        CHECK(out(i, j) == inj.masked.data()(i, j));
      }
    }
  }
  CHECK_FALSE(out.has_missing());
  const double ppca_err = nrmse(inj.ground_truth, out, inj.masked.mask());
  const double mean_err =
      nrmse(inj.ground_truth, mean_impute(inj.masked), inj.masked.mask());
  CHECK(ppca_err < 0.8 * mean_err);
  CHECK(ppca_impute(complete, cfg) == complete.data());
}
TEST_CASE("mean imputation fills the midpoint of a column") {
  Matrix v(3, 1);
  v << 1, kMissing, 3;
  const DataMatrix out = mean_impute(MaskedDataset(DataMatrix::with_default_names(v)));
  CHECK(out(1, 0) == 2.0);
  const MaskedDataset complete(fixtures::correlated_gaussian(10, 2, 0.3, 1));
  CHECK(mean_impute(complete) == complete.data());
}

TEST_CASE("mean imputation scores about one on standard normal columns") {
  const DataMatrix data = fixtures::correlated_gaussian(5000, 3, 0.0, 2);
  const InjectionResult inj = inject_missing(MaskedDataset(data), 0.2, 3);
  const double score = nrmse(data, mean_impute(inj.masked), inj.masked.mask());
  CHECK(std::abs(score - 1.0) < 0.1);
}

TEST_CASE("knn with one neighbour copies an identical row") {
  Matrix v(4, 3);
  v << 1.0, 2.0, kMissing, 1.0, 2.0, 7.5, 4.0, -1.0, 3.0, 0.0, 5.0, 1.0;
  const DataMatrix out =
      knn_impute(MaskedDataset(DataMatrix::with_default_names(v)), KnnConfig{1, 1});
  CHECK(out(0, 2) == 7.5);
}

TEST_CASE("knn over all donors is the observed column mean") {
  const InjectionResult inj = inject_missing(
      MaskedDataset(fixtures::correlated_gaussian(30, 4, 0.5, 4)), 0.2, 5);
  const MaskedDataset &ds = inj.masked;
  const DataMatrix out = knn_impute(ds, KnnConfig{29, 1});
  for (Index j = 0; j < ds.cols(); ++j) {
    double sum = 0.0;
    Index count = 0;
    for (Index i = 0; i < ds.rows(); ++i) {
      if (!ds.mask().missing(i, j)) {
        sum += ds.data()(i, j);
        ++count;
      }
    }
    // Every donor observing column j is used once k covers them all.
    for (Index i = 0; i < ds.rows(); ++i) {
      if (ds.mask().missing(i, j)) {
        CHECK(out(i, j) == doctest::Approx(sum / static_cast<double>(count)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("knn beats mean imputation on two clusters for every seed") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto data = fixtures::two_clusters(60, 5, 10.0, seed);
    const InjectionResult inj =
        inject_missing(MaskedDataset(data.data), 0.2, seed + 200);
    const double knn =
        nrmse(data.data, knn_impute(inj.masked, KnnConfig{5, 1}), inj.masked.mask());
    const double mean = nrmse(data.data, mean_impute(inj.masked), inj.masked.mask());
    CHECK_MESSAGE(knn < mean, "seed " << seed);
  }
}

TEST_CASE("PPCA with one component fewer than columns leaves the smallest variance") {
  const DataMatrix data = fixtures::correlated_gaussian(300, 4, 0.5, 6);
  Matrix x = data.values();
  x.col(1) *= 2.0;
  x.col(3) *= 0.7;
  PpcaConfig cfg;
  cfg.n_components = 3;
  cfg.tol = 1e-13;
  cfg.max_em_iters = 20000;
  const PpcaModel model = ppca_fit(MaskedDataset(data.with_values(x)), cfg);
  const Matrix centered = x.rowwise() - x.colwise().mean();
  const Matrix cov = centered.transpose() * centered / 300.0;
  const Vector eig = Eigen::SelfAdjointEigenSolver<Matrix>(cov).eigenvalues();
  const double error = (model.reconstruct(x) - x).squaredNorm() / 300.0;
  CHECK(error / cov.trace() <= eig(0) / cov.trace() * (1.0 + 1e-6));
  CHECK(error == doctest::Approx(eig(0)).epsilon(1e-4));
}

} // TEST_SUITE

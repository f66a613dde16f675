#include "fhmc/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>

#include "fhmc/error.hpp"
#include "fhmc/parallel.hpp"
#include "fhmc/random.hpp"

namespace fhmc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kMonotonicitySlack = 1e-9;

// Posterior of the latent vector for one row, augmented with a constant 1.
struct RowPosterior {
  Vector ez;   // q + 1, last entry 1
  Matrix ezz;  // (q + 1) x (q + 1)
  double log_likelihood = 0.0;
};

RowPosterior e_step_row(const Matrix &x, const MaskBits &missing, Index i,
                        const Matrix &w, const Vector &mu, double sigma2) {
  const Index d = x.cols();
  const Index q = w.cols();
  std::vector<Index> obs;
  obs.reserve(static_cast<std::size_t>(d));
  for (Index j = 0; j < d; ++j) {
    if (!missing(i, j)) {
      obs.push_back(j);
    }
  }
  const Index n_obs = static_cast<Index>(obs.size());
  Matrix w_o(n_obs, q);
  Vector r(n_obs);
  for (Index k = 0; k < n_obs; ++k) {
    const Index j = obs[static_cast<std::size_t>(k)];
    w_o.row(k) = w.row(j);
    r(k) = x(i, j) - mu(j);
  }
  Matrix m = w_o.transpose() * w_o;
  m.diagonal().array() += sigma2;
  const Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("PPCA: latent precision is not positive definite");
  }
  const Vector wr = w_o.transpose() * r;
  const Vector ez = llt.solve(wr);
  const Matrix cov = sigma2 * llt.solve(Matrix::Identity(q, q));

  RowPosterior out;
  out.ez.resize(q + 1);
  out.ez.head(q) = ez;
  out.ez(q) = 1.0;
  out.ezz.resize(q + 1, q + 1);
  out.ezz.topLeftCorner(q, q) = cov + ez * ez.transpose();
  out.ezz.topRightCorner(q, 1) = ez;
  out.ezz.bottomLeftCorner(1, q) = ez.transpose();
  out.ezz(q, q) = 1.0;

  const Matrix lm = llt.matrixL();
  const double log_det_m = 2.0 * lm.diagonal().array().log().sum();
  const double quad = (r.squaredNorm() - wr.dot(ez)) / sigma2;
  out.log_likelihood =
      -0.5 * (static_cast<double>(n_obs) * kLog2Pi +
              static_cast<double>(n_obs - q) * std::log(sigma2) + log_det_m +
              quad);
  return out;
}

std::vector<RowPosterior> e_step(const Matrix &x, const MaskBits &missing,
                                 const Matrix &w, const Vector &mu,
                                 double sigma2, std::size_t jobs) {
  std::vector<RowPosterior> rows(static_cast<std::size_t>(x.rows()));
  parallel_for(rows.size(), jobs, [&](std::size_t i) {
    rows[i] = e_step_row(x, missing, static_cast<Index>(i), w, mu, sigma2);
  });
  return rows;
}

} // namespace

void KnnConfig::validate(Index n_rows) const {
  if (k < 1) {
    throw ValidationError("knn: k must be >= 1");
  }
  if (static_cast<Index>(k) > n_rows - 1) {
    throw ValidationError("knn: k must be <= n_rows - 1");
  }
}

std::size_t PpcaConfig::resolved_components(Index n_cols) const {
  if (n_components != 0) {
    return n_components;
  }
  return static_cast<std::size_t>(
      std::min<Index>(10, std::max<Index>(n_cols - 1, 0)));
}

void PpcaConfig::validate(Index n_rows, Index n_cols) const {
  const std::size_t q = resolved_components(n_cols);
  if (q < 1 || static_cast<Index>(q) >= n_cols) {
    throw ValidationError("ppca: n_components must lie in [1, n_cols - 1]");
  }
  if (n_rows <= static_cast<Index>(q)) {
    throw ValidationError("ppca: need more rows than components");
  }
  if (max_em_iters < 1) {
    throw ValidationError("ppca: max_em_iters must be >= 1");
  }
  if (!(tol > 0.0)) {
    throw ValidationError("ppca: tol must be > 0");
  }
}

DataMatrix mean_impute(const MaskedDataset &dataset) {
  Matrix out = dataset.data().values();
  for (Index j = 0; j < out.cols(); ++j) {
    const std::vector<double> obs = dataset.observed(j);
    const double mean = std::accumulate(obs.begin(), obs.end(), 0.0) /
                        static_cast<double>(obs.size());
    for (Index i = 0; i < out.rows(); ++i) {
      if (dataset.mask().missing(i, j)) {
        out(i, j) = mean;
      }
    }
  }
  return dataset.data().with_values(std::move(out));
}

double knn_distance(const Matrix &values, const MaskBits &missing, Index a,
                    Index b) {
  const Index d = values.cols();
  double ss = 0.0;
  Index co = 0;
  for (Index j = 0; j < d; ++j) {
    if (!missing(a, j) && !missing(b, j)) {
      const double diff = values(a, j) - values(b, j);
      ss += diff * diff;
      ++co;
    }
  }
  if (co == 0) {
    return std::numeric_limits<double>::infinity();
  }
  return std::sqrt(ss * static_cast<double>(d) / static_cast<double>(co));
}

DataMatrix knn_impute(const MaskedDataset &dataset, const KnnConfig &cfg) {
  const Index n = dataset.rows();
  const Index d = dataset.cols();
  cfg.validate(n);
  const Matrix &x = dataset.data().values();
  const MaskBits &miss = dataset.mask().bits();
  for (Index i = 0; i < n; ++i) {
    if (dataset.mask().row_count(i) == d) {
      throw ValidationError("knn: row " + std::to_string(i) +
                            " has no observed value");
    }
  }
  Matrix out = x;
  parallel_for(static_cast<std::size_t>(n), cfg.jobs, [&](std::size_t row) {
    const Index i = static_cast<Index>(row);
    if (dataset.mask().row_count(i) == 0) {
      return;
    }
    std::vector<double> dist(static_cast<std::size_t>(n));
    for (Index r = 0; r < n; ++r) {
      dist[static_cast<std::size_t>(r)] =
          r == i ? std::numeric_limits<double>::infinity()
                 : knn_distance(x, miss, i, r);
    }
    std::vector<Index> cand;
    for (Index j = 0; j < d; ++j) {
      if (!miss(i, j)) {
        continue;
      }
      cand.clear();
      for (Index r = 0; r < n; ++r) {
        if (r != i && !miss(r, j)) {
          cand.push_back(r);
        }
      }
      if (cand.empty()) {
        throw NumericalError("knn: no donor row observes column " +
                             std::to_string(j));
      }
      const std::size_t k = std::min(cfg.k, cand.size());
      std::partial_sort(cand.begin(), cand.begin() + static_cast<long>(k),
                        cand.end(), [&](Index a, Index b) {
                          const double da = dist[static_cast<std::size_t>(a)];
                          const double db = dist[static_cast<std::size_t>(b)];
                          return da < db || (da == db && a < b);
                        });
      double sum = 0.0;
      for (std::size_t t = 0; t < k; ++t) {
        sum += x(cand[t], j);
      }
      out(i, j) = sum / static_cast<double>(k);
    }
  });
  return dataset.data().with_values(std::move(out));
}

Matrix PpcaModel::reconstruct(const Matrix &complete) const {
  const Matrix centered = complete.rowwise() - mu.transpose();
  const Matrix wtw = w.transpose() * w;
  const Matrix coef = wtw.ldlt().solve(w.transpose() * centered.transpose());
  return (w * coef).transpose().rowwise() + mu.transpose();
}

PpcaModel ppca_fit(const MaskedDataset &dataset, const PpcaConfig &cfg) {
  const Index n = dataset.rows();
  const Index d = dataset.cols();
  cfg.validate(n, d);
  const Index q = static_cast<Index>(cfg.resolved_components(d));
  const Matrix &x = dataset.data().values();
  const MaskBits &miss = dataset.mask().bits();

  PpcaModel model;
  {
    Rng rng(cfg.seed);
    std::normal_distribution<double> normal;
    model.w.resize(d, q);
    for (Index j = 0; j < d; ++j) {
      for (Index c = 0; c < q; ++c) {
        model.w(j, c) = 0.01 * normal(rng);
      }
    }
  }
  model.mu.resize(d);
  for (Index j = 0; j < d; ++j) {
    const std::vector<double> obs = dataset.observed(j);
    model.mu(j) = std::accumulate(obs.begin(), obs.end(), 0.0) /
                  static_cast<double>(obs.size());
  }
  model.sigma2 = 1.0;

  bool at_floor = false;
  for (std::size_t it = 0;; ++it) {
    const std::vector<RowPosterior> post =
        e_step(x, miss, model.w, model.mu, model.sigma2, cfg.jobs);
    double ll = 0.0;
    for (const RowPosterior &p : post) {
      ll += p.log_likelihood;
    }
    if (!std::isfinite(ll)) {
      throw NumericalError("PPCA: log-likelihood is not finite at iteration " +
                           std::to_string(it));
    }
    if (at_floor) {
      // A clamped M-step is no longer an exact maximiser, so the fit has
      // reached the noise-free limit.
      model.log_likelihood.push_back(ll);
      model.converged = true;
      break;
    }
    if (!model.log_likelihood.empty()) {
      const double prev = model.log_likelihood.back();
      const double scale = std::max(1.0, std::abs(prev));
      if (ll < prev - kMonotonicitySlack * scale) {
        throw NumericalError("PPCA: EM log-likelihood decreased from " +
                             std::to_string(prev) + " to " +
                             std::to_string(ll) + " at iteration " +
                             std::to_string(it));
      }
      model.log_likelihood.push_back(ll);
      if (std::abs(ll - prev) <= cfg.tol * scale) {
        model.converged = true;
        break;
      }
    } else {
      model.log_likelihood.push_back(ll);
    }
    if (it == cfg.max_em_iters) {
      break;
    }

    // M-step on the augmented loadings [W mu].
    const Index qa = q + 1;
    Matrix w_old(d, qa);
    w_old.leftCols(q) = model.w;
    w_old.col(q) = model.mu;
    Matrix a = Matrix::Zero(qa, qa);
    Matrix b_obs = Matrix::Zero(d, qa);
    Vector sum_sq = Vector::Zero(d);
    Vector miss_count = Vector::Zero(d);
    std::vector<Matrix> s(static_cast<std::size_t>(d), Matrix::Zero(qa, qa));
    for (Index i = 0; i < n; ++i) {
      const RowPosterior &p = post[static_cast<std::size_t>(i)];
      a += p.ezz;
      for (Index j = 0; j < d; ++j) {
        if (miss(i, j)) {
          s[static_cast<std::size_t>(j)] += p.ezz;
          miss_count(j) += 1.0;
        } else {
          b_obs.row(j) += x(i, j) * p.ez.transpose();
          sum_sq(j) += x(i, j) * x(i, j);
        }
      }
    }
    Matrix b = b_obs;
    for (Index j = 0; j < d; ++j) {
      b.row(j) += w_old.row(j) * s[static_cast<std::size_t>(j)];
    }
    const Eigen::LDLT<Matrix> a_ldlt(a);
    const Matrix w_new = a_ldlt.solve(b.transpose()).transpose();
    double total = 0.0;
    for (Index j = 0; j < d; ++j) {
      const Vector wn = w_new.row(j).transpose();
      const Vector delta = (w_old.row(j) - w_new.row(j)).transpose();
      const Matrix &sj = s[static_cast<std::size_t>(j)];
      total += sum_sq(j) - 2.0 * wn.dot(b_obs.row(j).transpose()) +
               wn.dot((a - sj) * wn);
      total += delta.dot(sj * delta) + miss_count(j) * model.sigma2;
    }
    model.w = w_new.leftCols(q);
    model.mu = w_new.col(q);
    const double sigma2 = total / static_cast<double>(n * d);
    at_floor = !(sigma2 > kPpcaSigma2Floor);
    model.sigma2 = at_floor ? kPpcaSigma2Floor : sigma2;
    ++model.iterations;
  }
  return model;
}

DataMatrix ppca_impute(const MaskedDataset &dataset, const PpcaModel &model) {
  const Index n = dataset.rows();
  const Index d = dataset.cols();
  if (model.mu.size() != d) {
    throw ValidationError("ppca: model dimension does not match dataset");
  }
  const Matrix &x = dataset.data().values();
  const MaskBits &miss = dataset.mask().bits();
  const Index q = model.w.cols();
  Matrix out = x;
  for (Index i = 0; i < n; ++i) {
    if (dataset.mask().row_count(i) == 0) {
      continue;
    }
    const RowPosterior p =
        e_step_row(x, miss, i, model.w, model.mu, model.sigma2);
    for (Index j = 0; j < d; ++j) {
      if (miss(i, j)) {
        out(i, j) = model.w.row(j).dot(p.ez.head(q)) + model.mu(j);
      }
    }
  }
  return dataset.data().with_values(std::move(out));
}

DataMatrix ppca_impute(const MaskedDataset &dataset, const PpcaConfig &cfg) {
  if (!dataset.data().has_missing()) {
    return dataset.data();
  }
  return ppca_impute(dataset, ppca_fit(dataset, cfg));
}

} // namespace fhmc

#include "fhmc/fold.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <Eigen/Eigenvalues>

#include "fhmc/error.hpp"
#include "fhmc/parallel.hpp"

namespace fhmc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kEigenFloor = 1e-6;

bool is_integer_valued(const std::vector<double> &values) {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return v == std::round(v); });
}

std::vector<std::vector<double>> integer_levels_of(const MaskedDataset &data) {
  std::vector<std::vector<double>> levels(static_cast<std::size_t>(data.cols()));
  for (Index j = 0; j < data.cols(); ++j) {
    std::vector<double> obs = data.observed(j);
    if (!is_integer_valued(obs)) {
      continue;
    }
    std::sort(obs.begin(), obs.end());
    obs.erase(std::unique(obs.begin(), obs.end()), obs.end());
    levels[static_cast<std::size_t>(j)] = std::move(obs);
  }
  return levels;
}

// Destandardized completed matrix with observed cells copied verbatim from
// the input and integer columns snapped at missing cells.
DataMatrix finalize_sample(const Matrix &standardized,
                           const MaskedDataset &dataset,
                           const StandardizationParams &standardization,
                           const std::vector<std::vector<double>> &levels) {
  Matrix out = destandardize_values(standardized, standardization);
  const Mask &mask = dataset.mask();
  for (Index j = 0; j < out.cols(); ++j) {
    const auto &lv = levels[static_cast<std::size_t>(j)];
    for (Index i = 0; i < out.rows(); ++i) {
      if (!mask.missing(i, j)) {
        out(i, j) = dataset.data()(i, j);
      } else if (!lv.empty()) {
        out(i, j) = round_to_level(out(i, j), lv);
      }
    }
  }
  return dataset.data().with_values(std::move(out));
}

struct RowConditional {
  std::vector<Index> missing;
  Matrix precision_mm;
  Vector mu_m;
  Vector offset; // P_mo (x_o - mu_o)
  double constant = 0.0;
};

} // namespace

JointParams JointParams::from(Vector mu, Vector sig, Matrix correlation) {
  const Index d = mu.size();
  if (sig.size() != d || correlation.rows() != d || correlation.cols() != d) {
    throw ValidationError("joint parameter shapes disagree");
  }
  if (!mu.allFinite()) {
    throw ValidationError("joint mean is not finite");
  }
  for (Index j = 0; j < d; ++j) {
    if (!(sig(j) > 0.0) || !std::isfinite(sig(j))) {
      throw ValidationError("joint scale " + std::to_string(j) +
                            " must be positive and finite");
    }
    if (correlation(j, j) != 1.0) {
      throw ValidationError("correlation diagonal must be exactly 1");
    }
    for (Index k = 0; k < d; ++k) {
      if (std::abs(correlation(j, k) - correlation(k, j)) > 1e-12 ||
          std::abs(correlation(j, k)) > 1.0) {
        throw ValidationError("correlation must be symmetric with entries in "
                              "[-1, 1]");
      }
    }
  }
  JointParams p;
  p.covariance = sig.asDiagonal() * correlation * sig.asDiagonal();
  Eigen::LLT<Matrix> llt(p.covariance);
  if (llt.info() != Eigen::Success) {
    throw ValidationError("joint covariance is not positive definite");
  }
  p.cholesky_lower = llt.matrixL();
  p.log_det_covariance =
      2.0 * p.cholesky_lower.diagonal().array().log().sum();
  p.precision = llt.solve(Matrix::Identity(d, d));
  p.precision = 0.5 * (p.precision + p.precision.transpose()).eval();
  p.mu = std::move(mu);
  p.sig = std::move(sig);
  p.correlation = std::move(correlation);
  return p;
}

Matrix pairwise_correlation(const MaskedDataset &dataset) {
  const Index d = dataset.cols();
  const Index n = dataset.rows();
  const Matrix &x = dataset.data().values();
  const MaskBits &miss = dataset.mask().bits();
  Matrix r = Matrix::Identity(d, d);
  for (Index j = 0; j < d; ++j) {
    for (Index k = j + 1; k < d; ++k) {
      double sj = 0.0, sk = 0.0;
      Index count = 0;
      for (Index i = 0; i < n; ++i) {
        if (!miss(i, j) && !miss(i, k)) {
          sj += x(i, j);
          sk += x(i, k);
          ++count;
        }
      }
      if (count < 3) {
        continue;
      }
      const double mj = sj / static_cast<double>(count);
      const double mk = sk / static_cast<double>(count);
      double cjk = 0.0, cjj = 0.0, ckk = 0.0;
      for (Index i = 0; i < n; ++i) {
        if (!miss(i, j) && !miss(i, k)) {
          const double a = x(i, j) - mj;
          const double b = x(i, k) - mk;
          cjk += a * b;
          cjj += a * a;
          ckk += b * b;
        }
      }
      if (cjj > 0.0 && ckk > 0.0) {
        const double rho = std::clamp(cjk / std::sqrt(cjj * ckk), -1.0, 1.0);
        r(j, k) = rho;
        r(k, j) = rho;
      }
    }
  }
  return r;
}

Matrix shrink_correlation(const Matrix &correlation, double shrinkage) {
  if (!(shrinkage >= 0.0 && shrinkage <= 1.0)) {
    throw DomainError("shrinkage must lie in [0, 1]");
  }
  const Index d = correlation.rows();
  Matrix blended = (1.0 - shrinkage) * correlation +
                   shrinkage * Matrix::Identity(d, d);
  blended.diagonal().setOnes();
  Eigen::LLT<Matrix> llt(blended);
  if (llt.info() == Eigen::Success &&
      (llt.matrixL().toDenseMatrix().diagonal().array() > 0.0).all()) {
    return blended;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(blended);
  const Vector clipped =
      eig.eigenvalues().cwiseMax(std::max(kEigenFloor, shrinkage));
  Matrix projected = eig.eigenvectors() * clipped.asDiagonal() *
                     eig.eigenvectors().transpose();
  const Vector inv_sd = projected.diagonal().cwiseSqrt().cwiseInverse();
  projected = inv_sd.asDiagonal() * projected * inv_sd.asDiagonal();
  projected = 0.5 * (projected + projected.transpose()).eval();
  projected.diagonal().setOnes();
  return projected.cwiseMax(-1.0).cwiseMin(1.0);
}

JointParams assemble_joint(std::span<const FeaturePosterior> posteriors,
                           const Matrix &correlation, double shrinkage) {
  const Index d = static_cast<Index>(posteriors.size());
  if (correlation.rows() != d || correlation.cols() != d) {
    throw ValidationError("need one feature posterior per column");
  }
  Vector mu(d), sig(d);
  for (Index j = 0; j < d; ++j) {
    const FeaturePosterior &fp = posteriors[static_cast<std::size_t>(j)];
    if (!(fp.sigma_hat > 0.0)) {
      throw ValidationError("feature " + std::to_string(j) +
                            " has non-positive sigma_hat");
    }
    mu(j) = fp.mu_hat;
    sig(j) = fp.sigma_hat;
  }
  return JointParams::from(std::move(mu), std::move(sig),
                           shrink_correlation(correlation, shrinkage));
}

JointParams assemble_joint(std::span<const FeaturePosterior> posteriors,
                           const MaskedDataset &dataset, double shrinkage) {
  return assemble_joint(posteriors, pairwise_correlation(dataset), shrinkage);
}

TargetDensity joint_target(const JointParams &params) {
  auto p = std::make_shared<const JointParams>(params);
  const double constant =
      -0.5 * (static_cast<double>(p->dim()) * kLog2Pi + p->log_det_covariance);
  TargetDensity t;
  t.dim = p->dim();
  t.log_density = [p, constant](const Vector &x) {
    const Vector r = x - p->mu;
    return constant - 0.5 * r.dot(p->precision * r);
  };
  t.grad_log_density = [p](const Vector &x) -> Vector {
    return -(p->precision * (x - p->mu));
  };
  t.conditional_params = [p](Index i, const Vector &x) {
    const double pii = p->precision(i, i);
    const Vector r = x - p->mu;
    const double cross = p->precision.row(i).dot(r) - pii * r(i);
    return std::make_pair(p->mu(i) - cross / pii, 1.0 / std::sqrt(pii));
  };
  return t;
}

TargetDensity conditional_target(const JointParams &params, const Vector &row,
                                 const MaskRow &missing) {
  const Index d = params.dim();
  if (row.size() != d || missing.size() != d) {
    throw ValidationError("row length does not match the joint dimension");
  }
  auto c = std::make_shared<RowConditional>();
  std::vector<Index> observed;
  for (Index j = 0; j < d; ++j) {
    if (missing(j)) {
      c->missing.push_back(j);
    } else {
      if (is_missing(row(j))) {
        throw ValidationError("missing sentinel at observed coordinate " +
                              std::to_string(j));
      }
      observed.push_back(j);
    }
  }
  const Index m = static_cast<Index>(c->missing.size());
  const Index o = static_cast<Index>(observed.size());
  c->precision_mm = params.precision(c->missing, c->missing);
  c->mu_m = params.mu(c->missing);
  Vector r_o(o);
  for (Index k = 0; k < o; ++k) {
    r_o(k) = row(observed[static_cast<std::size_t>(k)]) -
             params.mu(observed[static_cast<std::size_t>(k)]);
  }
  c->offset = params.precision(c->missing, observed) * r_o;
  c->constant =
      -0.5 * (static_cast<double>(d) * kLog2Pi + params.log_det_covariance) -
      0.5 * r_o.dot(params.precision(observed, observed) * r_o);

  TargetDensity t;
  t.dim = m;
  t.log_density = [c](const Vector &z) {
    const Vector r = z - c->mu_m;
    return c->constant - 0.5 * r.dot(c->precision_mm * r) - r.dot(c->offset);
  };
  t.grad_log_density = [c](const Vector &z) -> Vector {
    return -(c->precision_mm * (z - c->mu_m)) - c->offset;
  };
  t.conditional_params = [c](Index i, const Vector &z) {
    const double pii = c->precision_mm(i, i);
    const Vector r = z - c->mu_m;
    const double cross =
        c->precision_mm.row(i).dot(r) - pii * r(i) + c->offset(i);
    return std::make_pair(c->mu_m(i) - cross / pii, 1.0 / std::sqrt(pii));
  };
  return t;
}

Vector marginalize(const Vector &generated, const Vector &observed_row,
                   const MaskRow &missing) {
  if (generated.size() != observed_row.size() ||
      missing.size() != observed_row.size()) {
    throw ValidationError("marginalize: length mismatch");
  }
  Vector out(generated.size());
  for (Index j = 0; j < out.size(); ++j) {
    if (missing(j)) {
      out(j) = generated(j);
    } else {
      if (is_missing(observed_row(j))) {
        throw ValidationError("marginalize: missing sentinel at observed "
                              "coordinate " +
                              std::to_string(j));
      }
      out(j) = observed_row(j);
    }
  }
  return out;
}

void FoldConfig::validate() const {
  if (outer_iterations < 1) {
    throw ValidationError("outer_iterations must be >= 1");
  }
  if (burn_in_outer >= outer_iterations) {
    throw ValidationError("burn_in_outer must be < outer_iterations");
  }
  if (!(shrinkage >= 0.0 && shrinkage <= 1.0)) {
    throw ValidationError("shrinkage must lie in [0, 1]");
  }
  stage1.validate();
  stage2.validate();
  if (augment.thinning < 1 || !(augment.step_size > 0.0) ||
      augment.leapfrog_steps < 1 || !(augment.proposal_scale > 0.0)) {
    throw ValidationError("invalid augment sampler configuration");
  }
  feature_model.validate();
}

std::size_t SampleSet::post_burn_in_count() const {
  std::size_t count = 0;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    if (first_index + s > burn_in_outer) {
      ++count;
    }
  }
  return count;
}

double round_to_level(double value, const std::vector<double> &levels) {
  if (levels.empty()) {
    return value;
  }
  auto it = std::lower_bound(levels.begin(), levels.end(), value);
  if (it == levels.begin()) {
    return *it;
  }
  if (it == levels.end()) {
    return levels.back();
  }
  const double hi = *it;
  const double lo = *(it - 1);
  return (value - lo <= hi - value) ? lo : hi;
}

std::size_t stage2_transitions(const FoldConfig &cfg, Index missing_count) {
  const std::size_t base = cfg.stage2.iterations;
  if (!cfg.equal_stage2_budget || cfg.stage2_kernel == Kernel::hmc) {
    return base;
  }
  const std::size_t budget = base * (cfg.stage2.leapfrog_steps + 1);
  const std::size_t cost =
      cfg.stage2_kernel == Kernel::gibbs
          ? static_cast<std::size_t>(std::max<Index>(missing_count, 1))
          : 1;
  return std::max<std::size_t>(1, budget / cost);
}

SampleSet run_fhmc(const MaskedDataset &dataset, const FoldConfig &cfg) {
  cfg.validate();
  const Index n = dataset.rows();
  const Index d = dataset.cols();
  auto [standardized, standardization] = standardize(dataset);
  const Mask &mask = dataset.mask();
  const Matrix &z_obs = standardized.data().values();

  const Matrix correlation = cfg.use_correlation
                                 ? pairwise_correlation(standardized)
                                 : Matrix::Identity(d, d);

  SampleSet out;
  out.provenance = cfg;
  out.burn_in_outer = cfg.burn_in_outer;
  out.first_index = 1;
  out.standardization = standardization;
  out.feature_names = dataset.data().feature_names();
  out.integer_levels =
      cfg.round_integer_columns
          ? integer_levels_of(dataset)
          : std::vector<std::vector<double>>(static_cast<std::size_t>(d));

  // White-noise initialisation at missing cells.
  Matrix x = z_obs;
  {
    Rng rng(derive_seed(cfg.seed, {0}));
    std::normal_distribution<double> normal;
    for (Index j = 0; j < d; ++j) {
      for (Index i = 0; i < n; ++i) {
        if (mask.missing(i, j)) {
          x(i, j) = normal(rng);
        }
      }
    }
  }

  std::vector<Index> rows_with_missing;
  for (Index i = 0; i < n; ++i) {
    if (mask.row_count(i) > 0) {
      rows_with_missing.push_back(i);
    }
  }
  std::vector<Vector> momentum(static_cast<std::size_t>(n));

  for (std::size_t outer = 1; outer <= cfg.outer_iterations; ++outer) {
    OuterDiagnostics diag;
    diag.iteration = outer;
    try {
      std::vector<FeaturePosterior> posteriors(static_cast<std::size_t>(d));
      parallel_for(static_cast<std::size_t>(d), cfg.jobs, [&](std::size_t j) {
        SamplerConfig sc = cfg.stage1;
        sc.seed = derive_seed(cfg.seed, {1, outer, j});
        posteriors[j] = fit_feature(
            std::span<const double>(x.col(static_cast<Index>(j)).data(),
                                    static_cast<std::size_t>(n)),
            cfg.feature_model, sc, j);
      });
      for (const auto &fp : posteriors) {
        diag.stage1_acceptance += fp.acceptance_rate;
      }
      diag.stage1_acceptance /= static_cast<double>(std::max<Index>(d, 1));

      const JointParams joint =
          assemble_joint(posteriors, correlation, cfg.shrinkage);

      std::vector<double> acceptance(rows_with_missing.size(), 0.0);
      std::vector<std::size_t> divergences(rows_with_missing.size(), 0);
      parallel_for(rows_with_missing.size(), cfg.jobs, [&](std::size_t k) {
        const Index i = rows_with_missing[k];
        const MaskRow miss = mask.bits().row(i).transpose();
        const TargetDensity target =
            conditional_target(joint, z_obs.row(i).transpose(), miss);
        Vector current(target.dim);
        Index m = 0;
        for (Index j = 0; j < d; ++j) {
          if (miss(j)) {
            current(m++) = x(i, j);
          }
        }
        SamplerState state = SamplerState::at(current, target);
        Vector &p = momentum[static_cast<std::size_t>(i)];
        if (p.size() == target.dim) {
          state.momentum = p;
        }
        Rng rng(derive_seed(cfg.seed, {2, outer, static_cast<std::uint64_t>(i)}));
        SamplerConfig sc = cfg.stage2;
        sc.iterations = stage2_transitions(cfg, target.dim);
        sc.burn_in = std::min(sc.burn_in, sc.iterations - 1);
        const Chain chain = run_chain(cfg.stage2_kernel, state, target, sc, rng);
        acceptance[k] = static_cast<double>(chain.accept_count) /
                        static_cast<double>(chain.proposal_count);
        divergences[k] = chain.divergences;
        p = state.momentum;
        m = 0;
        for (Index j = 0; j < d; ++j) {
          if (miss(j)) {
            x(i, j) = state.position(m++);
          }
        }
      });
      for (std::size_t k = 0; k < rows_with_missing.size(); ++k) {
        diag.stage2_acceptance += acceptance[k];
        diag.stage2_divergences += divergences[k];
      }
      if (!rows_with_missing.empty()) {
        diag.stage2_acceptance /= static_cast<double>(rows_with_missing.size());
      } else {
        diag.stage2_acceptance = 1.0;
      }

      out.samples.push_back(
          finalize_sample(x, dataset, standardization, out.integer_levels));
      out.diagnostics.push_back(diag);
      if (outer == cfg.outer_iterations) {
        out.final_params = joint;
        out.final_posteriors = std::move(posteriors);
      }
    } catch (const NumericalError &e) {
      throw TuningError("outer iteration " + std::to_string(outer) + ": " +
                        e.what());
    }
  }
  return out;
}

ImputationResult impute(const SampleSet &sample_set,
                        const MaskedDataset &dataset) {
  std::vector<const DataMatrix *> used;
  for (std::size_t s = 0; s < sample_set.samples.size(); ++s) {
    if (sample_set.first_index + s > sample_set.burn_in_outer) {
      used.push_back(&sample_set.samples[s]);
    }
  }
  if (used.empty()) {
    throw ValidationError("impute: every sample lies within the outer "
                          "burn-in");
  }
  const Index n = dataset.rows();
  const Index d = dataset.cols();
  for (const DataMatrix *s : used) {
    if (s->rows() != n || s->cols() != d) {
      throw ValidationError("impute: sample shape does not match dataset");
    }
  }
  const Mask &mask = dataset.mask();
  Matrix completed = dataset.data().values();
  Matrix sd = Matrix::Zero(n, d);
  const double k = static_cast<double>(used.size());
  for (Index j = 0; j < d; ++j) {
    const std::vector<double> *levels =
        static_cast<std::size_t>(j) < sample_set.integer_levels.size()
            ? &sample_set.integer_levels[static_cast<std::size_t>(j)]
            : nullptr;
    for (Index i = 0; i < n; ++i) {
      if (!mask.missing(i, j)) {
        continue;
      }
      double sum = 0.0;
      for (const DataMatrix *s : used) {
        sum += (*s)(i, j);
      }
      const double mean = sum / k;
      double ss = 0.0;
      for (const DataMatrix *s : used) {
        ss += ((*s)(i, j) - mean) * ((*s)(i, j) - mean);
      }
      sd(i, j) = std::sqrt(ss / k);
      completed(i, j) =
          (levels != nullptr && !levels->empty()) ? round_to_level(mean, *levels)
                                                  : mean;
    }
  }
  return {dataset.data().with_values(std::move(completed)), std::move(sd),
          used.size()};
}

Chain sample_joint(const SampleSet &sample_set, const SamplerConfig &cfg,
                   Kernel kernel) {
  if (sample_set.post_burn_in_count() == 0) {
    throw ValidationError("sample set has no post-burn-in samples");
  }
  const JointParams &joint = sample_set.final_params;
  Chain chain = run_chain(kernel, joint.mu, joint_target(joint), cfg);
  const StandardizationParams &st = sample_set.standardization;
  for (Vector &s : chain.states) {
    s = s.cwiseProduct(st.stds) + st.means;
  }
  return chain;
}

DataMatrix augment(const SampleSet &sample_set, std::size_t n_rows,
                   std::uint64_t seed) {
  const Index d = static_cast<Index>(sample_set.feature_names.size());
  if (n_rows == 0) {
    return DataMatrix(sample_set.feature_names, Matrix(0, d));
  }
  SamplerConfig cfg = sample_set.provenance.augment;
  cfg.iterations = cfg.burn_in + n_rows * cfg.thinning;
  cfg.seed = seed;
  const Chain chain =
      sample_joint(sample_set, cfg, sample_set.provenance.stage2_kernel);
  Matrix out(static_cast<Index>(n_rows), d);
  for (std::size_t r = 0; r < n_rows; ++r) {
    out.row(static_cast<Index>(r)) = chain.states[r].transpose();
  }
  for (Index j = 0; j < d; ++j) {
    const auto &lv = sample_set.integer_levels.size() > static_cast<std::size_t>(j)
                         ? sample_set.integer_levels[static_cast<std::size_t>(j)]
                         : std::vector<double>{};
    if (lv.empty()) {
      continue;
    }
    for (Index i = 0; i < out.rows(); ++i) {
      out(i, j) = round_to_level(out(i, j), lv);
    }
  }
  return DataMatrix(sample_set.feature_names, std::move(out));
}

} // namespace fhmc

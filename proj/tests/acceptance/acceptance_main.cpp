#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fhmc/baselines.hpp"
#include "fhmc/cli.hpp"
#include "fhmc/data_model.hpp"
#include "fhmc/error.hpp"
#include "fhmc/feature_models.hpp"
#include "fhmc/fixtures.hpp"
#include "fhmc/fold.hpp"
#include "fhmc/metrics.hpp"
#include "fhmc/samplers.hpp"
#include "fhmc/serialization.hpp"

using namespace fhmc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char *pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Matrix random_spd(Index d, Rng &rng, double min_eig, double max_eig) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(min_eig, max_eig);
  Matrix a(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      a(i, j) = normal(rng);
    }
  }
  const Eigen::HouseholderQR<Matrix> qr(a);
  const Matrix q = qr.householderQ();
  Vector eig(d);
  for (Index i = 0; i < d; ++i) {
    eig(i) = unif(rng);
  }
  return q * eig.asDiagonal() * q.transpose();
}

TargetDensity gaussian_target(const Vector &mean, const Matrix &cov) {
  const Matrix prec = cov.inverse();
  TargetDensity t;
  t.dim = mean.size();
  t.log_density = [prec, mean](const Vector &x) {
    const Vector r = x - mean;
    return -0.5 * r.dot(prec * r);
  };
  t.grad_log_density = [prec, mean](const Vector &x) -> Vector {
    return -(prec * (x - mean));
  };
  t.conditional_params = [prec, mean](Index i, const Vector &x) {
    const double pii = prec(i, i);
    const Vector r = x - mean;
    const double cross = prec.row(i).dot(r) - pii * r(i);
    return std::make_pair(mean(i) - cross / pii, 1.0 / std::sqrt(pii));
  };
  return t;
}

TargetDensity quartic_target(Index d) {
  TargetDensity t;
  t.dim = d;
  t.log_density = [](const Vector &q) {
    return -(q.array().pow(4) / 4.0 + q.array().square() / 2.0).sum();
  };
  t.grad_log_density = [](const Vector &q) -> Vector {
    return -(q.array().cube() + q.array()).matrix();
  };
  return t;
}

Vector random_vector(Index d, Rng &rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(d);
  for (Index i = 0; i < d; ++i) {
    v(i) = normal(rng);
  }
  return v;
}

// 1. Forward, flip, forward returns to the start.
Outcome leapfrog_reversibility() {
  Rng rng(101);
  std::uniform_int_distribution<int> dim(1, 6);
  std::uniform_int_distribution<int> steps(1, 50);
  std::uniform_real_distribution<double> eta(0.01, 0.2);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Index d = dim(rng);
    const TargetDensity target =
        t % 2 == 0 ? gaussian_target(random_vector(d, rng),
                                     random_spd(d, rng, 0.3, 3.0))
                   : quartic_target(d);
    const Vector q = random_vector(d, rng);
    const Vector p = random_vector(d, rng);
    const double e = eta(rng);
    const std::size_t l = static_cast<std::size_t>(steps(rng));
    const LeapfrogResult fwd = leapfrog(q, p, target, e, l);
    const LeapfrogResult back = leapfrog(fwd.position, -fwd.momentum, target, e, l);
    worst = std::max({worst, (back.position - q).cwiseAbs().maxCoeff(),
                      (-back.momentum - p).cwiseAbs().maxCoeff()});
  }
  return {worst <= 1e-10, "max-norm error " + fmt("%.2e", worst) +
                              " over 1000 tuples"};
}

// 2. Energy error halves twice when the step halves.
Outcome integrator_order() {
  Rng rng(202);
  const Index d = 5;
  const Vector mean = random_vector(d, rng);
  const TargetDensity target =
      gaussian_target(mean, random_spd(d, rng, 0.5, 2.0));
  const double eta = 0.1;
  const std::size_t l = 20;
  double coarse = 0.0, fine = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Vector q = mean + random_vector(d, rng);
    const Vector p = random_vector(d, rng);
    const double h0 = hamiltonian(target.log_density(q), p);
    const LeapfrogResult a = leapfrog(q, p, target, eta, l);
    const LeapfrogResult b = leapfrog(q, p, target, eta / 2.0, 2 * l);
    coarse += std::abs(hamiltonian(target.log_density(a.position), a.momentum) - h0);
    fine += std::abs(hamiltonian(target.log_density(b.position), b.momentum) - h0);
  }
  const double ratio = coarse / fine;
  return {ratio >= 3.4 && ratio <= 4.6, "mean |dH| ratio " + fmt("%.3f", ratio)};
}

// 3. Moments of a correlated 2-D Gaussian from each kernel.
Outcome sampler_correctness() {
  Vector mean(2);
  mean << 1.0, -2.0;
  Matrix cov(2, 2);
  cov << 1.0, 0.8, 0.8, 1.0;
  const TargetDensity target = gaussian_target(mean, cov);
  bool pass = true;
  std::ostringstream detail;
  for (Kernel k : {Kernel::hmc, Kernel::mh, Kernel::gibbs}) {
    SamplerConfig cfg;
    cfg.step_size = 0.15;
    cfg.leapfrog_steps = 10;
    cfg.proposal_scale = 1.0;
    cfg.burn_in = 1000;
    cfg.iterations = 21000;
    cfg.seed = 303;
    const Chain chain = run_chain(k, Vector::Zero(2), target, cfg);
    const ChainDiagnostics diag = chain_diagnostics(chain);
    double worst_z = 0.0;
    for (Index j = 0; j < 2; ++j) {
      const double stderr_j = diag.std(j) / std::sqrt(diag.ess(j));
      worst_z = std::max(worst_z, std::abs(diag.mean(j) - mean(j)) / stderr_j);
    }
    Matrix sample_cov = Matrix::Zero(2, 2);
    for (const Vector &s : chain.states) {
      sample_cov += (s - diag.mean) * (s - diag.mean).transpose();
    }
    sample_cov /= static_cast<double>(chain.states.size());
    const double cov_err =
        ((sample_cov - cov).array().abs() / cov.array().abs()).maxCoeff();
    const bool ok = chain.states.size() == 20000 && worst_z <= 3.0 && cov_err <= 0.1;
    pass = pass && ok;
    detail << kernel_name(k) << " z=" << fmt("%.2f", worst_z)
           << " cov=" << fmt("%.1f", 100.0 * cov_err) << "% ";
  }
  return {pass, detail.str()};
}

bool gradient_matches(const TargetDensity &t, const Vector &x, double &worst) {
  const Vector g = t.grad_log_density(x);
  bool ok = true;
  for (Index k = 0; k < x.size(); ++k) {
    const double h = 1e-5 * std::max(1.0, std::abs(x(k)));
    Vector up = x, down = x;
    up(k) += h;
    down(k) -= h;
    const double fd = (t.log_density(up) - t.log_density(down)) / (2.0 * h);
    const double err = std::abs(fd - g(k));
    const double tol = std::max(1e-5, 1e-4 * std::abs(g(k)));
    worst = std::max(worst, err / tol);
    ok = ok && err <= tol;
  }
  return ok;
}

// 4. Analytic gradients against central differences.
Outcome gradient_audit() {
  Rng rng(404);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  double worst = 0.0;
  bool pass = true;
  int audited = 0;
  for (int t = 0; t < 20; ++t) {
    std::vector<double> column(30 + 5 * t);
    std::normal_distribution<double> normal(unif(rng) * 3.0, 0.5 + unif(rng) * 0.4);
    for (double &v : column) {
      v = normal(rng);
    }
    const FeatureModel model{1.0 + unif(rng) * 0.5, 1.0 + unif(rng) * 0.5};
    const TargetDensity fp = feature_target(ColumnSummary::of(column), model);
    Vector x(2);
    x << unif(rng) * 3.0, unif(rng);
    if (std::abs(x(0)) < 1e-3) {
      x(0) = 0.5;
    }
    pass = gradient_matches(fp, x, worst) && pass;

    const Index d = 2 + t % 5;
    Matrix cov = random_spd(d, rng, 0.3, 2.0);
    const Vector sd = cov.diagonal().cwiseSqrt();
    Matrix corr = sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();
    corr = 0.5 * (corr + corr.transpose()).eval();
    corr.diagonal().setOnes();
    const JointParams joint =
        JointParams::from(random_vector(d, rng), sd, corr);
    pass = gradient_matches(joint_target(joint), random_vector(d, rng), worst) && pass;

    MaskRow missing = MaskRow::Constant(d, false);
    missing(t % d) = true;
    missing((t + 1) % d) = true;
    Vector row = random_vector(d, rng);
    for (Index j = 0; j < d; ++j) {
      if (missing(j)) {
        row(j) = kMissing;
      }
    }
    const TargetDensity cond = conditional_target(joint, row, missing);
    pass = gradient_matches(cond, random_vector(cond.dim, rng), worst) && pass;
    audited += 3;
  }
  return {pass, std::to_string(audited) + " points, worst error/tol " +
                    fmt("%.3f", worst)};
}

// 5. NRMSE oracle values.
Outcome nrmse_oracle() {
  Matrix truth(3, 1), imputed(3, 1);
  truth << 1.0, 3.0, 7.0;
  imputed << 1.5, 2.5, 7.0;
  MaskBits bits = MaskBits::Constant(3, 1, false);
  bits(0, 0) = true;
  bits(1, 0) = true;
  const Mask mask(bits);
  const DataMatrix t = DataMatrix::with_default_names(truth);
  const double hand = nrmse(t, DataMatrix::with_default_names(imputed), mask);
  const double perfect = nrmse(t, t, mask);

  const DataMatrix data = fixtures::correlated_gaussian(200, 4, 0.5, 5);
  const InjectionResult inj = inject_missing(MaskedDataset(data), 0.3, 6);
  Matrix at_mean = data.values();
  double sum = 0.0;
  Index count = 0;
  for (Index i = 0; i < at_mean.rows(); ++i) {
    for (Index j = 0; j < at_mean.cols(); ++j) {
      if (inj.masked.mask().missing(i, j)) {
        sum += at_mean(i, j);
        ++count;
      }
    }
  }
  for (Index i = 0; i < at_mean.rows(); ++i) {
    for (Index j = 0; j < at_mean.cols(); ++j) {
      if (inj.masked.mask().missing(i, j)) {
        at_mean(i, j) = sum / static_cast<double>(count);
      }
    }
  }
  const double one =
      nrmse(data, data.with_values(at_mean), inj.masked.mask());
  const bool pass = hand == 0.5 && perfect == 0.0 && std::abs(one - 1.0) <= 1e-12;
  return {pass, "hand " + fmt("%.17g", hand) + ", perfect " +
                    fmt("%g", perfect) + ", mean " + fmt("%.15f", one)};
}

// 6. Observed cells survive every sample and the final imputation.
Outcome observed_preservation() {
  Rng rng(606);
  std::uniform_int_distribution<int> rows(10, 40);
  std::uniform_int_distribution<int> cols(2, 5);
  std::uniform_real_distribution<double> rate(0.05, 0.4);
  std::uniform_real_distribution<double> scale(-3.0, 3.0);
  double worst = 0.0;
  for (int f = 0; f < 100; ++f) {
    const std::size_t n = static_cast<std::size_t>(rows(rng));
    const std::size_t d = static_cast<std::size_t>(cols(rng));
    Matrix v = fixtures::correlated_gaussian(n, d, 0.5, 1000 + f).values();
    for (Index j = 0; j < v.cols(); ++j) {
      v.col(j) = v.col(j) * std::pow(10.0, scale(rng)) +
                 Vector::Constant(v.rows(), 100.0 * scale(rng));
    }
    const InjectionResult inj = inject_missing(
        MaskedDataset(DataMatrix::with_default_names(v)), rate(rng), 2000 + f);
    FoldConfig cfg;
    cfg.outer_iterations = 3;
    cfg.burn_in_outer = 1;
    cfg.stage1.iterations = 200;
    cfg.stage1.burn_in = 100;
    cfg.seed = 3000 + f;
    cfg.jobs = 1;
    const SampleSet set = run_fhmc(inj.masked, cfg);
    std::vector<const DataMatrix *> outputs;
    for (const DataMatrix &s : set.samples) {
      outputs.push_back(&s);
    }
    const ImputationResult imp = impute(set, inj.masked);
    outputs.push_back(&imp.completed);
    for (const DataMatrix *m : outputs) {
      for (Index i = 0; i < v.rows(); ++i) {
        for (Index j = 0; j < v.cols(); ++j) {
          if (!inj.masked.mask().missing(i, j)) {
            worst = std::max(worst, std::abs((*m)(i, j) - v(i, j)) /
                                        std::max(std::abs(v(i, j)), 1e-300));
          }
        }
      }
    }
  }
  return {worst <= 1e-12, "100 fixtures, worst relative deviation " +
                              fmt("%.2e", worst)};
}

DataMatrix acceptance_fixture(std::uint64_t seed) {
  return fixtures::correlated_gaussian(500, 8, 0.9, seed);
}

double method_nrmse(cli::Method m, const InjectionResult &inj,
                    const cli::RunConfig &cfg, std::uint64_t seed) {
  const cli::MethodOutput out = cli::impute_with(m, inj.masked, cfg, seed, 1);
  return nrmse(inj.ground_truth, out.completed, inj.masked.mask());
}

const std::vector<double> kRates{0.1, 0.2, 0.3};

// KNN requires an observed value in every row; masks violating that are
// redrawn from the next derived seed and shared by every method.
InjectionResult acceptance_mask(std::uint64_t seed, std::size_t rate_index,
                                std::size_t &redraws) {
  const DataMatrix data = acceptance_fixture(seed);
  for (std::uint64_t attempt = 0;; ++attempt) {
    InjectionResult inj = inject_missing(
        MaskedDataset(data), kRates[rate_index],
        derive_seed(seed, {rate_index, attempt}));
    bool rows_ok = true;
    for (Index i = 0; i < data.rows(); ++i) {
      rows_ok = rows_ok && inj.masked.mask().row_count(i) < data.cols();
    }
    if (rows_ok) {
      return inj;
    }
    ++redraws;
  }
}

// 7. F-HMC against mean and KNN imputation.
Outcome imputation_ordering() {
  const cli::RunConfig cfg;
  bool pass = true;
  std::size_t redraws = 0;
  std::ostringstream detail;
  for (std::size_t a = 0; a < kRates.size(); ++a) {
    std::vector<double> fhmc, mean, knn;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const InjectionResult inj = acceptance_mask(seed, a, redraws);
      fhmc.push_back(method_nrmse(cli::Method::fhmc, inj, cfg, seed));
      mean.push_back(method_nrmse(cli::Method::mean, inj, cfg, seed));
      if (kRates[a] == 0.3) {
        knn.push_back(method_nrmse(cli::Method::knn, inj, cfg, seed));
      }
    }
    const double mf = median(fhmc);
    const double mm = median(mean);
    pass = pass && mf < mm;
    detail << "rate " << kRates[a] << ": fhmc " << fmt("%.3f", mf) << " mean "
           << fmt("%.3f", mm);
    if (!knn.empty()) {
      const double mk = median(knn);
      pass = pass && mf < mk;
      detail << " knn " << fmt("%.3f", mk);
    }
    detail << "; ";
  }
  detail << redraws << " mask redraws";
  return {pass, detail.str()};
}

// 8. HMC against MH in stage 2 at equal evaluation budgets of one HMC
// transition per row and outer iteration.
Outcome sampler_ablation() {
  cli::RunConfig cfg;
  cfg.fold.stage2.iterations = 1;
  cfg.fold.stage2.burn_in = 0;
  int wins = 0;
  std::size_t redraws = 0;
  std::ostringstream detail;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::vector<double> hmc, mh;
    for (std::size_t a = 0; a < kRates.size(); ++a) {
      const InjectionResult inj = acceptance_mask(seed, a, redraws);
      hmc.push_back(method_nrmse(cli::Method::fhmc, inj, cfg, seed));
      mh.push_back(method_nrmse(cli::Method::mh, inj, cfg, seed));
    }
    const double mh_med = median(mh);
    const double hmc_med = median(hmc);
    wins += hmc_med <= mh_med ? 1 : 0;
    detail << fmt("%+.4f", hmc_med - mh_med) << " ";
  }
  return {wins >= 7, std::to_string(wins) +
                         "/10 seeds with HMC <= MH (median NRMSE difference "
                         "per seed: " +
                         detail.str() + ")"};
}

struct AugmentRun {
  DataMatrix original;
  DataMatrix synthetic;
};

AugmentRun augment_fixture(cli::Method m, std::uint64_t seed) {
  AugmentRun run;
  run.original = acceptance_fixture(100 + seed);
  const FoldConfig cfg = cli::fold_for_method(FoldConfig{}, m, seed, 1);
  const SampleSet set = run_fhmc(MaskedDataset(run.original), cfg);
  run.synthetic = augment(set, 500, derive_seed(seed, {3}));
  return run;
}

// 9 and 11 share the augmented data.
std::vector<AugmentRun> fold_runs, single_runs;

void ensure_augment_runs() {
  if (!fold_runs.empty()) {
    return;
  }
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    fold_runs.push_back(augment_fixture(cli::Method::fhmc, seed));
    single_runs.push_back(augment_fixture(cli::Method::hmc_single, seed));
  }
}

Outcome propensity_ordering() {
  ensure_augment_runs();
  std::vector<double> fold, single;
  bool in_range = true;
  for (std::size_t s = 0; s < fold_runs.size(); ++s) {
    PropensityConfig pc;
    pc.seed = s + 1;
    fold.push_back(pmse(fold_runs[s].original, fold_runs[s].synthetic, pc));
    single.push_back(pmse(single_runs[s].original, single_runs[s].synthetic, pc));
    in_range = in_range && fold.back() >= 0.0 && fold.back() <= 0.25 &&
               single.back() >= 0.0 && single.back() <= 0.25;
  }
  const double mf = median(fold);
  const double ms = median(single);
  return {in_range && mf < ms, "median pMSE fhmc " + fmt("%.4f", mf) +
                                   ", hmc_single " + fmt("%.4f", ms)};
}

Outcome covariance_agreement() {
  ensure_augment_runs();
  std::vector<double> dist;
  for (const AugmentRun &r : fold_runs) {
    dist.push_back(covariance_distance(r.original, r.synthetic));
  }
  const double m = median(dist);
  return {m < 0.25, "median covariance distance " + fmt("%.4f", m)};
}

// 10. Classifier ordering is preserved on augmented data.
Outcome classifier_reproducibility() {
  const auto &props = fixtures::symptom_class_proportions();
  std::vector<double> orig_lr, orig_nn, syn_lr, syn_nn;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const fixtures::LabeledData data =
        fixtures::gaussian_classes(500, 8, props, 1.2, 0.5, 500 + seed);
    const std::size_t n = static_cast<std::size_t>(data.data.rows());
    Matrix synth(static_cast<Index>(n), data.data.cols());
    std::vector<int> synth_y;
    Index row = 0;
    for (int k = 0; k < static_cast<int>(props.size()); ++k) {
      std::vector<Index> members;
      for (std::size_t i = 0; i < n; ++i) {
        if (data.labels[i] == k) {
          members.push_back(static_cast<Index>(i));
        }
      }
      const DataMatrix cls =
          data.data.with_values(data.data.values()(members, Eigen::all));
      FoldConfig cfg = cli::fold_for_method(FoldConfig{}, cli::Method::fhmc,
                                            derive_seed(seed, {4, static_cast<std::uint64_t>(k)}), 1);
      const SampleSet set = run_fhmc(MaskedDataset(cls), cfg);
      const DataMatrix out = augment(set, members.size(), derive_seed(cfg.seed, {3}));
      synth.middleRows(row, out.rows()) = out.values();
      row += out.rows();
      synth_y.insert(synth_y.end(), members.size(), k);
    }
    orig_lr.push_back(cross_validate(data.data.values(), data.labels, 10,
                                     Classifier::logistic, seed).f1_macro);
    orig_nn.push_back(cross_validate(data.data.values(), data.labels, 10,
                                     Classifier::nearest_neighbor, seed).f1_macro);
    syn_lr.push_back(cross_validate(synth, synth_y, 10, Classifier::logistic, seed)
                         .f1_macro);
    syn_nn.push_back(cross_validate(synth, synth_y, 10,
                                    Classifier::nearest_neighbor, seed).f1_macro);
  }
  const double olr = median(orig_lr), onn = median(orig_nn);
  const double slr = median(syn_lr), snn = median(syn_nn);
  const bool same_order = (olr > onn) == (slr > snn) && olr != onn && slr != snn;
  const bool close = std::abs(olr - slr) <= 0.15 && std::abs(onn - snn) <= 0.15;
  return {same_order && close,
          "macro-F1 original logistic " + fmt("%.3f", olr) + " 1-NN " +
              fmt("%.3f", onn) + "; synthetic logistic " + fmt("%.3f", slr) +
              " 1-NN " + fmt("%.3f", snn)};
}

// 12. Image-shaped data at 20% MCAR.
Outcome image_smoke() {
  const auto start = std::chrono::steady_clock::now();
  const DataMatrix data = fixtures::digit_like(500, 12);
  const InjectionResult inj = inject_missing(MaskedDataset(data), 0.2, 13);
  FoldConfig cfg;
  cfg.seed = 14;
  cfg.jobs = 0;
  const SampleSet set = run_fhmc(inj.masked, cfg);
  const ImputationResult imp = impute(set, inj.masked);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double fhmc = nrmse(inj.ground_truth, imp.completed, inj.masked.mask());
  const double mean =
      nrmse(inj.ground_truth, mean_impute(inj.masked), inj.masked.mask());
  return {fhmc < mean && seconds < 600.0,
          "nrmse fhmc " + fmt("%.3f", fhmc) + " mean " + fmt("%.3f", mean) +
              " in " + fmt("%.1f", seconds) + " s"};
}

// 13. PPCA likelihood monotonicity and rank-one completion.
Outcome ppca_properties() {
  Rng rng(1313);
  std::uniform_int_distribution<int> rows(30, 120);
  std::uniform_int_distribution<int> cols(3, 10);
  std::uniform_real_distribution<double> rate(0.0, 0.35);
  std::uniform_real_distribution<double> rho(0.0, 0.9);
  bool monotone = true;
  double worst_drop = 0.0;
  for (int f = 0; f < 50; ++f) {
    const std::size_t n = static_cast<std::size_t>(rows(rng));
    const std::size_t d = static_cast<std::size_t>(cols(rng));
    const DataMatrix data = fixtures::correlated_gaussian(n, d, rho(rng), 4000 + f);
    const InjectionResult inj = inject_missing(MaskedDataset(data), rate(rng), 5000 + f);
    PpcaConfig cfg;
    cfg.n_components = 1 + static_cast<std::size_t>(f) % (d - 1);
    cfg.seed = 6000 + f;
    cfg.tol = 1e-9;
    cfg.max_em_iters = 300;
    const PpcaModel model = ppca_fit(inj.masked, cfg);
    const auto &ll = model.log_likelihood;
    for (std::size_t k = 1; k < ll.size(); ++k) {
      const double drop = (ll[k - 1] - ll[k]) / std::max(1.0, std::abs(ll[k - 1]));
      worst_drop = std::max(worst_drop, drop);
      monotone = monotone && drop <= 1e-9;
    }
  }

  std::normal_distribution<double> normal;
  Vector w(5);
  w << 1.0, -0.5, 2.0, 0.7, -1.3;
  Matrix x(40, 5);
  for (Index i = 0; i < 40; ++i) {
    x.row(i) = (normal(rng) * w).transpose();
  }
  Matrix masked = x;
  masked(7, 2) = kMissing;
  PpcaConfig cfg;
  cfg.n_components = 1;
  cfg.tol = 1e-12;
  cfg.max_em_iters = 5000;
  const DataMatrix completed =
      ppca_impute(MaskedDataset(DataMatrix::with_default_names(masked)), cfg);
  const double err = std::abs(completed(7, 2) - x(7, 2));
  return {monotone && err <= 1e-6,
          "50 fixtures, worst relative drop " + fmt("%.2e", worst_drop) +
              "; rank-1 completion error " + fmt("%.2e", err)};
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Hash of every artifact under `dir`; wall-clock time is masked in reports.
std::vector<std::pair<std::string, std::size_t>> artifact_hashes(const fs::path &dir) {
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const auto &entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) {
      continue;
    }
    std::string content = slurp(entry.path());
    if (entry.path().filename() == "report.json") {
      Json j = Json::parse(content);
      j.erase("wall_time_seconds");
      content = j.dump();
    }
    out.emplace_back(fs::relative(entry.path(), dir).generic_string(),
                     std::hash<std::string>{}(content));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// 14. Reruns of impute and augment are byte-identical.
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "fhmc_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const DataMatrix data = acceptance_fixture(77);
  save_csv(inject_missing(MaskedDataset(data), 0.2, 78).masked, root / "masked.csv");
  std::ostringstream sink;
  bool ran = true;
  for (const char *run : {"a", "b"}) {
    const fs::path dir = root / run;
    for (const std::vector<std::string> &args :
         {std::vector<std::string>{"fhmc", "--seed", "5", "--output-dir",
                                   (dir / "impute").string(), "impute",
                                   "--input", (root / "masked.csv").string(),
                                   "--export-samples"},
          std::vector<std::string>{"fhmc", "--seed", "5", "--output-dir",
                                   (dir / "augment").string(), "augment",
                                   "--input", (root / "masked.csv").string(),
                                   "--n-rows", "200"}}) {
      ran = ran && cli::run(args, sink, sink) == 0;
    }
  }
  const auto a = artifact_hashes(root / "a");
  const auto b = artifact_hashes(root / "b");
  std::size_t combined = 0;
  for (const auto &[name, h] : a) {
    combined ^= h + 0x9e3779b97f4a7c15ULL + (combined << 6) + (combined >> 2);
  }
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016zx", combined);
  return {ran && !a.empty() && a == b,
          std::to_string(a.size()) + " artifacts, combined hash " + hex};
}

} // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"leapfrog reversibility", leapfrog_reversibility},
      {"integrator order", integrator_order},
      {"sampler correctness", sampler_correctness},
      {"gradient audit", gradient_audit},
      {"nrmse oracle", nrmse_oracle},
      {"observed-entry preservation", observed_preservation},
      {"imputation ordering", imputation_ordering},
      {"stage-2 sampler ablation", sampler_ablation},
      {"propensity ordering", propensity_ordering},
      {"classifier reproducibility", classifier_reproducibility},
      {"covariance agreement", covariance_agreement},
      {"image-shaped smoke test", image_smoke},
      {"ppca em properties", ppca_properties},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[c].second();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << (c + 1)
              << " " << criteria[c].first << ": " << o.detail << " ["
              << fmt("%.1f", seconds) << " s]" << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/"
            << criteria.size() << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}

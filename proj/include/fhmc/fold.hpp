#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "fhmc/data_model.hpp"
#include "fhmc/feature_models.hpp"
#include "fhmc/samplers.hpp"

namespace fhmc {

using MaskRow = Eigen::Array<bool, Eigen::Dynamic, 1>;

// Joint Gaussian over all features: mean mu, per-feature scales sig and a
// correlation matrix; covariance = diag(sig) * correlation * diag(sig).
struct JointParams {
  Vector mu;
  Vector sig;
  Matrix correlation;
  Matrix covariance;
  Matrix precision;
  Matrix cholesky_lower; // of covariance
  double log_det_covariance = 0.0;

  Index dim() const noexcept { return mu.size(); }

  // Validates shapes, positivity and positive-definiteness; fills the cached
  // covariance, precision and Cholesky factor.
  static JointParams from(Vector mu, Vector sig, Matrix correlation);
};

// Pearson correlation over rows where both columns are observed; pairs with
// fewer than 3 common observations get 0. Unit diagonal.
Matrix pairwise_correlation(const MaskedDataset &dataset);

// (1 - shrinkage) * R + shrinkage * I, projected onto the positive-definite
// correlation matrices (eigenvalues clipped at max(1e-6, shrinkage), unit
// diagonal restored)
// when the blend is not positive definite.
Matrix shrink_correlation(const Matrix &correlation, double shrinkage);

JointParams assemble_joint(std::span<const FeaturePosterior> posteriors,
                           const MaskedDataset &dataset, double shrinkage);
JointParams assemble_joint(std::span<const FeaturePosterior> posteriors,
                           const Matrix &correlation, double shrinkage);

// Normalized multivariate Gaussian log-density with gradient and analytic
// full conditionals.
TargetDensity joint_target(const JointParams &params);

// Joint density restricted to the missing coordinates of one row, observed
// coordinates held at their values. Its log-density equals the joint
// log-density of the merged row, so it is the conditional up to a constant.
// `row` holds kMissing at missing coordinates.
TargetDensity conditional_target(const JointParams &params, const Vector &row,
                                 const MaskRow &missing);

// Takes generated[j] where missing[j], observed_row[j] elsewhere.
Vector marginalize(const Vector &generated, const Vector &observed_row,
                   const MaskRow &missing);

struct FoldConfig {
  std::size_t outer_iterations = 20;
  std::size_t burn_in_outer = 5;
  SamplerConfig stage1{0.05, 20, 2000, 500, 1, 0.0, 0.5, 0};
  // Transitions per row and outer iteration; each row chain is warm-started
  // from the previous completed row and its final state is the row's draw.
  SamplerConfig stage2{0.05, 20, 10, 0, 1, 0.0, 0.5, 0};
  // Chain used by augment(); iterations are derived from the requested rows.
  SamplerConfig augment{0.05, 20, 2000, 1000, 10, 0.0, 0.5, 0};
  Kernel stage2_kernel = Kernel::hmc;
  // For mh and gibbs, scale the per-row transition count so each row spends
  // as many target evaluations as stage2.iterations HMC transitions would
  // (L + 1 each): an MH step costs 1, a Gibbs sweep costs one per missing
  // coordinate.
  bool equal_stage2_budget = true;
  FeatureModel feature_model;
  double shrinkage = 0.05;
  // false drops the cross-feature fold (diagonal correlation).
  bool use_correlation = true;
  bool round_integer_columns = false;
  std::uint64_t seed = 0;
  std::size_t jobs = 0; // worker threads, 0 = hardware concurrency

  void validate() const;
};

struct OuterDiagnostics {
  std::size_t iteration = 0;
  double stage1_acceptance = 0.0;
  double stage2_acceptance = 0.0;
  std::size_t stage2_divergences = 0;
};

struct SampleSet {
  // Completed datasets X^1..X^k on the original scale.
  std::vector<DataMatrix> samples;
  std::size_t first_index = 1;
  std::size_t burn_in_outer = 0;
  FoldConfig provenance;
  // Final outer iteration, on the standardized scale.
  JointParams final_params;
  std::vector<FeaturePosterior> final_posteriors;
  StandardizationParams standardization;
  // Sorted observed levels of integer-valued columns (empty otherwise); only
  // filled when rounding is configured.
  std::vector<std::vector<double>> integer_levels;
  std::vector<OuterDiagnostics> diagnostics;
  std::vector<std::string> feature_names;

  std::size_t post_burn_in_count() const;
};

struct ImputationResult {
  DataMatrix completed;
  Matrix per_entry_std;
  std::size_t n_samples_used = 0;
};

// Transitions a row with `missing_count` missing cells runs per outer
// iteration.
std::size_t stage2_transitions(const FoldConfig &cfg, Index missing_count);

SampleSet run_fhmc(const MaskedDataset &dataset, const FoldConfig &cfg);

ImputationResult impute(const SampleSet &sample_set,
                        const MaskedDataset &dataset);

// Chain on the final joint target; states on the original scale.
Chain sample_joint(const SampleSet &sample_set, const SamplerConfig &cfg,
                   Kernel kernel);

// n_rows fresh rows from the final joint target.
DataMatrix augment(const SampleSet &sample_set, std::size_t n_rows,
                   std::uint64_t seed);

double round_to_level(double value, const std::vector<double> &levels);

} // namespace fhmc

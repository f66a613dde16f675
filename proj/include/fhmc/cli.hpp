#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fhmc/baselines.hpp"
#include "fhmc/fold.hpp"
#include "fhmc/metrics.hpp"
#include "fhmc/serialization.hpp"

namespace fhmc::cli {

enum class Method { fhmc, hmc_single, mh, gibbs, mean, knn, ppca };

const char *method_name(Method m);
Method parse_method(const std::string &name);
// Methods backed by run_fhmc (they have posterior samples).
bool uses_fold(Method m);

struct RunConfig {
  std::optional<std::filesystem::path> input;
  std::optional<std::filesystem::path> truth;
  std::optional<std::filesystem::path> mask;
  std::optional<std::filesystem::path> original;
  std::optional<std::filesystem::path> candidate;
  std::optional<std::filesystem::path> column_rates;
  std::optional<double> rate;
  std::string mode = "augmentation";
  Method method = Method::fhmc;
  std::size_t n_rows = 500;
  std::optional<std::string> label_column;
  std::size_t pca_components = 2;
  bool export_samples = false;
  std::uint64_t seed = 0;
  std::size_t jobs = 0;
  std::filesystem::path output_dir = ".";

  FoldConfig fold;
  KnnConfig knn;
  PpcaConfig ppca;
  PropensityConfig propensity;

  std::vector<double> rates{0.1, 0.2, 0.3, 0.4};
  std::vector<Method> methods{Method::fhmc, Method::mean, Method::knn,
                              Method::ppca};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

  // Resolved settings that determine results (no paths to outputs, no job
  // count).
  Json snapshot() const;
};

// Unknown keys are rejected; seeds live only at the top level.
RunConfig run_config_from_json(const Json &j);

// Fold settings for one of the fold-backed methods, seeded from `seed`.
FoldConfig fold_for_method(const FoldConfig &base, Method m,
                           std::uint64_t seed, std::size_t jobs);

struct MethodOutput {
  DataMatrix completed;
  std::optional<ImputationResult> fold_result;
  std::optional<SampleSet> samples;
};

MethodOutput impute_with(Method m, const MaskedDataset &dataset,
                         const RunConfig &cfg, std::uint64_t seed,
                         std::size_t jobs);

// Entry point; argv[0] is skipped. Returns the process exit code:
// 0 success, 1 I/O, 2 parse or validation, 3 numerical.
int run(const std::vector<std::string> &args, std::ostream &out,
        std::ostream &err);

} // namespace fhmc::cli

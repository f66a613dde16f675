#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fhmc/data_model.hpp"

namespace fhmc::fixtures {

struct LabeledData {
  DataMatrix data;
  std::vector<int> labels;
};

// Rows from N(0, R) with R the equicorrelation matrix (unit diagonal, rho off
// the diagonal). Columns x1..xd.
DataMatrix correlated_gaussian(std::size_t n, std::size_t d, double rho,
                               std::uint64_t seed);

// The 38 symptom names of the oncology symptom survey, in table order.
const std::vector<std::string> &symptom_names();
// Missing ratio per symptom, aligned with symptom_names().
const std::vector<double> &symptom_missing_ratios();
// Shares of the four symptom-severity classes.
const std::vector<double> &symptom_class_proportions();

// Class sizes for n rows by largest remainder, summing to n.
std::vector<std::size_t> allocate(std::size_t n,
                                  const std::vector<double> &proportions);

// Integer severities 0..4 on the 38 symptom columns, driven by a shared latent
// burden whose level depends on the class. Complete (no missing cells).
LabeledData symptom_survey(std::size_t n, std::uint64_t seed);

// 28x28 "images" flattened to 784 columns: a low-rank mix of smooth blob
// templates plus white noise.
DataMatrix digit_like(std::size_t n, std::uint64_t seed,
                      std::size_t rank = 8, double noise = 0.1);

// Two equal halves centred at 0 and at `offset` in every coordinate, unit
// noise. Label = cluster.
LabeledData two_clusters(std::size_t n, std::size_t d, double offset,
                         std::uint64_t seed);

// Gaussian classes with shared equicorrelated covariance and class means
// spread `separation` apart; class sizes from `proportions`.
LabeledData gaussian_classes(std::size_t n, std::size_t d,
                             const std::vector<double> &proportions,
                             double separation, double rho,
                             std::uint64_t seed);

} // namespace fhmc::fixtures

#include "fhmc/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fhmc/error.hpp"
#include "fhmc/random.hpp"

namespace fhmc::fixtures {

namespace {

std::vector<int> shuffled_labels(const std::vector<std::size_t> &sizes,
                                 Rng &rng) {
  std::vector<int> labels;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    labels.insert(labels.end(), sizes[k], static_cast<int>(k));
  }
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

} // namespace

DataMatrix correlated_gaussian(std::size_t n, std::size_t d, double rho,
                               std::uint64_t seed) {
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw DomainError("correlated_gaussian: rho must lie in [0, 1)");
  }
  Rng rng(seed);
  std::normal_distribution<double> normal;
  const double a = std::sqrt(rho);
  const double b = std::sqrt(1.0 - rho);
  Matrix x(static_cast<Index>(n), static_cast<Index>(d));
  for (Index i = 0; i < x.rows(); ++i) {
    const double f = normal(rng);
    for (Index j = 0; j < x.cols(); ++j) {
      x(i, j) = a * f + b * normal(rng);
    }
  }
  return DataMatrix::with_default_names(std::move(x));
}

const std::vector<std::string> &symptom_names() {
  static const std::vector<std::string> names = {
      "difficulty sleeping", "worrying", "feeling sad", "feeling irritable",
      "feeling nervous", "concentrating", "energy lack", "feeling drowsy",
      "mouth sores", "vomiting", "diarrhea", "swelling", "dizziness",
      "sweats", "hot flashes", "sexual interest", "short breath",
      "difficult breathing", "cough", "chest tightness", "weight gain",
      "swallowing", "nausea", "cramps", "pain", "urination",
      "weight loss", "increased appetite", "itching", "hair loss",
      "changes in skin", "like myself", "food tastes", "lack of appetite",
      "dry mouth", "constipation", "bloated", "numbness"};
  return names;
}

const std::vector<double> &symptom_missing_ratios() {
  static const std::vector<double> ratios = {
      0.0314, 0.0362, 0.0306, 0.0251, 0.0346, 0.0338, 0.0467, 0.0394,
      0.0212, 0.0174, 0.0236, 0.0174, 0.0197, 0.0275, 0.0275, 0.0283,
      0.0228, 0.0251, 0.0291, 0.0220, 0.0322, 0.0181, 0.0370, 0.0244,
      0.0378, 0.0197, 0.0236, 0.0259, 0.0291, 0.0330, 0.0259, 0.0251,
      0.0236, 0.0291, 0.0338, 0.0291, 0.0236, 0.0402};
  return ratios;
}

const std::vector<double> &symptom_class_proportions() {
  static const std::vector<double> p = {0.402, 0.301, 0.176, 0.121};
  return p;
}

std::vector<std::size_t> allocate(std::size_t n,
                                  const std::vector<double> &proportions) {
  if (proportions.empty()) {
    throw ValidationError("allocate: no proportions");
  }
  const double total =
      std::accumulate(proportions.begin(), proportions.end(), 0.0);
  std::vector<std::size_t> sizes(proportions.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t used = 0;
  for (std::size_t k = 0; k < proportions.size(); ++k) {
    const double exact = static_cast<double>(n) * proportions[k] / total;
    sizes[k] = static_cast<std::size_t>(std::floor(exact));
    used += sizes[k];
    rem.emplace_back(exact - std::floor(exact), k);
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto &a, const auto &b) { return a.first > b.first; });
  for (std::size_t r = 0; used < n; ++r, ++used) {
    ++sizes[rem[r % rem.size()].second];
  }
  return sizes;
}

LabeledData symptom_survey(std::size_t n, std::uint64_t seed) {
  static constexpr double kBurden[] = {-0.8, 0.0, 0.7, 1.4};
  static constexpr double kCuts[] = {-0.5, 0.3, 1.0, 1.7};
  Rng rng(seed);
  std::normal_distribution<double> normal;
  LabeledData out;
  out.labels = shuffled_labels(allocate(n, symptom_class_proportions()), rng);
  const std::size_t d = symptom_names().size();
  Matrix x(static_cast<Index>(n), static_cast<Index>(d));
  for (Index i = 0; i < x.rows(); ++i) {
    const double latent =
        kBurden[out.labels[static_cast<std::size_t>(i)]] + normal(rng);
    for (Index j = 0; j < x.cols(); ++j) {
      const double frac = std::fmod(0.6180339887 * static_cast<double>(j + 1), 1.0);
      const double load = 0.5 + 0.4 * frac;
      const double y =
          load * latent + std::sqrt(1.0 - load * load) * normal(rng);
      double level = 0.0;
      for (double c : kCuts) {
        level += y > c ? 1.0 : 0.0;
      }
      x(i, j) = level;
    }
  }
  out.data = DataMatrix(symptom_names(), std::move(x));
  return out;
}

DataMatrix digit_like(std::size_t n, std::uint64_t seed, std::size_t rank,
                      double noise) {
  constexpr int kSide = 28;
  Rng rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(5.0, 22.0);
  std::uniform_real_distribution<double> width(2.0, 5.0);
  Matrix templates(static_cast<Index>(rank), kSide * kSide);
  for (Index k = 0; k < templates.rows(); ++k) {
    templates.row(k).setZero();
    for (int blob = 0; blob < 3; ++blob) {
      const double cx = unif(rng);
      const double cy = unif(rng);
      const double w = width(rng);
      for (int r = 0; r < kSide; ++r) {
        for (int c = 0; c < kSide; ++c) {
          const double dx = (c - cx) / w;
          const double dy = (r - cy) / w;
          templates(k, r * kSide + c) += std::exp(-0.5 * (dx * dx + dy * dy));
        }
      }
    }
  }
  Matrix x(static_cast<Index>(n), kSide * kSide);
  for (Index i = 0; i < x.rows(); ++i) {
    Vector coef(templates.rows());
    for (Index k = 0; k < coef.size(); ++k) {
      coef(k) = normal(rng);
    }
    x.row(i) = coef.transpose() * templates;
    for (Index j = 0; j < x.cols(); ++j) {
      x(i, j) += noise * normal(rng);
    }
  }
  std::vector<std::string> names;
  names.reserve(kSide * kSide);
  for (int p = 0; p < kSide * kSide; ++p) {
    names.push_back("pixel" + std::to_string(p));
  }
  return DataMatrix(std::move(names), std::move(x));
}

LabeledData two_clusters(std::size_t n, std::size_t d, double offset,
                         std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  LabeledData out;
  out.labels = shuffled_labels({n / 2, n - n / 2}, rng);
  Matrix x(static_cast<Index>(n), static_cast<Index>(d));
  for (Index i = 0; i < x.rows(); ++i) {
    const double centre = out.labels[static_cast<std::size_t>(i)] * offset;
    for (Index j = 0; j < x.cols(); ++j) {
      x(i, j) = centre + normal(rng);
    }
  }
  out.data = DataMatrix::with_default_names(std::move(x));
  return out;
}

LabeledData gaussian_classes(std::size_t n, std::size_t d,
                             const std::vector<double> &proportions,
                             double separation, double rho,
                             std::uint64_t seed) {
  if (proportions.size() > d) {
    throw ValidationError("gaussian_classes: need at least one column per "
                          "class");
  }
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw DomainError("gaussian_classes: rho must lie in [0, 1)");
  }
  Rng rng(seed);
  std::normal_distribution<double> normal;
  LabeledData out;
  out.labels = shuffled_labels(allocate(n, proportions), rng);
  const double a = std::sqrt(rho);
  const double b = std::sqrt(1.0 - rho);
  Matrix x(static_cast<Index>(n), static_cast<Index>(d));
  for (Index i = 0; i < x.rows(); ++i) {
    const int label = out.labels[static_cast<std::size_t>(i)];
    const double f = normal(rng);
    for (Index j = 0; j < x.cols(); ++j) {
      x(i, j) = a * f + b * normal(rng) + (j == label ? separation : 0.0);
    }
  }
  out.data = DataMatrix::with_default_names(std::move(x));
  return out;
}

} // namespace fhmc::fixtures

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fhmc/baselines.hpp"
#include "fhmc/fold.hpp"
#include "fhmc/metrics.hpp"
#include "fhmc/samplers.hpp"

namespace fhmc {

using Json = nlohmann::ordered_json;

inline constexpr const char *kReportSchema = "fhmc-report/1";

// Every from_json below starts from defaults, overrides the keys present and
// throws ValidationError on an unknown key or a value of the wrong type.
Json as_json(const SamplerConfig &cfg);
SamplerConfig sampler_config_from_json(const Json &j);

Json as_json(const FeatureModel &model);
FeatureModel feature_model_from_json(const Json &j);

Json as_json(const FoldConfig &cfg);
FoldConfig fold_config_from_json(const Json &j);

Json as_json(const KnnConfig &cfg);
KnnConfig knn_config_from_json(const Json &j);

Json as_json(const PpcaConfig &cfg);
PpcaConfig ppca_config_from_json(const Json &j);

Json as_json(const PropensityConfig &cfg);
PropensityConfig propensity_config_from_json(const Json &j);

Json as_json(const ClassificationScores &scores);

// Report object carrying the schema tag; `config` is embedded verbatim.
Json as_json(const MetricsReport &report, const Json &config = Json::object());

Json posterior_summary(const std::vector<FeaturePosterior> &posteriors);

// Numbered CSVs sample_0001.csv ... plus manifest.json.
void export_sample_set(const SampleSet &set, const std::filesystem::path &dir);

// Writes `j` with two-space indentation and a trailing newline.
void write_json(const Json &j, const std::filesystem::path &path);
Json read_json(const std::filesystem::path &path);

void write_tidy_csv(const std::vector<TidyRow> &rows,
                    const std::filesystem::path &path);

// Shortest representation that reads back to the same double.
std::string format_double(double v);

} // namespace fhmc

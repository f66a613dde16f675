#include "fhmc/serialization.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>

#include "fhmc/detail/object_reader.hpp"
#include "fhmc/error.hpp"

namespace fhmc {

using detail::ObjectReader;

namespace {

Json diagnostics_json(const std::vector<OuterDiagnostics> &diag) {
  Json arr = Json::array();
  for (const auto &d : diag) {
    arr.push_back({{"iteration", d.iteration},
                   {"stage1_acceptance", d.stage1_acceptance},
                   {"stage2_acceptance", d.stage2_acceptance},
                   {"stage2_divergences", d.stage2_divergences}});
  }
  return arr;
}

} // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Json as_json(const SamplerConfig &cfg) {
  return {{"step_size", cfg.step_size},
          {"leapfrog_steps", cfg.leapfrog_steps},
          {"iterations", cfg.iterations},
          {"burn_in", cfg.burn_in},
          {"thinning", cfg.thinning},
          {"momentum_refresh", cfg.momentum_refresh},
          {"proposal_scale", cfg.proposal_scale},
          {"seed", cfg.seed}};
}

SamplerConfig sampler_config_from_json(const Json &j) {
  SamplerConfig cfg;
  ObjectReader r(j, "sampler");
  r.read("step_size", cfg.step_size);
  r.read("leapfrog_steps", cfg.leapfrog_steps);
  r.read("iterations", cfg.iterations);
  r.read("burn_in", cfg.burn_in);
  r.read("thinning", cfg.thinning);
  r.read("momentum_refresh", cfg.momentum_refresh);
  r.read("proposal_scale", cfg.proposal_scale);
  r.read("seed", cfg.seed, 0);
  r.finish();
  return cfg;
}

Json as_json(const FeatureModel &model) {
  return {{"prior_scale_mu", model.prior_scale_mu},
          {"prior_scale_log_sigma", model.prior_scale_log_sigma}};
}

FeatureModel feature_model_from_json(const Json &j) {
  FeatureModel m;
  ObjectReader r(j, "feature_model");
  r.read("prior_scale_mu", m.prior_scale_mu);
  r.read("prior_scale_log_sigma", m.prior_scale_log_sigma);
  r.finish();
  return m;
}

Json as_json(const FoldConfig &cfg) {
  return {{"outer_iterations", cfg.outer_iterations},
          {"burn_in_outer", cfg.burn_in_outer},
          {"stage1", as_json(cfg.stage1)},
          {"stage2", as_json(cfg.stage2)},
          {"augment", as_json(cfg.augment)},
          {"stage2_kernel", kernel_name(cfg.stage2_kernel)},
          {"equal_stage2_budget", cfg.equal_stage2_budget},
          {"feature_model", as_json(cfg.feature_model)},
          {"shrinkage", cfg.shrinkage},
          {"use_correlation", cfg.use_correlation},
          {"round_integer_columns", cfg.round_integer_columns},
          {"seed", cfg.seed}};
}

FoldConfig fold_config_from_json(const Json &j) {
  FoldConfig cfg;
  ObjectReader r(j, "fold");
  r.read("outer_iterations", cfg.outer_iterations);
  r.read("burn_in_outer", cfg.burn_in_outer);
  // Nested sampler blocks override the current defaults key by key.
  auto merge = [](SamplerConfig &target, const Json &patch) {
    Json base = as_json(target);
    if (!patch.is_object()) {
      throw ValidationError("sampler: expected a JSON object");
    }
    for (const auto &item : patch.items()) {
      base[item.key()] = item.value();
    }
    target = sampler_config_from_json(base);
  };
  r.read_with("stage1", [&](const Json &v) { merge(cfg.stage1, v); });
  r.read_with("stage2", [&](const Json &v) { merge(cfg.stage2, v); });
  r.read_with("augment", [&](const Json &v) { merge(cfg.augment, v); });
  std::string kernel = kernel_name(cfg.stage2_kernel);
  r.read("stage2_kernel", kernel);
  cfg.stage2_kernel = parse_kernel(kernel);
  r.read("equal_stage2_budget", cfg.equal_stage2_budget);
  r.read_with("feature_model", [&](const Json &v) {
    cfg.feature_model = feature_model_from_json(v);
  });
  r.read("shrinkage", cfg.shrinkage);
  r.read("use_correlation", cfg.use_correlation);
  r.read("round_integer_columns", cfg.round_integer_columns);
  r.read("seed", cfg.seed, 0);
  r.finish();
  return cfg;
}

Json as_json(const KnnConfig &cfg) { return {{"k", cfg.k}}; }

KnnConfig knn_config_from_json(const Json &j) {
  KnnConfig cfg;
  ObjectReader r(j, "knn");
  r.read("k", cfg.k);
  r.finish();
  return cfg;
}

Json as_json(const PpcaConfig &cfg) {
  return {{"n_components", cfg.n_components},
          {"max_em_iters", cfg.max_em_iters},
          {"tol", cfg.tol},
          {"seed", cfg.seed}};
}

PpcaConfig ppca_config_from_json(const Json &j) {
  PpcaConfig cfg;
  ObjectReader r(j, "ppca");
  r.read("n_components", cfg.n_components);
  r.read("max_em_iters", cfg.max_em_iters);
  r.read("tol", cfg.tol);
  r.read("seed", cfg.seed, 0);
  r.finish();
  return cfg;
}

Json as_json(const PropensityConfig &cfg) {
  return {{"classifier_epochs", cfg.classifier_epochs},
          {"learning_rate", cfg.learning_rate},
          {"l2", cfg.l2},
          {"folds", cfg.folds},
          {"seed", cfg.seed},
          {"interactions", cfg.interactions}};
}

PropensityConfig propensity_config_from_json(const Json &j) {
  PropensityConfig cfg;
  ObjectReader r(j, "propensity");
  r.read("classifier_epochs", cfg.classifier_epochs);
  r.read("learning_rate", cfg.learning_rate);
  r.read("l2", cfg.l2);
  r.read("folds", cfg.folds);
  r.read("seed", cfg.seed, 0);
  r.read("interactions", cfg.interactions);
  r.finish();
  return cfg;
}

Json as_json(const ClassificationScores &s) {
  return {{"accuracy", s.accuracy},
          {"precision_macro", s.precision_macro},
          {"recall_macro", s.recall_macro},
          {"f1_macro", s.f1_macro}};
}

Json as_json(const MetricsReport &report, const Json &config) {
  report.validate();
  Json j = {{"schema", kReportSchema}};
  if (report.nrmse) {
    j["nrmse"] = *report.nrmse;
  }
  if (report.pmse) {
    j["pmse"] = *report.pmse;
  }
  if (report.classification) {
    j["classification"] = as_json(*report.classification);
  }
  if (report.covariance_distance) {
    j["covariance_distance"] = *report.covariance_distance;
  }
  Json meta = Json::object();
  for (const auto &[k, v] : report.metadata) {
    meta[k] = v;
  }
  j["metadata"] = {{"seed", report.seed}, {"config", config}, {"info", meta}};
  return j;
}

Json posterior_summary(const std::vector<FeaturePosterior> &posteriors) {
  Json arr = Json::array();
  for (const auto &p : posteriors) {
    arr.push_back({{"feature", p.feature_index},
                   {"mu_hat", p.mu_hat},
                   {"sigma_hat", p.sigma_hat},
                   {"acceptance_rate", p.acceptance_rate}});
  }
  return arr;
}

void export_sample_set(const SampleSet &set, const std::filesystem::path &dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create directory " + dir.string() + ": " +
                  ec.message());
  }
  Json files = Json::array();
  for (std::size_t s = 0; s < set.samples.size(); ++s) {
    const std::size_t iteration = set.first_index + s;
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%04zu.csv", iteration);
    save_csv(set.samples[s], dir / name);
    files.push_back({{"file", name},
                     {"iteration", iteration},
                     {"post_burn_in", iteration > set.burn_in_outer}});
  }
  Json manifest = {{"schema", "fhmc-samples/1"},
                   {"seed", set.provenance.seed},
                   {"config", as_json(set.provenance)},
                   {"first_index", set.first_index},
                   {"last_index", set.first_index + set.samples.size() - 1},
                   {"burn_in_outer", set.burn_in_outer},
                   {"feature_names", set.feature_names},
                   {"files", files},
                   {"final_posteriors", posterior_summary(set.final_posteriors)},
                   {"diagnostics", diagnostics_json(set.diagnostics)}};
  write_json(manifest, dir / "manifest.json");
}

void write_json(const Json &j, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out << j.dump(2) << '\n';
  if (!out) {
    throw IoError("failed writing " + path.string());
  }
}

Json read_json(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error &e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_tidy_csv(const std::vector<TidyRow> &rows,
                    const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out << "series,x,y\n";
  for (const auto &r : rows) {
    const bool quote = r.series.find_first_of(",\"\n") != std::string::npos;
    if (quote) {
      std::string esc;
      for (char c : r.series) {
        esc += c == '"' ? std::string("\"\"") : std::string(1, c);
      }
      out << '"' << esc << '"';
    } else {
      out << r.series;
    }
    out << ',' << format_double(r.x) << ',' << format_double(r.y) << '\n';
  }
  if (!out) {
    throw IoError("failed writing " + path.string());
  }
}

} // namespace fhmc

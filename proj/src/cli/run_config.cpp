#include "fhmc/cli.hpp"

#include "fhmc/detail/object_reader.hpp"
#include "fhmc/error.hpp"

namespace fhmc::cli {

namespace {

void reject_nested_seed(const Json &section, const char *name) {
  if (section.is_object() && section.contains("seed")) {
    throw ValidationError(std::string(name) +
                          ".seed is not allowed; set seed at the top level");
  }
}

std::optional<std::filesystem::path> path_of(const Json &v, const char *key) {
  if (!v.is_string()) {
    throw ValidationError(std::string(key) + " must be a path string");
  }
  return std::filesystem::path(v.get<std::string>());
}

Json path_json(const std::optional<std::filesystem::path> &p) {
  return p ? Json(p->generic_string()) : Json(nullptr);
}

} // namespace

const char *method_name(Method m) {
  switch (m) {
  case Method::fhmc:
    return "fhmc";
  case Method::hmc_single:
    return "hmc_single";
  case Method::mh:
    return "mh";
  case Method::gibbs:
    return "gibbs";
  case Method::mean:
    return "mean";
  case Method::knn:
    return "knn";
  case Method::ppca:
    return "ppca";
  }
  return "?";
}

Method parse_method(const std::string &name) {
  for (Method m : {Method::fhmc, Method::hmc_single, Method::mh, Method::gibbs,
                   Method::mean, Method::knn, Method::ppca}) {
    if (name == method_name(m)) {
      return m;
    }
  }
  throw ValidationError("unknown method \"" + name +
                        "\" (expected fhmc, hmc_single, mh, gibbs, mean, knn "
                        "or ppca)");
}

bool uses_fold(Method m) {
  return m == Method::fhmc || m == Method::hmc_single || m == Method::mh ||
         m == Method::gibbs;
}

FoldConfig fold_for_method(const FoldConfig &base, Method m,
                           std::uint64_t seed, std::size_t jobs) {
  if (!uses_fold(m)) {
    throw ValidationError(std::string("method ") + method_name(m) +
                          " does not use the fold sampler");
  }
  FoldConfig cfg = base;
  cfg.seed = seed;
  cfg.jobs = jobs;
  switch (m) {
  case Method::hmc_single:
    cfg.use_correlation = false;
    break;
  case Method::mh:
    cfg.stage2_kernel = Kernel::mh;
    break;
  case Method::gibbs:
    cfg.stage2_kernel = Kernel::gibbs;
    break;
  default:
    break;
  }
  return cfg;
}

RunConfig run_config_from_json(const Json &j) {
  RunConfig cfg;
  detail::ObjectReader r(j, "config");
  r.read_with("input", [&](const Json &v) { cfg.input = path_of(v, "input"); });
  r.read_with("truth", [&](const Json &v) { cfg.truth = path_of(v, "truth"); });
  r.read_with("mask", [&](const Json &v) { cfg.mask = path_of(v, "mask"); });
  r.read_with("original",
              [&](const Json &v) { cfg.original = path_of(v, "original"); });
  r.read_with("candidate",
              [&](const Json &v) { cfg.candidate = path_of(v, "candidate"); });
  r.read_with("column_rates", [&](const Json &v) {
    cfg.column_rates = path_of(v, "column_rates");
  });
  r.read_with("output_dir", [&](const Json &v) {
    cfg.output_dir = *path_of(v, "output_dir");
  });
  r.read_with("rate", [&](const Json &v) {
    if (!v.is_number()) {
      throw ValidationError("rate must be a number");
    }
    cfg.rate = v.get<double>();
  });
  r.read("mode", cfg.mode);
  std::string method = method_name(cfg.method);
  r.read("method", method);
  cfg.method = parse_method(method);
  r.read("n_rows", cfg.n_rows);
  r.read_with("label_column", [&](const Json &v) {
    if (!v.is_string()) {
      throw ValidationError("label_column must be a string");
    }
    cfg.label_column = v.get<std::string>();
  });
  r.read("pca_components", cfg.pca_components);
  r.read("export_samples", cfg.export_samples);
  r.read("seed", cfg.seed, 0);
  r.read("jobs", cfg.jobs);
  r.read_with("fold", [&](const Json &v) {
    reject_nested_seed(v, "fold");
    cfg.fold = fold_config_from_json(v);
  });
  r.read_with("knn", [&](const Json &v) { cfg.knn = knn_config_from_json(v); });
  r.read_with("ppca", [&](const Json &v) {
    reject_nested_seed(v, "ppca");
    cfg.ppca = ppca_config_from_json(v);
  });
  r.read_with("propensity", [&](const Json &v) {
    reject_nested_seed(v, "propensity");
    cfg.propensity = propensity_config_from_json(v);
  });
  r.read_with("benchmark", [&](const Json &v) {
    detail::ObjectReader b(v, "benchmark");
    b.read_with("rates", [&](const Json &a) {
      if (!a.is_array() || a.empty()) {
        throw ValidationError("benchmark.rates must be a non-empty array");
      }
      cfg.rates.clear();
      for (const auto &x : a) {
        if (!x.is_number()) {
          throw ValidationError("benchmark.rates entries must be numbers");
        }
        cfg.rates.push_back(x.get<double>());
      }
    });
    b.read_with("methods", [&](const Json &a) {
      if (!a.is_array() || a.empty()) {
        throw ValidationError("benchmark.methods must be a non-empty array");
      }
      cfg.methods.clear();
      for (const auto &x : a) {
        if (!x.is_string()) {
          throw ValidationError("benchmark.methods entries must be strings");
        }
        cfg.methods.push_back(parse_method(x.get<std::string>()));
      }
    });
    b.read_with("seeds", [&](const Json &a) {
      if (!a.is_array() || a.empty()) {
        throw ValidationError("benchmark.seeds must be a non-empty array");
      }
      cfg.seeds.clear();
      for (const auto &x : a) {
        if (!x.is_number_unsigned() &&
            !(x.is_number_integer() && x.get<long long>() >= 0)) {
          throw ValidationError("benchmark.seeds entries must be "
                                "non-negative integers");
        }
        cfg.seeds.push_back(x.get<std::uint64_t>());
      }
    });
    b.finish();
  });
  r.finish();
  if (cfg.mode != "imputation" && cfg.mode != "augmentation") {
    throw ValidationError("mode must be \"imputation\" or \"augmentation\"");
  }
  return cfg;
}

Json RunConfig::snapshot() const {
  Json methods_json = Json::array();
  for (Method m : methods) {
    methods_json.push_back(method_name(m));
  }
  return {{"seed", seed},
          {"method", method_name(method)},
          {"input", path_json(input)},
          {"truth", path_json(truth)},
          {"mask", path_json(mask)},
          {"original", path_json(original)},
          {"candidate", path_json(candidate)},
          {"column_rates", path_json(column_rates)},
          {"rate", rate ? Json(*rate) : Json(nullptr)},
          {"mode", mode},
          {"n_rows", n_rows},
          {"label_column", label_column ? Json(*label_column) : Json(nullptr)},
          {"pca_components", pca_components},
          {"fold", as_json(fold)},
          {"knn", as_json(knn)},
          {"ppca", as_json(ppca)},
          {"propensity", as_json(propensity)},
          {"benchmark",
           {{"rates", rates}, {"methods", methods_json}, {"seeds", seeds}}}};
}

} // namespace fhmc::cli

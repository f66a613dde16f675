#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include <CLI11.hpp>

#include "fhmc/cli.hpp"
#include "fhmc/error.hpp"
#include "fhmc/fixtures.hpp"
#include "fhmc/parallel.hpp"
#include "fhmc/random.hpp"

namespace fhmc::cli {

namespace {

namespace fs = std::filesystem;

const char *kind_name(ErrorKind k) {
  switch (k) {
  case ErrorKind::io:
    return "io";
  case ErrorKind::parse:
    return "parse";
  case ErrorKind::validation:
    return "validation";
  case ErrorKind::domain:
    return "domain";
  case ErrorKind::numerical:
    return "numerical";
  }
  return "internal";
}

int exit_code(ErrorKind k) {
  switch (k) {
  case ErrorKind::io:
    return 1;
  case ErrorKind::parse:
  case ErrorKind::validation:
  case ErrorKind::domain:
    return 2;
  case ErrorKind::numerical:
    return 3;
  }
  return 3;
}

void report_error(std::ostream &err, const std::string &kind,
                  const std::string &message) {
  err << Json{{"error", {{"kind", kind}, {"message", message}}}}.dump()
      << '\n';
}

const fs::path &require(const std::optional<fs::path> &p, const char *what) {
  if (!p) {
    throw ValidationError(std::string(what) + " path is required");
  }
  return *p;
}

void ensure_dir(const fs::path &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create output directory " + dir.string() + ": " +
                  ec.message());
  }
}

DataMatrix load_complete(const fs::path &path, const char *what) {
  MaskedDataset ds = load_csv(path);
  if (ds.data().has_missing()) {
    throw ValidationError(std::string(what) + " (" + path.string() +
                          ") must not contain missing cells");
  }
  return ds.data();
}

void check_same_layout(const DataMatrix &a, const DataMatrix &b,
                       const char *what) {
  if (a.rows() != b.rows() || a.cols() != b.cols() ||
      a.feature_names() != b.feature_names()) {
    throw ValidationError(std::string(what) +
                          ": files differ in shape or column names");
  }
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

DataMatrix drop_column(const DataMatrix &m, Index col) {
  std::vector<std::string> names;
  Matrix values(m.rows(), m.cols() - 1);
  Index c = 0;
  for (Index j = 0; j < m.cols(); ++j) {
    if (j == col) {
      continue;
    }
    names.push_back(m.feature_names()[static_cast<std::size_t>(j)]);
    values.col(c++) = m.values().col(j);
  }
  return DataMatrix(std::move(names), std::move(values));
}

std::vector<int> integer_labels(const DataMatrix &m, Index col) {
  std::vector<int> labels;
  for (Index i = 0; i < m.rows(); ++i) {
    const double v = m(i, col);
    if (v != std::round(v) || std::abs(v) > 1e9) {
      throw ValidationError("label column must hold integers");
    }
    labels.push_back(static_cast<int>(v));
  }
  return labels;
}

std::vector<double> read_column_rates(const fs::path &path,
                                      const DataMatrix &data) {
  const Json j = read_json(path);
  std::vector<double> rates(static_cast<std::size_t>(data.cols()), 0.0);
  if (j.is_array()) {
    if (j.size() != rates.size()) {
      throw ValidationError("column_rates array needs one rate per column");
    }
    for (std::size_t k = 0; k < rates.size(); ++k) {
      if (!j[k].is_number()) {
        throw ValidationError("column_rates entries must be numbers");
      }
      rates[k] = j[k].get<double>();
    }
  } else if (j.is_object()) {
    for (const auto &item : j.items()) {
      const auto col = data.column_index(item.key());
      if (!col) {
        throw ValidationError("column_rates names unknown column \"" +
                              item.key() + "\"");
      }
      if (!item.value().is_number()) {
        throw ValidationError("column_rates entries must be numbers");
      }
      rates[static_cast<std::size_t>(*col)] = item.value().get<double>();
    }
  } else {
    throw ValidationError("column_rates must be a JSON array or object");
  }
  return rates;
}

int cmd_inject(const RunConfig &cfg, std::ostream &out) {
  const MaskedDataset input = load_csv(require(cfg.input, "input"));
  InjectionResult res;
  if (cfg.column_rates) {
    res = inject_missing(input, read_column_rates(*cfg.column_rates, input.data()),
                         cfg.seed);
  } else if (cfg.rate) {
    res = inject_missing(input, *cfg.rate, cfg.seed);
  } else {
    throw ValidationError("inject needs rate or column_rates");
  }
  ensure_dir(cfg.output_dir);
  save_csv(res.masked, cfg.output_dir / "masked.csv");
  save_csv(res.ground_truth, cfg.output_dir / "truth.csv");
  const Mask &mask = res.masked.mask();
  const double cells = static_cast<double>(mask.rows() * mask.cols());
  out << "missing fraction " << fixed(static_cast<double>(mask.count()) / cells)
      << " (" << mask.count() << " of " << mask.rows() * mask.cols()
      << " cells)\n";
  if (cfg.column_rates) {
    for (Index j = 0; j < mask.cols(); ++j) {
      out << "  " << input.data().feature_names()[static_cast<std::size_t>(j)]
          << ": "
          << fixed(static_cast<double>(mask.column_count(j)) /
                   static_cast<double>(mask.rows()))
          << '\n';
    }
  }
  return 0;
}

Json diagnostics_summary(const SampleSet &set) {
  Json arr = Json::array();
  for (const auto &d : set.diagnostics) {
    arr.push_back({{"iteration", d.iteration},
                   {"stage1_acceptance", d.stage1_acceptance},
                   {"stage2_acceptance", d.stage2_acceptance},
                   {"stage2_divergences", d.stage2_divergences}});
  }
  return arr;
}

int cmd_impute(const RunConfig &cfg, std::ostream &out) {
  const MaskedDataset input = load_csv(require(cfg.input, "input"));
  std::optional<DataMatrix> truth;
  if (cfg.truth) {
    truth = load_complete(*cfg.truth, "truth");
    check_same_layout(input.data(), *truth, "truth");
  }
  const auto start = std::chrono::steady_clock::now();
  const MethodOutput result =
      impute_with(cfg.method, input, cfg, cfg.seed, cfg.jobs);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();

  ensure_dir(cfg.output_dir);
  save_csv(result.completed, cfg.output_dir / "imputed.csv");
  Json report = {{"schema", kReportSchema},
                 {"command", "impute"},
                 {"method", method_name(cfg.method)},
                 {"seed", cfg.seed},
                 {"wall_time_seconds", wall},
                 {"rows", input.rows()},
                 {"columns", input.cols()},
                 {"missing_cells", input.mask().count()}};
  if (result.fold_result) {
    save_csv(input.data().with_values(result.fold_result->per_entry_std),
             cfg.output_dir / "imputed_std.csv");
    report["n_samples_used"] = result.fold_result->n_samples_used;
    report["diagnostics"] = diagnostics_summary(*result.samples);
    report["final_posteriors"] =
        posterior_summary(result.samples->final_posteriors);
    if (cfg.export_samples) {
      export_sample_set(*result.samples, cfg.output_dir / "samples");
    }
  }
  if (truth) {
    const double score = nrmse(*truth, result.completed, input.mask());
    report["nrmse"] = score;
    out << method_name(cfg.method) << ": nrmse " << fixed(score) << '\n';
  } else {
    out << method_name(cfg.method) << ": imputed " << input.mask().count()
        << " cells\n";
  }
  report["config"] = cfg.snapshot();
  write_json(report, cfg.output_dir / "report.json");
  return 0;
}

int cmd_augment(const RunConfig &cfg, std::ostream &out) {
  const MaskedDataset input = load_csv(require(cfg.input, "input"));
  if (!uses_fold(cfg.method)) {
    throw ValidationError(std::string("augment needs a fold method, got ") +
                          method_name(cfg.method));
  }
  const SampleSet set =
      run_fhmc(input, fold_for_method(cfg.fold, cfg.method, cfg.seed, cfg.jobs));
  const std::uint64_t augment_seed = derive_seed(cfg.seed, {3});
  const DataMatrix synthetic = augment(set, cfg.n_rows, augment_seed);
  ensure_dir(cfg.output_dir);
  save_csv(synthetic, cfg.output_dir / "synthetic.csv");
  const Json manifest = {{"schema", "fhmc-augment/1"},
                         {"method", method_name(cfg.method)},
                         {"seed", cfg.seed},
                         {"augment_seed", augment_seed},
                         {"n_rows", cfg.n_rows},
                         {"file", "synthetic.csv"},
                         {"feature_names", synthetic.feature_names()},
                         {"final_posteriors",
                          posterior_summary(set.final_posteriors)},
                         {"config", cfg.snapshot()}};
  write_json(manifest, cfg.output_dir / "manifest.json");
  out << "wrote " << cfg.n_rows << " synthetic rows\n";
  return 0;
}

int evaluate_imputation(const RunConfig &cfg, std::ostream &out) {
  if (!cfg.mask) {
    throw ValidationError("imputation mode needs a mask file (the masked CSV)");
  }
  const DataMatrix truth = load_complete(require(cfg.original, "original"),
                                         "original");
  const DataMatrix candidate =
      load_complete(require(cfg.candidate, "candidate"), "candidate");
  const MaskedDataset masked = load_csv(*cfg.mask);
  check_same_layout(truth, candidate, "candidate");
  check_same_layout(truth, masked.data(), "mask");

  MetricsReport report;
  report.seed = cfg.seed;
  report.nrmse = nrmse(truth, candidate, masked.mask());
  report.metadata["mode"] = "imputation";

  std::vector<TidyRow> rows;
  for (Index j = 0; j < truth.cols(); ++j) {
    double ss = 0.0;
    Index count = 0;
    for (Index i = 0; i < truth.rows(); ++i) {
      if (masked.mask().missing(i, j)) {
        const double e = truth(i, j) - candidate(i, j);
        ss += e * e;
        ++count;
      }
    }
    if (count > 0) {
      rows.push_back({"rmse", static_cast<double>(j),
                      std::sqrt(ss / static_cast<double>(count))});
    }
  }
  ensure_dir(cfg.output_dir);
  write_tidy_csv(rows, cfg.output_dir / "column_errors.csv");
  write_json(as_json(report, cfg.snapshot()), cfg.output_dir / "report.json");
  out << "nrmse " << fixed(*report.nrmse) << '\n';
  return 0;
}

int evaluate_augmentation(const RunConfig &cfg, std::ostream &out) {
  DataMatrix original =
      load_complete(require(cfg.original, "original"), "original");
  DataMatrix candidate =
      load_complete(require(cfg.candidate, "candidate"), "candidate");
  if (original.feature_names() != candidate.feature_names()) {
    throw ValidationError("original and candidate columns differ");
  }
  MetricsReport report;
  report.seed = cfg.seed;
  report.metadata["mode"] = "augmentation";
  std::vector<TidyRow> class_rows;
  if (cfg.label_column) {
    const auto col = original.column_index(*cfg.label_column);
    if (!col) {
      throw ValidationError("label column \"" + *cfg.label_column +
                            "\" not found");
    }
    const std::vector<int> y_orig = integer_labels(original, *col);
    const std::vector<int> y_cand = integer_labels(candidate, *col);
    original = drop_column(original, *col);
    candidate = drop_column(candidate, *col);
    for (Classifier c : {Classifier::logistic, Classifier::nearest_neighbor}) {
      const auto so = cross_validate(original.values(), y_orig, 10, c,
                                     cfg.seed, {}, cfg.jobs);
      const auto sc = cross_validate(candidate.values(), y_cand, 10, c,
                                     cfg.seed, {}, cfg.jobs);
      class_rows.push_back({std::string("original:") + classifier_name(c), 0.0,
                            so.f1_macro});
      class_rows.push_back({std::string("candidate:") + classifier_name(c),
                            1.0, sc.f1_macro});
      report.metadata[std::string("original_f1_macro_") + classifier_name(c)] =
          format_double(so.f1_macro);
      if (c == Classifier::logistic) {
        report.classification = sc;
      } else {
        report.metadata["candidate_f1_macro_nearest_neighbor"] =
            format_double(sc.f1_macro);
      }
    }
  }
  report.pmse = pmse(original, candidate, cfg.propensity);
  report.covariance_distance = covariance_distance(original, candidate);

  const std::size_t k = std::min<std::size_t>(
      cfg.pca_components, static_cast<std::size_t>(original.cols()));
  const PcaResult pca = pca_project(original, k);
  const Matrix cand_proj = pca_transform(pca, candidate.values());
  std::vector<TidyRow> pca_rows;
  auto emit = [&](const char *series, const Matrix &proj) {
    for (Index i = 0; i < proj.rows(); ++i) {
      pca_rows.push_back(
          {series, proj(i, 0), proj.cols() > 1 ? proj(i, 1) : 0.0});
    }
  };
  emit("original", pca.projected.values());
  emit("candidate", cand_proj);
  for (Index c = 0; c < pca.explained_variance_ratio.size(); ++c) {
    report.metadata["explained_variance_ratio_pc" + std::to_string(c + 1)] =
        format_double(pca.explained_variance_ratio(c));
  }

  std::vector<TidyRow> cov_rows;
  const Matrix co = population_covariance(original.values());
  const Matrix cc = population_covariance(candidate.values());
  for (Index a = 0; a < co.rows(); ++a) {
    for (Index b = 0; b < co.cols(); ++b) {
      cov_rows.push_back({"original:" + std::to_string(a),
                          static_cast<double>(b), co(a, b)});
    }
  }
  for (Index a = 0; a < cc.rows(); ++a) {
    for (Index b = 0; b < cc.cols(); ++b) {
      cov_rows.push_back({"candidate:" + std::to_string(a),
                          static_cast<double>(b), cc(a, b)});
    }
  }

  ensure_dir(cfg.output_dir);
  write_tidy_csv(pca_rows, cfg.output_dir / "pca.csv");
  write_tidy_csv(cov_rows, cfg.output_dir / "covariance.csv");
  if (!class_rows.empty()) {
    write_tidy_csv(class_rows, cfg.output_dir / "classification.csv");
  }
  write_json(as_json(report, cfg.snapshot()), cfg.output_dir / "report.json");
  out << "pmse " << fixed(*report.pmse) << ", covariance distance "
      << fixed(*report.covariance_distance) << '\n';
  return 0;
}

int cmd_evaluate(const RunConfig &cfg, std::ostream &out) {
  return cfg.mode == "imputation" ? evaluate_imputation(cfg, out)
                                  : evaluate_augmentation(cfg, out);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_benchmark(const RunConfig &cfg, std::ostream &out, std::ostream &err) {
  const MaskedDataset input = load_csv(require(cfg.input, "input"));
  if (input.data().has_missing()) {
    throw ValidationError("benchmark input must be complete");
  }
  for (double r : cfg.rates) {
    if (!(r > 0.0 && r < 1.0)) {
      throw DomainError("benchmark rates must lie in (0, 1)");
    }
  }
  const std::size_t n_rates = cfg.rates.size();
  const std::size_t n_methods = cfg.methods.size();
  const std::size_t n_seeds = cfg.seeds.size();
  const std::size_t cells = n_rates * n_methods * n_seeds;
  std::vector<double> scores(cells);
  parallel_for(cells, cfg.jobs, [&](std::size_t cell) {
    const std::size_t a = cell / (n_methods * n_seeds);
    const std::size_t m = (cell / n_seeds) % n_methods;
    const std::size_t s = cell % n_seeds;
    const std::uint64_t seed = cfg.seeds[s];
    const InjectionResult inj =
        inject_missing(input, cfg.rates[a], derive_seed(seed, {a}));
    const MethodOutput res = impute_with(cfg.methods[m], inj.masked, cfg, seed, 1);
    scores[cell] = nrmse(inj.ground_truth, res.completed, inj.masked.mask());
  });

  ensure_dir(cfg.output_dir);
  const fs::path csv = cfg.output_dir / "benchmark.csv";
  {
    std::vector<std::string> lines;
    std::string text = "series,x,y,seed\n";
    for (std::size_t cell = 0; cell < cells; ++cell) {
      const std::size_t a = cell / (n_methods * n_seeds);
      const std::size_t m = (cell / n_seeds) % n_methods;
      const std::size_t s = cell % n_seeds;
      text += std::string(method_name(cfg.methods[m])) + "," +
              format_double(cfg.rates[a]) + "," + format_double(scores[cell]) +
              "," + std::to_string(cfg.seeds[s]) + "\n";
    }
    std::ofstream f(csv, std::ios::binary);
    if (!f || !(f << text)) {
      throw IoError("failed writing " + csv.string());
    }
  }

  Json medians = Json::object();
  Json warnings = Json::array();
  for (std::size_t m = 0; m < n_methods; ++m) {
    std::vector<std::pair<double, double>> by_rate;
    for (std::size_t a = 0; a < n_rates; ++a) {
      std::vector<double> v;
      for (std::size_t s = 0; s < n_seeds; ++s) {
        v.push_back(scores[(a * n_methods + m) * n_seeds + s]);
      }
      by_rate.emplace_back(cfg.rates[a], median(std::move(v)));
    }
    std::sort(by_rate.begin(), by_rate.end());
    Json entries = Json::array();
    for (std::size_t a = 0; a < by_rate.size(); ++a) {
      entries.push_back({{"rate", by_rate[a].first},
                         {"median_nrmse", by_rate[a].second}});
      if (a > 0 && by_rate[a].second < by_rate[a - 1].second) {
        const std::string msg =
            std::string(method_name(cfg.methods[m])) +
            ": median NRMSE drops from " + fixed(by_rate[a - 1].second) +
            " at rate " + format_double(by_rate[a - 1].first) + " to " +
            fixed(by_rate[a].second) + " at rate " +
            format_double(by_rate[a].first);
        warnings.push_back(msg);
        err << "warning: " << msg << '\n';
      }
    }
    medians[method_name(cfg.methods[m])] = entries;
  }
  write_json({{"schema", kReportSchema},
              {"command", "benchmark"},
              {"cells", cells},
              {"medians", medians},
              {"warnings", warnings},
              {"config", cfg.snapshot()}},
             cfg.output_dir / "benchmark.json");
  out << "benchmark: " << cells << " cells written to " << csv.string() << '\n';
  return 0;
}

struct GenerateOptions {
  std::string fixture = "correlated";
  std::size_t rows = 500;
  std::size_t cols = 8;
  double rho = 0.9;
  double offset = 10.0;
};

int cmd_generate(const RunConfig &cfg, const GenerateOptions &g,
                 std::ostream &out) {
  ensure_dir(cfg.output_dir);
  auto with_labels = [](const fixtures::LabeledData &ld) {
    std::vector<std::string> names = ld.data.feature_names();
    names.push_back("class");
    Matrix values(ld.data.rows(), ld.data.cols() + 1);
    values.leftCols(ld.data.cols()) = ld.data.values();
    for (Index i = 0; i < values.rows(); ++i) {
      values(i, ld.data.cols()) = ld.labels[static_cast<std::size_t>(i)];
    }
    return DataMatrix(std::move(names), std::move(values));
  };
  DataMatrix data;
  if (g.fixture == "correlated") {
    data = fixtures::correlated_gaussian(g.rows, g.cols, g.rho, cfg.seed);
  } else if (g.fixture == "symptoms") {
    data = with_labels(fixtures::symptom_survey(g.rows, cfg.seed));
    Json rates = Json::object();
    for (std::size_t j = 0; j < fixtures::symptom_names().size(); ++j) {
      rates[fixtures::symptom_names()[j]] =
          fixtures::symptom_missing_ratios()[j];
    }
    write_json(rates, cfg.output_dir / "column_rates.json");
  } else if (g.fixture == "digits") {
    data = fixtures::digit_like(g.rows, cfg.seed);
  } else if (g.fixture == "clusters") {
    data = with_labels(
        fixtures::two_clusters(g.rows, g.cols, g.offset, cfg.seed));
  } else if (g.fixture == "classes") {
    data = with_labels(fixtures::gaussian_classes(
        g.rows, g.cols, fixtures::symptom_class_proportions(), g.offset, g.rho,
        cfg.seed));
  } else {
    throw ValidationError("unknown fixture \"" + g.fixture + "\"");
  }
  save_csv(data, cfg.output_dir / "data.csv");
  out << "wrote " << data.rows() << "x" << data.cols() << " fixture "
      << g.fixture << '\n';
  return 0;
}

} // namespace

MethodOutput impute_with(Method m, const MaskedDataset &dataset,
                         const RunConfig &cfg, std::uint64_t seed,
                         std::size_t jobs) {
  MethodOutput out;
  switch (m) {
  case Method::mean:
    out.completed = mean_impute(dataset);
    return out;
  case Method::knn: {
    KnnConfig k = cfg.knn;
    k.jobs = jobs;
    out.completed = knn_impute(dataset, k);
    return out;
  }
  case Method::ppca: {
    PpcaConfig p = cfg.ppca;
    p.seed = seed;
    p.jobs = jobs;
    out.completed = ppca_impute(dataset, p);
    return out;
  }
  default:
    break;
  }
  out.samples = run_fhmc(dataset, fold_for_method(cfg.fold, m, seed, jobs));
  out.fold_result = impute(*out.samples, dataset);
  out.completed = out.fold_result->completed;
  return out;
}

int run(const std::vector<std::string> &args, std::ostream &out,
        std::ostream &err) {
  CLI::App app{"Folded Hamiltonian Monte Carlo imputation and augmentation"};
  app.name("fhmc");
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::string> output_dir;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "master seed (overrides the config)");
  app.add_option("--jobs", jobs, "worker threads, 0 = all cores");
  app.add_option("--output-dir", output_dir, "directory for outputs");

  std::optional<std::string> input, truth, mask, original, candidate,
      column_rates, method, mode, label_column;
  std::optional<double> rate;
  std::optional<std::size_t> n_rows;
  bool export_samples = false;
  GenerateOptions gen;

  auto *inject = app.add_subcommand("inject", "mask cells of a complete CSV");
  inject->add_option("--input", input, "complete CSV");
  inject->add_option("--rate", rate, "per-cell missing probability");
  inject->add_option("--column-rates", column_rates,
                     "JSON array or {column: rate} object");

  auto *impute_cmd = app.add_subcommand("impute", "fill missing cells");
  impute_cmd->add_option("--input", input, "CSV with missing cells");
  impute_cmd->add_option("--truth", truth, "complete CSV for scoring");
  impute_cmd->add_option("--method", method,
                         "fhmc, hmc_single, mh, gibbs, mean, knn or ppca");
  impute_cmd->add_flag("--export-samples", export_samples,
                       "write every completed dataset");

  auto *augment_cmd = app.add_subcommand("augment", "draw synthetic rows");
  augment_cmd->add_option("--input", input, "CSV (missing cells allowed)");
  augment_cmd->add_option("--n-rows", n_rows, "number of synthetic rows");
  augment_cmd->add_option("--method", method, "fhmc, hmc_single, mh or gibbs");

  auto *evaluate = app.add_subcommand("evaluate", "score imputed or synthetic "
                                                  "data");
  evaluate->add_option("--original", original, "reference CSV");
  evaluate->add_option("--candidate", candidate, "imputed or synthetic CSV");
  evaluate->add_option("--mask", mask, "masked CSV (imputation mode)");
  evaluate->add_option("--mode", mode, "imputation or augmentation");
  evaluate->add_option("--label-column", label_column,
                       "integer class column (augmentation mode)");

  auto *benchmark = app.add_subcommand("benchmark", "NRMSE sweep over rates, "
                                                    "methods and seeds");
  benchmark->add_option("--input", input, "complete CSV");

  auto *generate = app.add_subcommand("generate", "write a synthetic fixture");
  generate->add_option("--fixture", gen.fixture,
                       "correlated, symptoms, digits, clusters or classes");
  generate->add_option("--rows", gen.rows, "rows");
  generate->add_option("--cols", gen.cols, "columns");
  generate->add_option("--rho", gen.rho, "equicorrelation");
  generate->add_option("--offset", gen.offset,
                       "cluster offset or class separation");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) {
      reversed.pop_back();
    }
    app.parse(reversed);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError &e) {
    report_error(err, "usage", e.what());
    return 2;
  }

  try {
    RunConfig cfg = config_path.empty()
                        ? RunConfig{}
                        : run_config_from_json(read_json(config_path));
    if (seed) {
      cfg.seed = *seed;
    }
    if (jobs) {
      cfg.jobs = *jobs;
    }
    if (output_dir) {
      cfg.output_dir = *output_dir;
    }
    auto set_path = [](std::optional<fs::path> &target,
                       const std::optional<std::string> &v) {
      if (v) {
        target = *v;
      }
    };
    set_path(cfg.input, input);
    set_path(cfg.truth, truth);
    set_path(cfg.mask, mask);
    set_path(cfg.original, original);
    set_path(cfg.candidate, candidate);
    set_path(cfg.column_rates, column_rates);
    if (rate) {
      cfg.rate = *rate;
    }
    if (method) {
      cfg.method = parse_method(*method);
    }
    if (mode) {
      if (*mode != "imputation" && *mode != "augmentation") {
        throw ValidationError("mode must be imputation or augmentation");
      }
      cfg.mode = *mode;
    }
    if (label_column) {
      cfg.label_column = *label_column;
    }
    if (n_rows) {
      cfg.n_rows = *n_rows;
    }
    cfg.export_samples = cfg.export_samples || export_samples;
    cfg.fold.seed = cfg.seed;
    cfg.ppca.seed = cfg.seed;
    cfg.propensity.seed = cfg.seed;

    if (inject->parsed()) {
      return cmd_inject(cfg, out);
    }
    if (impute_cmd->parsed()) {
      return cmd_impute(cfg, out);
    }
    if (augment_cmd->parsed()) {
      return cmd_augment(cfg, out);
    }
    if (evaluate->parsed()) {
      return cmd_evaluate(cfg, out);
    }
    if (benchmark->parsed()) {
      return cmd_benchmark(cfg, out, err);
    }
    return cmd_generate(cfg, gen, out);
  } catch (const Error &e) {
    report_error(err, kind_name(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception &e) {
    report_error(err, "internal", e.what());
    return 3;
  }
}

} // namespace fhmc::cli

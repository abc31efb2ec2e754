#include "trim/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <utility>

#include <CLI11.hpp>

#include "trim/config.hpp"
#include "trim/csv.hpp"
#include "trim/dictionary.hpp"
#include "trim/error.hpp"
#include "trim/experiments.hpp"
#include "trim/trim.hpp"

namespace trim {
namespace {

using Json = nlohmann::json;

/// Flags shared by every subcommand. Unset optionals leave the config value.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<std::size_t> threads;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config, "Config file (INI sections; see the key list below)");
  sub->add_option("--seed", f.seed, "Master seed; overrides run.seed");
  sub->add_option("--out", f.out, "Output directory; overrides run.out");
  sub->add_option("--format", f.format, "Report format: csv, json or both; overrides run.format");
  sub->add_option("--threads", f.threads, "Worker threads for benchmark (0 = all cores)");
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.out = *f.out;
  if (f.format) {
    try {
      cfg.format = parse_format(*f.format);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("--format: ") + e.what());
    }
  }
  if (f.threads) cfg.threads = *f.threads;
  cfg.propagate_seed();
  return cfg;
}

bool wants_csv(const RunConfig& c) { return c.format != OutputFormat::Json; }
bool wants_json(const RunConfig& c) { return c.format != OutputFormat::Csv; }

/// Files are collected first and written only once every computation has
/// succeeded, so failing commands leave no partial outputs behind.
class Outputs {
 public:
  void add(std::string name, std::string contents) { files_.emplace_back(std::move(name), std::move(contents)); }
  void add_json(std::string name, const Json& j) { add(std::move(name), j.dump(2) + "\n"); }

  void write(const std::string& dir, std::ostream& out) const {
    std::filesystem::create_directories(dir);
    for (const auto& [name, contents] : files_) {
      const auto path = (std::filesystem::path(dir) / name).string();
      write_text_file(path, contents);
      out << "wrote " << path << "\n";
    }
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

Json report_header(const std::string& command, const RunConfig& cfg) {
  return {{"format_version", 1}, {"tool_version", kToolVersion}, {"command", command}, {"config", cfg.to_json()}};
}

NdArray as_matrix(const NdArray& a) { return a.rank() == 2 ? a : a.reshaped({1, a.size()}); }

LinearDictionary load_dictionary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dictionary checkpoint: " + path);
  try {
    return dictionary_from_json(Json::parse(in));
  } catch (const Json::exception& e) {
    throw InputError("malformed dictionary checkpoint " + path + ": " + e.what());
  }
}

Transform build_transform(const QuerySection& q, std::size_t n) {
  if (q.transform == "identity") return IdentityTransform{n};
  if (q.transform == "dft1d") return make_dft1d(n);
  if (q.transform == "dft2d") {
    if (q.grid_height == 0 || n % q.grid_height != 0) {
      throw DimensionError("query.grid_height must divide the input width " + std::to_string(n));
    }
    return make_dft2d(q.grid_height, n / q.grid_height);
  }
  if (q.transform == "dictionary") {
    if (q.dictionary.empty()) throw ConfigError("query.dictionary is required for transform = dictionary");
    Transform t = load_dictionary(q.dictionary);
    if (raw_size(t) != n) {
      throw DimensionError("dictionary raw size " + std::to_string(raw_size(t)) + " does not match input width " +
                           std::to_string(n));
    }
    return t;
  }
  throw ConfigError("query.transform: expected identity, dft1d, dft2d or dictionary, got '" + q.transform + "'");
}

void check_input_width(const MlpModel& model, const NdArray& X, const std::string& path) {
  if (X.cols() != model.input_width()) {
    throw DimensionError(path + ": rows have " + std::to_string(X.cols()) + " values but the model expects " +
                         std::to_string(model.input_width()));
  }
}

std::size_t parse_label(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("query.mask: bad " + what + " '" + s + "'");
  }
}

/// Single-mask specs; "groups" is handled by the caller.
Mask parse_mask(const std::string& spec, const Transform& t) {
  const std::size_t k = coefficient_count(t);
  if (spec == "all") return Mask::ones(k);
  if (spec == "none") return Mask::zeros(k);
  if (spec.rfind("group:", 0) == 0) {
    const std::size_t label = parse_label(spec.substr(6), "group label");
    const auto groups = coefficient_groups(t);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (groups[g].label == label) return group_mask(t, groups, g);
    }
    throw ConfigError("query.mask: no group with label " + std::to_string(label));
  }
  if (spec.rfind("band:", 0) == 0) {
    const auto rest = spec.substr(5);
    const auto colon = rest.find(':');
    if (colon == std::string::npos) throw ConfigError("query.mask: expected band:<lo>:<hi>");
    const BandSpec band{parse_label(rest.substr(0, colon), "band bound"), parse_label(rest.substr(colon + 1), "band bound")};
    if (!is_fourier(t)) throw ConfigError("query.mask: band masks need a dft1d or dft2d transform");
    return band_mask(t, band);
  }
  throw ConfigError("query.mask: expected all, none, groups, group:<label> or band:<lo>:<hi>, got '" + spec + "'");
}

Json query_metadata(const RunConfig& cfg, const Transform& t) {
  Json j = method_config_json(cfg.query.method);
  j["transform"] = kind_name(kind(t));
  j["mask"] = cfg.query.mask;
  return j;
}

// ---------------------------------------------------------------------------

int cmd_benchmark(const RunConfig& cfg, std::ostream& out) {
  cfg.benchmark.validate();
  const BenchmarkReport r = run_benchmark(cfg.benchmark, cfg.threads);

  Outputs files;
  if (wants_json(cfg)) files.add_json("benchmark.json", benchmark_report_json(r));
  if (wants_csv(cfg)) files.add("benchmark.csv", benchmark_report_csv(r));
  files.write(cfg.out, out);

  out << std::left << std::setw(14) << "method" << std::right << std::setw(10) << "error_pct" << std::setw(12)
      << "stderr_pct" << "\n";
  for (const auto& s : r.summaries) {
    out << std::left << std::setw(14) << method_name(s.method) << std::right << std::fixed << std::setprecision(2)
        << std::setw(10) << s.error_pct << std::setw(12) << s.stderr_pct << "\n";
  }
  out.unsetf(std::ios::floatfield);
  out << "trials " << r.trials.size() << ", diverged " << r.diverged_trials << ", runtime "
      << std::setprecision(3) << r.runtime_seconds << " s\n";
  return kExitOk;
}

int cmd_bands(const RunConfig& cfg, const std::string& model_path, const std::string& input_path,
              std::ostream& out, std::ostream& err) {
  const MlpModel model = load_model(model_path);
  const NdArray X = as_matrix(read_array(input_path));
  check_input_width(model, X, input_path);
  const Transform t = build_transform(cfg.query, X.cols());
  if (!is_fourier(t)) throw ConfigError("bands: query.transform must be dft1d or dft2d");
  if (cfg.query.band_width < 1) throw ConfigError("query.band_width must be >= 1");

  Outputs files;
  Json curves = Json::array();
  Json meta = query_metadata(cfg, t);
  meta["mask"] = "band sweep";
  meta["band_width"] = cfg.query.band_width;
  meta["model"] = model_path;
  meta["input"] = input_path;
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const auto row = X.row(r);
    const NdArray x = NdArray::vector({row.begin(), row.end()});
    BandCurve curve;
    try {
      curve = band_sweep(model, x, t, cfg.query.band_width, cfg.query.method);
    } catch (const BandNormalizationError& e) {
      err << "warning: row " << r << ": prediction is zero, normalized scores left empty\n";
      curve = e.curve;
    }
    if (wants_csv(cfg)) files.add("bands_row" + std::to_string(r) + ".csv", band_curve_csv(curve));
    Json row_meta = meta;
    row_meta["row"] = r;
    curves.push_back(band_curve_json(curve, row_meta));
    const auto best = argmax(curve.scores);
    out << "row " << r << ": prediction " << curve.prediction << ", top band [" << curve.bands[best].lo << ", "
        << curve.bands[best].hi << ")\n";
  }
  if (wants_json(cfg)) {
    Json j = report_header("bands", cfg);
    j["curves"] = curves;
    files.add_json("bands.json", j);
  }
  files.write(cfg.out, out);
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const TrainSection& ts = cfg.train;
  if (ts.data.empty()) throw ConfigError("train.data is required (config or --data)");
  if (ts.labels.empty()) throw ConfigError("train.labels is required (config or --labels)");
  const NdArray X = as_matrix(read_array(ts.data));
  const NdArray y = read_array(ts.labels);
  if (y.size() != X.rows()) {
    throw DimensionError(ts.labels + ": " + std::to_string(y.size()) + " labels for " + std::to_string(X.rows()) +
                         " samples");
  }
  MlpSpec spec;
  spec.layer_widths.push_back(X.cols());
  spec.layer_widths.insert(spec.layer_widths.end(), ts.hidden_widths.begin(), ts.hidden_widths.end());
  spec.layer_widths.push_back(1);
  spec.head = ts.head;
  spec.validate();
  ts.train.validate();

  const TrainResult res = train(spec, X, y.values(), ts.train);
  const MlpModel model(spec, res.params);

  Outputs files;
  files.add("model.json", model_to_json(model).dump(1) + "\n");
  if (wants_csv(cfg)) {
    CsvWriter w({"epoch", "loss"});
    for (std::size_t e = 0; e < res.loss_history.size(); ++e) {
      w.row({std::to_string(e), format_number(res.loss_history[e])});
    }
    files.add("train_loss.csv", w.str());
  }
  Json report = report_header("train", cfg);
  report["loss_history"] = res.loss_history;
  if (spec.head == OutputHead::Logit) report["train_accuracy"] = classification_accuracy(model, X, y.values());
  if (wants_json(cfg)) files.add_json("train_report.json", report);
  files.write(cfg.out, out);
  out << "final loss " << res.loss_history.back();
  if (report.contains("train_accuracy")) out << ", train accuracy " << report["train_accuracy"].get<double>();
  out << "\n";
  return kExitOk;
}

int cmd_attribute(const RunConfig& cfg, const std::string& model_path, const std::string& input_path,
                  std::ostream& out) {
  const MlpModel model = load_model(model_path);
  const NdArray X = as_matrix(read_array(input_path));
  check_input_width(model, X, input_path);
  const Transform t = build_transform(cfg.query, X.cols());
  const bool per_group = cfg.query.mask == "groups";
  const Mask mask = per_group ? Mask{} : parse_mask(cfg.query.mask, t);
  if (!per_group) validate_mask(t, mask);

  Outputs files;
  Json results = Json::array();
  const Json meta = query_metadata(cfg, t);
  CsvWriter summary({"row", "score", "output", "baseline_output", "completeness_gap"});
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const auto row = X.row(r);
    const NdArray x = NdArray::vector({row.begin(), row.end()});
    Json row_meta = meta;
    row_meta["row"] = r;
    if (per_group) {
      const GroupScores g = group_scores(model, x, t, cfg.query.method);
      if (wants_csv(cfg)) files.add("attribution_row" + std::to_string(r) + ".csv", group_scores_csv(g));
      results.push_back(group_scores_json(g, row_meta));
      out << "row " << r << ": prediction " << g.prediction << ", top group " << g.argmax_label << "\n";
    } else {
      const AttributionResult a = trim_score(model, x, TrimQuery{t, mask, cfg.query.method});
      summary.row({std::to_string(r), format_number(a.score), format_number(a.output),
                   format_number(a.baseline_output), format_number(a.completeness_gap)});
      results.push_back({{"query", row_meta},
                         {"score", a.score},
                         {"scores", a.scores},
                         {"standard_errors", a.standard_errors},
                         {"output", a.output},
                         {"baseline_output", a.baseline_output},
                         {"completeness_gap", a.completeness_gap}});
      out << "row " << r << ": score " << a.score << "\n";
    }
  }
  if (wants_csv(cfg) && !per_group) files.add("attribution.csv", summary.str());
  if (wants_json(cfg)) {
    Json j = report_header("attribute", cfg);
    j["model"] = model_path;
    j["input"] = input_path;
    j["results"] = results;
    files.add_json("attribution.json", j);
  }
  files.write(cfg.out, out);
  return kExitOk;
}

int cmd_learn_transform(const RunConfig& cfg, std::ostream& out) {
  const DictionarySection& ds = cfg.dictionary;
  if (ds.data.empty()) throw ConfigError("dictionary.data is required (config or --data)");
  ds.dictionary.validate();
  const NdArray X = as_matrix(read_array(ds.data));
  std::optional<MlpModel> model;
  if (!ds.model.empty()) {
    model.emplace(load_model(ds.model));
    check_input_width(*model, X, ds.data);
  }
  if (ds.dictionary.lambda_trim > 0.0 && !model) throw ConfigError("dictionary.lambda_trim > 0 requires dictionary.model");

  SeededRng rng = SeededRng(cfg.seed).child("learn-transform");
  const DictionaryResult res = learn_dictionary(X, ds.dictionary, model ? &*model : nullptr, rng);

  Outputs files;
  Json dict = dictionary_to_json(res.dictionary, ds.dictionary, cfg.seed);
  dict["tool_version"] = kToolVersion;
  files.add_json("dictionary.json", dict);
  if (wants_csv(cfg)) {
    CsvWriter w({"step", "sparsity", "reconstruction", "trim", "total"});
    for (std::size_t s = 0; s < res.history.size(); ++s) {
      const auto& l = res.history[s];
      w.row({std::to_string(s), format_number(l.sparsity), format_number(l.reconstruction), format_number(l.trim),
             format_number(l.total)});
    }
    files.add("dictionary_loss.csv", w.str());
  }
  if (wants_json(cfg)) {
    Json j = report_header("learn-transform", cfg);
    Json hist = Json::array();
    for (const auto& l : res.history) {
      hist.push_back({{"sparsity", l.sparsity}, {"reconstruction", l.reconstruction}, {"trim", l.trim}, {"total", l.total}});
    }
    j["history"] = hist;
    files.add_json("learn_transform_report.json", j);
  }
  files.write(cfg.out, out);
  const auto& first = res.history.front();
  const auto& last = res.history.back();
  out << "loss " << first.total << " -> " << last.total << " (reconstruction " << first.reconstruction << " -> "
      << last.reconstruction << ", sparsity " << first.sparsity << " -> " << last.sparsity << ")\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attributions for masked groups of transformed features (Fourier bands, dictionary atoms)", "trim"};
  app.require_subcommand(1);
  app.footer("Config keys and defaults:\n" + config_reference());
  app.set_version_flag("--version", kToolVersion);

  CommonFlags common;
  std::optional<std::size_t> n_datasets, width, grid_height;
  std::optional<std::string> method, transform, mask, data, labels, dictionary, dict_model;
  std::string model_path, input_path;

  auto* bench = app.add_subcommand("benchmark", "Synthetic frequency-recovery benchmark");
  add_common(bench, common);
  bench->add_option("--n-datasets", n_datasets, "Number of simulated datasets; overrides benchmark.n_datasets");

  auto* bands = app.add_subcommand("bands", "Band-sweep curves for each input row");
  add_common(bands, common);
  bands->add_option("--model", model_path, "Model checkpoint (JSON)")->required();
  bands->add_option("--input", input_path, "Input rows (CSV or .bin)")->required();
  bands->add_option("--width", width, "Band width in frequency units; overrides query.band_width");
  bands->add_option("--method", method, "cd, ig, input_x_grad or shapley; overrides query.method");
  bands->add_option("--transform", transform, "dft1d or dft2d; overrides query.transform");
  bands->add_option("--grid-height", grid_height, "Grid height for dft2d; overrides query.grid_height");

  auto* trn = app.add_subcommand("train", "Train a ReLU MLP and write a checkpoint");
  add_common(trn, common);
  trn->add_option("--data", data, "Training inputs; overrides train.data");
  trn->add_option("--labels", labels, "Training targets; overrides train.labels");

  auto* attr = app.add_subcommand("attribute", "Score masked transformed features");
  add_common(attr, common);
  attr->add_option("--model", model_path, "Model checkpoint (JSON)")->required();
  attr->add_option("--input", input_path, "Input rows (CSV or .bin)")->required();
  attr->add_option("--method", method, "cd, ig, input_x_grad or shapley; overrides query.method");
  attr->add_option("--transform", transform, "identity, dft1d, dft2d or dictionary; overrides query.transform");
  attr->add_option("--mask", mask, "all, none, groups, group:<label> or band:<lo>:<hi>; overrides query.mask");
  attr->add_option("--dictionary", dictionary, "Dictionary checkpoint; overrides query.dictionary");
  attr->add_option("--grid-height", grid_height, "Grid height for dft2d; overrides query.grid_height");

  auto* learn = app.add_subcommand("learn-transform", "Learn a linear dictionary transform");
  add_common(learn, common);
  learn->add_option("--data", data, "Training signals; overrides dictionary.data");
  learn->add_option("--model", dict_model, "Model checkpoint for the attribution penalty; overrides dictionary.model");

  std::vector<std::string> argv_store{"trim"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    RunConfig cfg = resolve(common);
    if (n_datasets) cfg.benchmark.n_datasets = *n_datasets;
    if (width) cfg.query.band_width = *width;
    if (grid_height) cfg.query.grid_height = *grid_height;
    if (method) {
      try {
        cfg.query.method.method = parse_method(*method);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("--method: ") + e.what());
      }
    }
    if (transform) cfg.query.transform = *transform;
    if (mask) cfg.query.mask = *mask;
    if (dictionary) cfg.query.dictionary = *dictionary;

    if (*bench) return cmd_benchmark(cfg, out);
    if (*bands) return cmd_bands(cfg, model_path, input_path, out, err);
    if (*trn) {
      if (data) cfg.train.data = *data;
      if (labels) cfg.train.labels = *labels;
      return cmd_train(cfg, out);
    }
    if (*attr) return cmd_attribute(cfg, model_path, input_path, out);
    if (*learn) {
      if (data) cfg.dictionary.data = *data;
      if (dict_model) cfg.dictionary.model = *dict_model;
      return cmd_learn_transform(cfg, out);
    }
  } catch (const std::invalid_argument& e) {
    // ConfigError, InputError, DimensionError, SizeError, ContractError.
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace trim

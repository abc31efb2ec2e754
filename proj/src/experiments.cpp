#include "trim/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <numbers>
#include <sstream>
#include <thread>

#include "trim/csv.hpp"
#include "trim/error.hpp"
#include "trim/fft.hpp"

namespace trim {

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

NdArray select_rows(const NdArray& X, std::size_t begin, std::size_t end) {
  NdArray out({end - begin, X.cols()});
  std::copy(X.data().begin() + static_cast<std::ptrdiff_t>(begin * X.cols()),
            X.data().begin() + static_cast<std::ptrdiff_t>(end * X.cols()), out.data().begin());
  return out;
}

}  // namespace

std::string model_source_name(ModelSource s) {
  switch (s) {
    case ModelSource::Trained: return "trained";
    case ModelSource::Oracle: return "oracle";
    case ModelSource::Untrained: return "untrained";
  }
  return "unknown";
}

ModelSource parse_model_source(const std::string& name) {
  if (name == "trained") return ModelSource::Trained;
  if (name == "oracle") return ModelSource::Oracle;
  if (name == "untrained") return ModelSource::Untrained;
  throw ContractError("unknown model source '" + name + "'");
}

SyntheticDataset generate_dataset(std::size_t d, std::size_t n, SeededRng& rng) {
  if (!is_power_of_two(d) || d < 8) throw ContractError("generate_dataset: d must be a power of two >= 8");
  if (n < 4) throw ContractError("generate_dataset: n must be >= 4");
  SyntheticDataset ds;
  ds.k = 1 + static_cast<std::size_t>(rng.uniform_index(d / 2 - 1));
  ds.X = NdArray({n, d});
  for (auto& v : ds.X.data()) v = rng.normal();

  const Transform t = make_dft1d(d);
  ds.magnitudes.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = ds.X.row(r);
    const auto s = trim::apply(t, NdArray::vector({row.begin(), row.end()})).values;
    ds.magnitudes[r] = std::hypot(s[2 * ds.k - 1], s[2 * ds.k]);
  }
  const double med = median(ds.magnitudes);
  ds.y.resize(n);
  for (std::size_t r = 0; r < n; ++r) ds.y[r] = ds.magnitudes[r] > med ? 1.0 : 0.0;
  return ds;
}

MlpSpec SyntheticConfig::net_spec() const {
  MlpSpec spec;
  spec.layer_widths.push_back(d);
  spec.layer_widths.insert(spec.layer_widths.end(), hidden_widths.begin(), hidden_widths.end());
  spec.layer_widths.push_back(1);
  spec.head = OutputHead::Logit;
  return spec;
}

void SyntheticConfig::validate() const {
  if (!is_power_of_two(d) || d < 8) throw ContractError("SyntheticConfig: d must be a power of two >= 8");
  if (n_datasets < 1) throw ContractError("SyntheticConfig: n_datasets must be >= 1");
  if (n_samples < 4) throw ContractError("SyntheticConfig: n_samples must be >= 4");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ContractError("SyntheticConfig: train_fraction in (0,1)");
  if (methods.empty()) throw ContractError("SyntheticConfig: no methods configured");
  if (max_scored_points < 1) throw ContractError("SyntheticConfig: max_scored_points must be >= 1");
  if (ig_steps < 1) throw ContractError("SyntheticConfig: ig_steps must be >= 1");
  if (shapley_permutations < 1) throw ContractError("SyntheticConfig: shapley_permutations must be >= 1");
  if (oracle_directions < 3) throw ContractError("SyntheticConfig: oracle_directions must be >= 3");
  net_spec().validate();
  train.validate();
}

nlohmann::json SyntheticConfig::to_json() const {
  std::vector<std::string> names;
  for (auto m : methods) names.push_back(method_name(m));
  return {{"d", d},
          {"n_samples", n_samples},
          {"train_fraction", train_fraction},
          {"n_datasets", n_datasets},
          {"layer_widths", net_spec().layer_widths},
          {"optimizer", train.optimizer == OptimizerKind::Adam ? "adam" : "sgd_momentum"},
          {"learning_rate", train.learning_rate},
          {"epochs", train.epochs},
          {"batch_size", train.batch_size},
          {"methods", names},
          {"master_seed", master_seed},
          {"max_scored_points", max_scored_points},
          {"ig_steps", ig_steps},
          {"shapley_permutations", shapley_permutations},
          {"model_source", model_source_name(model_source)},
          {"target_feature", "magnitude of packed dft1d pair vs dataset median"}};
}

MlpModel make_oracle_model(std::size_t d, std::size_t k, std::size_t directions, double threshold) {
  if (k < 1 || k >= d / 2) throw ContractError("make_oracle_model: k must be in 1..d/2-1");
  const Transform t = make_dft1d(d);
  // Rows of the packing matrix for Re_k and Im_k.
  std::vector<double> re(d), im(d);
  for (std::size_t i = 0; i < d; ++i) {
    NdArray e({d});
    e[i] = 1.0;
    const auto s = trim::apply(t, e).values;
    re[i] = s[2 * k - 1];
    im[i] = s[2 * k];
  }
  const std::size_t M = directions;
  MlpParams p;
  NdArray w1({M, d});
  for (std::size_t j = 0; j < M; ++j) {
    const double phi = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(M);
    for (std::size_t i = 0; i < d; ++i) w1(j, i) = std::cos(phi) * re[i] + std::sin(phi) * im[i];
  }
  p.layers.push_back({std::move(w1), std::vector<double>(M, 0.0)});
  p.layers.push_back({NdArray::identity(M), std::vector<double>(M, 0.0)});
  p.layers.push_back({NdArray({1, M}, std::numbers::pi / static_cast<double>(M)), {-threshold}});
  MlpSpec spec{{d, M, M, 1}, OutputHead::Logit};
  return MlpModel(std::move(spec), std::move(p));
}

std::vector<double> oracle_magnitudes(const MlpModel& oracle, const NdArray& X) {
  const NdArray out = oracle.forward(X);
  const double bias = oracle.params().layers.back().bias[0];
  std::vector<double> v(out.rows());
  for (std::size_t r = 0; r < out.rows(); ++r) v[r] = out[r] - bias;
  return v;
}

TrialOutcome run_trial(const SyntheticConfig& cfg, std::size_t trial_index) {
  cfg.validate();
  const SeededRng trial_rng = SeededRng(cfg.master_seed).child("trial").child(trial_index);
  SeededRng data_rng = trial_rng.child("data");
  const SyntheticDataset ds = generate_dataset(cfg.d, cfg.n_samples, data_rng);

  TrialOutcome outcome;
  outcome.trial = trial_index;
  outcome.k = ds.k;

  const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(cfg.n_samples)));
  const NdArray X_train = select_rows(ds.X, 0, n_train);
  const NdArray X_test = select_rows(ds.X, n_train, cfg.n_samples);
  const std::vector<double> y_train(ds.y.begin(), ds.y.begin() + static_cast<std::ptrdiff_t>(n_train));
  const std::vector<double> y_test(ds.y.begin() + static_cast<std::ptrdiff_t>(n_train), ds.y.end());

  std::optional<MlpModel> model;
  double decision_offset = 0.0;  // class 1 when output > decision_offset
  switch (cfg.model_source) {
    case ModelSource::Trained: {
      TrainConfig tc = cfg.train;
      tc.seed = trial_rng.child("train").seed();
      try {
        model.emplace(cfg.net_spec(), train(cfg.net_spec(), X_train, y_train, tc).params);
      } catch (const DivergenceError&) {
        outcome.diverged = true;
        for (auto m : cfg.methods) outcome.methods.push_back({m, 0, false, {}});
        return outcome;
      }
      break;
    }
    case ModelSource::Oracle: {
      // The oracle outputs the magnitude itself. The class threshold stays
      // out of the net: as an output bias CD would hand it to group k, whose
      // score would then take the sign of the logit.
      model.emplace(make_oracle_model(cfg.d, ds.k, cfg.oracle_directions, 0.0));
      decision_offset = median(oracle_magnitudes(*model, X_train));
      break;
    }
    case ModelSource::Untrained: {
      SeededRng init_rng = trial_rng.child("init");
      model.emplace(cfg.net_spec(), init_params(cfg.net_spec(), init_rng));
      break;
    }
  }

  // Score up to max_scored_points correctly classified test points, falling
  // back to the first test points if the model gets none right.
  const NdArray logits = model->forward(X_test);
  std::vector<std::size_t> points;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < X_test.rows(); ++r) {
    if ((logits[r] > decision_offset ? 1.0 : 0.0) != y_test[r]) continue;
    ++hits;
    if (points.size() < cfg.max_scored_points) points.push_back(r);
  }
  outcome.test_accuracy = static_cast<double>(hits) / static_cast<double>(X_test.rows());
  if (points.empty()) {
    for (std::size_t r = 0; r < X_test.rows() && points.size() < cfg.max_scored_points; ++r) points.push_back(r);
  }
  outcome.scored_points = points.size();

  const Transform t = make_dft1d(cfg.d);
  const SeededRng shapley_rng = trial_rng.child("shapley");
  for (auto m : cfg.methods) {
    MethodOutcome mo{m, 0, false, {}};
    for (std::size_t pi = 0; pi < points.size(); ++pi) {
      const auto row = X_test.row(points[pi]);
      const NdArray x = NdArray::vector({row.begin(), row.end()});
      MethodConfig mc;
      mc.method = m;
      mc.ig_steps = cfg.ig_steps;
      mc.shapley.mode = ShapleyConfig::Mode::Sampled;
      mc.shapley.permutations = cfg.shapley_permutations;
      mc.shapley.seed = shapley_rng.child(pi).seed();
      const GroupScores gs = group_scores(*model, x, t, mc);
      if (pi == 0) {
        mo.scores = gs;
      } else {
        for (std::size_t g = 0; g < gs.scores.size(); ++g) mo.scores.scores[g] += gs.scores[g];
        mo.scores.prediction += gs.prediction;
      }
    }
    const double count = static_cast<double>(points.size());
    for (auto& s : mo.scores.scores) s /= count;
    mo.scores.prediction /= count;
    mo.scores.argmax_label = mo.scores.labels[argmax(mo.scores.scores)];
    mo.argmax_label = mo.scores.argmax_label;
    mo.correct = mo.argmax_label == ds.k;
    outcome.methods.push_back(std::move(mo));
  }
  return outcome;
}

MethodSummary summarize(Method m, std::size_t correct, std::size_t trials) {
  const double p = static_cast<double>(correct) / static_cast<double>(trials);
  MethodSummary s;
  s.method = m;
  s.errors = trials - correct;
  s.error_pct = 100.0 * (1.0 - p);
  s.stderr_pct = 100.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
  return s;
}

const MethodSummary& BenchmarkReport::summary(Method m) const {
  for (const auto& s : summaries) {
    if (s.method == m) return s;
  }
  throw ContractError("BenchmarkReport: method " + method_name(m) + " not in report");
}

BenchmarkReport run_benchmark(const SyntheticConfig& cfg, std::size_t threads) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, cfg.n_datasets);

  BenchmarkReport report;
  report.config = cfg;
  report.trials.resize(cfg.n_datasets);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cfg.n_datasets && !failed;) {
      try {
        report.trials[i] = run_trial(cfg, i);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    std::size_t correct = 0;
    for (const auto& t : report.trials) correct += t.methods[mi].correct ? 1 : 0;
    report.summaries.push_back(summarize(cfg.methods[mi], correct, cfg.n_datasets));
  }
  for (const auto& t : report.trials) report.diverged_trials += t.diverged ? 1 : 0;
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

nlohmann::json benchmark_report_json(const BenchmarkReport& r) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["tool_version"] = kToolVersion;
  j["config"] = r.config.to_json();
  auto methods = nlohmann::json::array();
  for (const auto& s : r.summaries) {
    methods.push_back({{"method", method_name(s.method)},
                       {"errors", s.errors},
                       {"error_pct", s.error_pct},
                       {"stderr_pct", s.stderr_pct}});
  }
  j["methods"] = methods;
  j["diverged_trials"] = r.diverged_trials;
  auto trials = nlohmann::json::array();
  for (const auto& t : r.trials) {
    nlohmann::json tj = {{"trial", t.trial},
                         {"k", t.k},
                         {"test_accuracy", t.test_accuracy},
                         {"scored_points", t.scored_points},
                         {"diverged", t.diverged}};
    nlohmann::json argmaxes;
    for (const auto& m : t.methods) argmaxes[method_name(m.method)] = m.argmax_label;
    tj["argmax"] = argmaxes;
    trials.push_back(tj);
  }
  j["trials"] = trials;
  return j;
}

std::string benchmark_report_csv(const BenchmarkReport& r) {
  CsvWriter w({"method", "error_pct", "stderr_pct"});
  for (const auto& s : r.summaries) w.row({method_name(s.method), format_number(s.error_pct), format_number(s.stderr_pct)});
  return w.str();
}

NdArray band_signals(const Transform& t, const std::vector<BandSpec>& bands, const std::vector<std::size_t>& band_of_row,
                     double background_sigma, double band_sigma, SeededRng& rng) {
  const std::size_t n = raw_size(t), k = coefficient_count(t);
  NdArray X({band_of_row.size(), n});
  for (std::size_t r = 0; r < band_of_row.size(); ++r) {
    const Mask m = band_mask(t, bands.at(band_of_row[r]));
    NdArray s({k});
    for (std::size_t i = 0; i < k; ++i) s[i] = (m.entries[i] ? band_sigma : background_sigma) * rng.normal();
    const NdArray x = invert(t, {s, kind(t)});
    std::copy(x.data().begin(), x.data().end(), X.row(r).begin());
  }
  return X;
}

BandDemoResult band_demo(std::uint64_t seed, const BandDemoConfig& cfg) {
  const SeededRng root = SeededRng(seed).child("band_demo");
  const Transform t = make_dft1d(cfg.d);
  const auto bands = tile_bands(t, cfg.width);

  // Candidate bands are the full-width ones.
  std::vector<std::size_t> full;
  for (std::size_t b = 0; b < bands.size(); ++b) {
    if (bands[b].width() == cfg.width) full.push_back(b);
  }
  SeededRng pick = root.child("pick");
  const std::size_t injected = cfg.injected_band ? *cfg.injected_band : full[pick.uniform_index(full.size())];
  if (injected >= bands.size()) throw ContractError("band_demo: injected band out of range");

  SeededRng train_rng = root.child("train_data");
  std::vector<std::size_t> train_bands(cfg.n_train);
  for (auto& b : train_bands) b = full[train_rng.uniform_index(full.size())];
  const NdArray X = band_signals(t, bands, train_bands, cfg.background_sigma, cfg.band_sigma, train_rng);
  std::vector<double> y(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) y[r] = dot(X.row(r), X.row(r));

  MlpSpec spec;
  spec.layer_widths.push_back(cfg.d);
  spec.layer_widths.insert(spec.layer_widths.end(), cfg.hidden_widths.begin(), cfg.hidden_widths.end());
  spec.layer_widths.push_back(1);
  TrainConfig tc = cfg.train;
  tc.seed = root.child("train").seed();
  MlpModel model(spec, train(spec, X, y, tc).params);

  SeededRng test_rng = root.child("test_data");
  const NdArray Xt = band_signals(t, bands, std::vector<std::size_t>(cfg.n_test, injected), cfg.background_sigma,
                                  cfg.band_sigma, test_rng);

  BandDemoResult res{std::move(model), t, bands, injected, {}, {}, std::vector<double>(bands.size(), 0.0), 0};
  for (std::size_t r = 0; r < Xt.rows(); ++r) {
    const auto row = Xt.row(r);
    NdArray x = NdArray::vector({row.begin(), row.end()});
    BandCurve c = band_sweep(res.model, x, t, cfg.width);
    for (std::size_t b = 0; b < c.normalized.size(); ++b) res.mean_normalized[b] += c.normalized[b];
    res.curves.push_back(std::move(c));
    res.test_signals.push_back(std::move(x));
  }
  for (auto& v : res.mean_normalized) v /= static_cast<double>(Xt.rows());
  res.argmax_band = argmax(res.mean_normalized);
  return res;
}

}  // namespace trim

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trim/attribution.hpp"
#include "trim/mlp.hpp"
#include "trim/transforms.hpp"
#include "trim/trim.hpp"

namespace trim {

// ---------------------------------------------------------------------------
// Synthetic frequency-recovery benchmark
// ---------------------------------------------------------------------------

struct SyntheticDataset {
  NdArray X;                       // n x d, i.i.d. N(0, 1)
  std::vector<double> y;           // 1 if magnitude > median
  std::vector<double> magnitudes;  // |(Re_k, Im_k)| of the packed Dft1d coefficients
  std::size_t k = 0;               // target frequency, uniform on 1..d/2-1
};

SyntheticDataset generate_dataset(std::size_t d, std::size_t n, SeededRng& rng);

/// Where the per-trial model comes from.
enum class ModelSource {
  Trained,    // train the configured net on the dataset
  Oracle,     // analytic net computing the group-k magnitude, no training
  Untrained,  // He-initialized net, no training
};

std::string model_source_name(ModelSource s);
ModelSource parse_model_source(const std::string& name);

struct SyntheticConfig {
  std::size_t d = 32;
  std::size_t n_samples = 2000;
  double train_fraction = 0.8;
  std::size_t n_datasets = 100;
  std::vector<std::size_t> hidden_widths = {128, 128};
  TrainConfig train;
  std::vector<Method> methods = {Method::CD, Method::IG, Method::InputXGrad, Method::Shapley};
  std::uint64_t master_seed = 0;
  std::size_t max_scored_points = 50;
  std::size_t ig_steps = 64;
  std::size_t shapley_permutations = 500;
  ModelSource model_source = ModelSource::Trained;
  std::size_t oracle_directions = 16;

  MlpSpec net_spec() const;
  void validate() const;
  nlohmann::json to_json() const;
};

struct MethodOutcome {
  Method method;
  std::size_t argmax_label = 0;
  bool correct = false;
  GroupScores scores;  // averaged over the scored points
};

struct TrialOutcome {
  std::size_t trial = 0;
  std::size_t k = 0;
  double test_accuracy = 0.0;
  std::size_t scored_points = 0;
  bool diverged = false;
  std::vector<MethodOutcome> methods;
};

/// Everything depends only on (cfg, trial_index): the trial draws from the
/// child stream (master_seed, "trial", trial_index).
TrialOutcome run_trial(const SyntheticConfig& cfg, std::size_t trial_index);

struct MethodSummary {
  Method method;
  std::size_t errors = 0;
  double error_pct = 0.0;
  double stderr_pct = 0.0;
};

struct BenchmarkReport {
  SyntheticConfig config;
  std::vector<MethodSummary> summaries;
  std::vector<TrialOutcome> trials;
  std::size_t diverged_trials = 0;
  double runtime_seconds = 0.0;  // wall clock; not part of the JSON report

  const MethodSummary& summary(Method m) const;
};

/// Runs cfg.n_datasets trials on `threads` workers (0 = all cores). Results
/// are identical for any thread count.
BenchmarkReport run_benchmark(const SyntheticConfig& cfg, std::size_t threads = 1);

/// error = 100 (1 - p), stderr = 100 sqrt(p (1 - p) / n).
MethodSummary summarize(Method m, std::size_t correct, std::size_t trials);

inline constexpr const char* kToolVersion = "1.0.0";

nlohmann::json benchmark_report_json(const BenchmarkReport& r);
/// Columns method,error_pct,stderr_pct.
std::string benchmark_report_csv(const BenchmarkReport& r);

/// [d, M, M, 1] ReLU net whose logit is approx |(Re_k, Im_k)| - threshold.
/// Layer one projects onto M directions in the (Re_k, Im_k) plane; the sum of
/// their positive parts is rotation invariant up to a small ripple.
MlpModel make_oracle_model(std::size_t d, std::size_t k, std::size_t directions, double threshold);
/// The oracle's logit before the threshold is subtracted.
std::vector<double> oracle_magnitudes(const MlpModel& oracle, const NdArray& X);

// ---------------------------------------------------------------------------
// Band-importance demonstration
// ---------------------------------------------------------------------------

struct BandDemoConfig {
  std::size_t d = 64;
  std::size_t width = 8;
  std::size_t n_train = 2000;
  std::size_t n_test = 20;
  double background_sigma = 0.1;
  double band_sigma = 1.0;
  std::vector<std::size_t> hidden_widths = {64, 64};
  TrainConfig train = [] {
    TrainConfig t;
    t.epochs = 40;
    return t;
  }();
  std::optional<std::size_t> injected_band;  // drawn from the seed when unset
};

struct BandDemoResult {
  MlpModel model;
  Transform transform;
  std::vector<BandSpec> bands;
  std::size_t injected_band = 0;  // index into bands
  std::vector<NdArray> test_signals;
  std::vector<BandCurve> curves;
  std::vector<double> mean_normalized;
  std::size_t argmax_band = 0;
};

/// Signals whose energy sits in one band (coefficients ~ N(0, band_sigma^2)
/// there, N(0, background_sigma^2) elsewhere).
NdArray band_signals(const Transform& t, const std::vector<BandSpec>& bands, const std::vector<std::size_t>& band_of_row,
                     double background_sigma, double band_sigma, SeededRng& rng);

/// Trains a regressor for total signal energy on signals from every full
/// band, then sweeps bands with CD on test signals from the injected band.
BandDemoResult band_demo(std::uint64_t seed, const BandDemoConfig& cfg = {});

}  // namespace trim

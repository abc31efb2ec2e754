#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trim/ndarray.hpp"
#include "trim/rng.hpp"

namespace trim {

enum class OutputHead {
  Identity,  // regression, squared-error loss
  Logit,     // single logit, sigmoid cross-entropy loss
};

struct MlpSpec {
  std::vector<std::size_t> layer_widths;  // input first, output last
  OutputHead head = OutputHead::Identity;

  std::size_t input_width() const { return layer_widths.front(); }
  std::size_t output_width() const { return layer_widths.back(); }
  std::size_t layer_count() const { return layer_widths.size() - 1; }
  void validate() const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

struct DenseLayer {
  NdArray weight;  // out x in
  std::vector<double> bias;
};

struct MlpParams {
  std::vector<DenseLayer> layers;
};

/// Activations recorded by a forward pass. pre[l] holds the pre-activation of
/// layer l; act[0] is the input and act[l+1] = ReLU(pre[l]) for hidden layers.
struct ForwardCache {
  std::vector<NdArray> pre;
  std::vector<NdArray> act;
};

/// He initialization: W ~ N(0, 2/fan_in), zero biases.
MlpParams init_params(const MlpSpec& spec, SeededRng& rng);

/// A trained, immutable predictor. Hidden layers use ReLU; the returned output
/// is always the pre-head value (the logit for classification heads).
class MlpModel {
 public:
  MlpModel(MlpSpec spec, MlpParams params);

  const MlpSpec& spec() const noexcept { return spec_; }
  const MlpParams& params() const noexcept { return params_; }
  std::size_t input_width() const { return spec_.input_width(); }

  /// x is a single sample (rank 1) or a batch (rows = samples). Output has
  /// one row per sample.
  NdArray forward(const NdArray& x, ForwardCache* cache = nullptr) const;
  double predict(std::span<const double> x, std::size_t output_index = 0) const;

  /// d output[output_index] / d x for one sample. ReLU'(0) is taken as 0.
  NdArray grad_input(const NdArray& x, std::size_t output_index = 0) const;
  /// Row-wise input gradients for a batch, plus the outputs of each row.
  NdArray grad_input_batch(const NdArray& x, std::size_t output_index, NdArray* outputs = nullptr) const;

  /// W^T of layer l, cached at construction (in x out).
  const NdArray& weight_t(std::size_t l) const { return weights_t_[l]; }

 private:
  MlpSpec spec_;
  MlpParams params_;
  std::vector<NdArray> weights_t_;
};

enum class OptimizerKind { Adam, SgdMomentum };

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double momentum = 0.9;

  void validate() const;
};

struct TrainResult {
  MlpParams params;
  std::vector<double> loss_history;  // mean loss per epoch
};

/// Mean loss over the rows of X (logistic for Logit heads, squared error
/// otherwise) and its gradient with respect to every weight and bias.
struct LossGradients {
  double loss = 0.0;
  std::vector<double> sample_loss;
  std::vector<NdArray> weight;             // same shapes as the layer weights
  std::vector<std::vector<double>> bias;
};
LossGradients loss_gradients(const MlpModel& model, const NdArray& X, std::span<const double> y);

/// Minibatch training with seeded shuffling. Parameters are initialized from
/// cfg.seed; pass `initial` to start from given parameters instead.
TrainResult train(const MlpSpec& spec, const NdArray& X, std::span<const double> y, const TrainConfig& cfg,
                  const MlpParams* initial = nullptr);

double sigmoid(double z) noexcept;

/// Fraction of rows whose thresholded prediction matches the 0/1 label.
double classification_accuracy(const MlpModel& model, const NdArray& X, std::span<const double> y);

// Checkpoint serialization (format_version 1).
nlohmann::json model_to_json(const MlpModel& model);
MlpModel model_from_json(const nlohmann::json& j);
void save_model(const MlpModel& model, const std::string& path);
MlpModel load_model(const std::string& path);

}  // namespace trim

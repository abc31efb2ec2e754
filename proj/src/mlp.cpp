#include "trim/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "trim/error.hpp"

namespace trim {

void MlpSpec::validate() const {
  if (layer_widths.size() < 2) throw ContractError("MlpSpec: need at least input and output widths");
  for (auto w : layer_widths) {
    if (w == 0) throw ContractError("MlpSpec: layer widths must be positive");
  }
  if (head == OutputHead::Logit && output_width() != 1) {
    throw ContractError("MlpSpec: logit head requires a single output");
  }
}

MlpParams init_params(const MlpSpec& spec, SeededRng& rng) {
  spec.validate();
  MlpParams p;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::size_t in = spec.layer_widths[l], out = spec.layer_widths[l + 1];
    const double std = std::sqrt(2.0 / static_cast<double>(in));
    DenseLayer layer{NdArray({out, in}), std::vector<double>(out, 0.0)};
    for (auto& w : layer.weight.data()) w = std * rng.normal();
    p.layers.push_back(std::move(layer));
  }
  return p;
}

MlpModel::MlpModel(MlpSpec spec, MlpParams params) : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
  if (params_.layers.size() != spec_.layer_count()) throw DimensionError("MlpModel: layer count mismatch");
  for (std::size_t l = 0; l < spec_.layer_count(); ++l) {
    const auto& layer = params_.layers[l];
    const std::size_t in = spec_.layer_widths[l], out = spec_.layer_widths[l + 1];
    if (layer.weight.rank() != 2 || layer.weight.rows() != out || layer.weight.cols() != in ||
        layer.bias.size() != out) {
      throw DimensionError("MlpModel: layer " + std::to_string(l) + " shape does not match spec");
    }
    if (!layer.weight.all_finite()) throw ContractError("MlpModel: non-finite weight");
    weights_t_.push_back(transpose(layer.weight));
  }
}

namespace {

NdArray as_batch(const NdArray& x, std::size_t width) {
  if (x.cols() != width) {
    throw DimensionError("MlpModel: input width " + std::to_string(x.cols()) + " does not match model width " +
                         std::to_string(width));
  }
  if (x.rank() == 2) return x;
  return x.reshaped({1, width});
}

void add_bias(NdArray& z, const std::vector<double>& b) {
  const std::size_t n = z.cols();
  for (std::size_t r = 0; r < z.rows(); ++r) {
    double* row = z.data().data() + r * n;
    for (std::size_t j = 0; j < n; ++j) row[j] += b[j];
  }
}

NdArray relu(const NdArray& z) {
  NdArray a = z;
  for (auto& v : a.data()) v = v > 0.0 ? v : 0.0;
  return a;
}

}  // namespace

NdArray MlpModel::forward(const NdArray& x, ForwardCache* cache) const {
  NdArray a = as_batch(x, input_width());
  if (cache) {
    cache->pre.clear();
    cache->act.clear();
    cache->act.push_back(a);
  }
  const std::size_t L = spec_.layer_count();
  for (std::size_t l = 0; l < L; ++l) {
    NdArray z = matmul(a, weights_t_[l]);
    add_bias(z, params_.layers[l].bias);
    if (l + 1 < L) {
      a = relu(z);
      if (cache) {
        cache->pre.push_back(std::move(z));
        cache->act.push_back(a);
      }
    } else {
      if (cache) cache->pre.push_back(z);
      a = std::move(z);
    }
  }
  return a;
}

double MlpModel::predict(std::span<const double> x, std::size_t output_index) const {
  const auto out = forward(NdArray::vector(std::vector<double>(x.begin(), x.end())));
  if (output_index >= out.cols()) throw ContractError("predict: output_index out of range");
  return out[output_index];
}

NdArray MlpModel::grad_input_batch(const NdArray& x, std::size_t output_index, NdArray* outputs) const {
  if (output_index >= spec_.output_width()) throw ContractError("grad_input: output_index out of range");
  ForwardCache cache;
  NdArray out = forward(x, &cache);
  const std::size_t B = out.rows();
  NdArray delta({B, spec_.output_width()});
  for (std::size_t r = 0; r < B; ++r) delta(r, output_index) = 1.0;
  for (std::size_t l = spec_.layer_count(); l-- > 0;) {
    delta = matmul(delta, params_.layers[l].weight);
    if (l > 0) {
      const auto& pre = cache.pre[l - 1].data();
      auto& d = delta.data();
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (!(pre[i] > 0.0)) d[i] = 0.0;
      }
    }
  }
  if (outputs) *outputs = std::move(out);
  return delta;
}

NdArray MlpModel::grad_input(const NdArray& x, std::size_t output_index) const {
  if (x.rows() != 1) throw DimensionError("grad_input: expects a single sample");
  return grad_input_batch(x, output_index).reshaped({input_width()});
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ContractError("TrainConfig: learning_rate must be >= 0");
  if (epochs < 1) throw ContractError("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) throw ContractError("TrainConfig: batch_size must be >= 1");
}

double sigmoid(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

struct OptimizerState {
  std::vector<std::vector<double>> m, v;
  std::size_t t = 0;
};

// Flattened parameter views: layer l contributes weight then bias.
std::vector<std::vector<double>*> parameter_blocks(MlpParams& p) {
  std::vector<std::vector<double>*> blocks;
  for (auto& layer : p.layers) {
    blocks.push_back(&layer.weight.data());
    blocks.push_back(&layer.bias);
  }
  return blocks;
}

}  // namespace

LossGradients loss_gradients(const MlpModel& model, const NdArray& X, std::span<const double> y) {
  const MlpSpec& spec = model.spec();
  if (spec.output_width() != 1) throw ContractError("loss_gradients: only single-output models are supported");
  if (X.rank() != 2 || X.rows() != y.size()) throw DimensionError("loss_gradients: rows(X) != len(y)");
  const std::size_t B = X.rows(), L = spec.layer_count();
  ForwardCache cache;
  const NdArray out = model.forward(X, &cache);

  LossGradients res;
  res.sample_loss.resize(B);
  NdArray delta({B, 1});
  for (std::size_t r = 0; r < B; ++r) {
    const double z = out[r], t = y[r];
    double g;
    if (spec.head == OutputHead::Logit) {
      res.sample_loss[r] = std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
      g = sigmoid(z) - t;
    } else {
      res.sample_loss[r] = (z - t) * (z - t);
      g = 2.0 * (z - t);
    }
    delta[r] = g / static_cast<double>(B);
  }
  res.loss = sum(res.sample_loss) / static_cast<double>(B);

  res.weight.resize(L);
  res.bias.resize(L);
  for (std::size_t l = L; l-- > 0;) {
    res.weight[l] = matmul(transpose(delta), cache.act[l]);
    res.bias[l].assign(delta.cols(), 0.0);
    for (std::size_t r = 0; r < B; ++r)
      for (std::size_t j = 0; j < delta.cols(); ++j) res.bias[l][j] += delta(r, j);
    if (l > 0) {
      delta = matmul(delta, model.params().layers[l].weight);
      const auto& pre = cache.pre[l - 1].data();
      auto& dd = delta.data();
      for (std::size_t i = 0; i < dd.size(); ++i) {
        if (!(pre[i] > 0.0)) dd[i] = 0.0;
      }
    }
  }
  return res;
}

TrainResult train(const MlpSpec& spec, const NdArray& X, std::span<const double> y, const TrainConfig& cfg,
                  const MlpParams* initial) {
  spec.validate();
  cfg.validate();
  if (spec.output_width() != 1) throw ContractError("train: only single-output models are supported");
  if (X.rank() != 2 || X.cols() != spec.input_width()) throw DimensionError("train: X width does not match spec");
  if (X.rows() != y.size()) throw DimensionError("train: rows(X) != len(y)");
  if (!X.all_finite() || !std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); })) {
    throw ContractError("train: inputs and targets must be finite");
  }
  if (spec.head == OutputHead::Logit) {
    for (double v : y) {
      if (v != 0.0 && v != 1.0) throw ContractError("train: classification labels must be 0 or 1");
    }
  }

  SeededRng rng(cfg.seed);
  SeededRng init_rng = rng.child("init");
  SeededRng shuffle_rng = rng.child("shuffle");

  TrainResult result;
  result.params = initial ? *initial : init_params(spec, init_rng);

  const std::size_t n = X.rows(), d = X.cols();
  OptimizerState opt;
  for (auto* block : parameter_blocks(result.params)) {
    opt.m.emplace_back(block->size(), 0.0);
    opt.v.emplace_back(block->size(), 0.0);
  }

  std::vector<std::size_t> order(n);
  std::vector<double> sample_loss(n, 0.0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order);

    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t B = std::min(cfg.batch_size, n - start);
      NdArray xb({B, d});
      for (std::size_t r = 0; r < B; ++r) {
        const auto src = X.row(order[start + r]);
        std::copy(src.begin(), src.end(), xb.row(r).begin());
      }
      std::vector<double> yb(B);
      for (std::size_t r = 0; r < B; ++r) yb[r] = y[order[start + r]];
      const LossGradients lg = loss_gradients(MlpModel(spec, result.params), xb, yb);
      for (std::size_t r = 0; r < B; ++r) {
        if (!std::isfinite(lg.sample_loss[r])) {
          throw DivergenceError("train: loss diverged in epoch " + std::to_string(epoch), epoch);
        }
        sample_loss[order[start + r]] = lg.sample_loss[r];
      }
      const auto& grad_w = lg.weight;
      const auto& grad_b = lg.bias;

      ++opt.t;
      auto blocks = parameter_blocks(result.params);
      for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        auto& param = *blocks[bi];
        const auto& grad = (bi % 2 == 0) ? grad_w[bi / 2].data() : grad_b[bi / 2];
        auto& m = opt.m[bi];
        auto& v = opt.v[bi];
        if (cfg.optimizer == OptimizerKind::Adam) {
          const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.t));
          const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.t));
          for (std::size_t i = 0; i < param.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            param[i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.epsilon);
          }
        } else {
          for (std::size_t i = 0; i < param.size(); ++i) {
            m[i] = cfg.momentum * m[i] + grad[i];
            param[i] -= cfg.learning_rate * m[i];
          }
        }
        if (!std::all_of(param.begin(), param.end(), [](double v) { return std::isfinite(v); })) {
          throw DivergenceError("train: parameters diverged in epoch " + std::to_string(epoch), epoch);
        }
      }
    }

    const double epoch_loss = sum(sample_loss) / static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) throw DivergenceError("train: loss diverged in epoch " + std::to_string(epoch), epoch);
    result.loss_history.push_back(epoch_loss);
  }
  return result;
}

double classification_accuracy(const MlpModel& model, const NdArray& X, std::span<const double> y) {
  const NdArray out = model.forward(X);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const double pred = out[r] > 0.0 ? 1.0 : 0.0;
    if (pred == y[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(out.rows());
}

nlohmann::json model_to_json(const MlpModel& model) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["spec"] = {{"layer_widths", model.spec().layer_widths},
               {"hidden_activation", "relu"},
               {"output_head", model.spec().head == OutputHead::Logit ? "logit" : "identity"}};
  auto layers = nlohmann::json::array();
  for (const auto& layer : model.params().layers) {
    auto rows = nlohmann::json::array();
    for (std::size_t r = 0; r < layer.weight.rows(); ++r) {
      const auto row = layer.weight.row(r);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    layers.push_back({{"weights", rows}, {"bias", layer.bias}});
  }
  j["layers"] = layers;
  return j;
}

MlpModel model_from_json(const nlohmann::json& j) {
  if (j.value("format_version", 0) != 1) throw ContractError("model checkpoint: unsupported format_version");
  MlpSpec spec;
  spec.layer_widths = j.at("spec").at("layer_widths").get<std::vector<std::size_t>>();
  const auto head = j.at("spec").value("output_head", "identity");
  if (head == "logit") {
    spec.head = OutputHead::Logit;
  } else if (head == "identity") {
    spec.head = OutputHead::Identity;
  } else {
    throw ContractError("model checkpoint: unknown output_head '" + head + "'");
  }
  spec.validate();
  MlpParams params;
  for (const auto& lj : j.at("layers")) {
    const auto rows = lj.at("weights").get<std::vector<std::vector<double>>>();
    if (rows.empty()) throw DimensionError("model checkpoint: empty weight matrix");
    std::vector<double> flat;
    for (const auto& r : rows) {
      if (r.size() != rows.front().size()) throw DimensionError("model checkpoint: ragged weight matrix");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    params.layers.push_back(
        {NdArray::matrix(rows.size(), rows.front().size(), std::move(flat)), lj.at("bias").get<std::vector<double>>()});
  }
  return MlpModel(std::move(spec), std::move(params));
}

void save_model(const MlpModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model checkpoint: " + path);
  out << model_to_json(model).dump(1) << '\n';
}

MlpModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model checkpoint: " + path);
  try {
    return model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed model checkpoint " + path + ": " + e.what());
  }
}

}  // namespace trim

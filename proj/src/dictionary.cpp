#include "trim/dictionary.hpp"

#include <cmath>

#include "trim/error.hpp"

namespace trim {

void DictionaryConfig::validate() const {
  if (atoms < 1) throw ContractError("DictionaryConfig: atoms must be >= 1");
  if (lambda_sparse < 0.0 || lambda_recon < 0.0 || lambda_trim < 0.0) {
    throw ContractError("DictionaryConfig: penalty weights must be >= 0");
  }
  if (!(learning_rate >= 0.0)) throw ContractError("DictionaryConfig: learning_rate must be >= 0");
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

struct StepState {
  NdArray coeffs;  // N x k
  NdArray error;   // N x n
  NdArray gain;    // N x k, gradient factor of the TRIM scores (empty without a model)
  DictionaryLoss loss;
};

StepState evaluate(const LinearDictionary& dict, const NdArray& X, const DictionaryConfig& cfg,
                   const NdArray* raw_grads) {
  const double N = static_cast<double>(X.rows());
  StepState st;
  st.coeffs = matmul(X, transpose(dict.analysis));
  const NdArray recon = matmul(st.coeffs, transpose(dict.synthesis));
  st.error = X;
  for (std::size_t i = 0; i < st.error.size(); ++i) st.error[i] -= recon[i];

  double l1 = 0.0, sq = 0.0, tr = 0.0;
  for (double c : st.coeffs.data()) l1 += std::abs(c);
  for (double e : st.error.data()) sq += e * e;
  if (raw_grads) {
    st.gain = matmul(*raw_grads, dict.synthesis);
    for (std::size_t i = 0; i < st.gain.size(); ++i) tr += std::abs(st.coeffs[i] * st.gain[i]);
  }
  st.loss.sparsity = l1 / N;
  st.loss.reconstruction = sq / N;
  st.loss.trim = tr / N;
  st.loss.total = cfg.lambda_sparse * st.loss.sparsity + cfg.lambda_recon * st.loss.reconstruction +
                  cfg.lambda_trim * st.loss.trim;
  return st;
}

NdArray input_gradients(const MlpModel& model, const NdArray& X) { return model.grad_input_batch(X, 0); }

}  // namespace

DictionaryLoss dictionary_loss(const LinearDictionary& dict, const NdArray& X, const DictionaryConfig& cfg,
                               const MlpModel* model) {
  if (model) {
    const NdArray grads = input_gradients(*model, X);
    return evaluate(dict, X, cfg, &grads).loss;
  }
  return evaluate(dict, X, cfg, nullptr).loss;
}

DictionaryResult learn_dictionary(const NdArray& X, const DictionaryConfig& cfg, const MlpModel* model,
                                  SeededRng& rng) {
  cfg.validate();
  if (X.rank() != 2) throw DimensionError("learn_dictionary: X must be samples x n");
  if (cfg.lambda_trim > 0.0 && model == nullptr) throw ContractError("learn_dictionary: lambda_trim > 0 requires a model");
  if (model && model->input_width() != X.cols()) throw DimensionError("learn_dictionary: model width does not match X");

  const std::size_t n = X.cols(), k = cfg.atoms;
  const double N = static_cast<double>(X.rows());

  LinearDictionary dict;
  if (cfg.init == DictionaryInit::Identity) {
    if (k != n) throw ContractError("learn_dictionary: identity init requires atoms == n");
    dict = {NdArray::identity(n), NdArray::identity(n)};
  } else {
    NdArray analysis({k, n});
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (auto& v : analysis.data()) v = scale * rng.normal();
    dict = std::get<LinearDictionary>(make_dictionary(std::move(analysis)));
  }

  std::optional<NdArray> raw_grads;
  if (model && cfg.lambda_trim > 0.0) raw_grads = input_gradients(*model, X);

  DictionaryResult result;
  for (std::size_t step = 0;; ++step) {
    StepState st = evaluate(dict, X, cfg, raw_grads ? &*raw_grads : nullptr);
    if (!std::isfinite(st.loss.total)) throw DivergenceError("learn_dictionary: loss diverged", step);
    result.history.push_back(st.loss);
    if (step == cfg.steps) break;

    // d/dS of lambda_recon |x - S c|^2 is -2 lambda_recon e c^T.
    NdArray grad_s = matmul(transpose(st.error), st.coeffs);
    for (auto& v : grad_s.data()) v *= -2.0 * cfg.lambda_recon / N;

    // Per-sample gradient with respect to the coefficients c = A x.
    NdArray dc = matmul(st.error, dict.synthesis);
    for (std::size_t i = 0; i < dc.size(); ++i) {
      double g = -2.0 * cfg.lambda_recon * dc[i] + cfg.lambda_sparse * sign(st.coeffs[i]);
      if (raw_grads) g += cfg.lambda_trim * sign(st.coeffs[i] * st.gain[i]) * st.gain[i];
      dc[i] = g / N;
    }
    const NdArray grad_a = matmul(transpose(dc), X);

    for (std::size_t i = 0; i < dict.analysis.size(); ++i) dict.analysis[i] -= cfg.learning_rate * grad_a[i];
    for (std::size_t i = 0; i < dict.synthesis.size(); ++i) dict.synthesis[i] -= cfg.learning_rate * grad_s[i];
  }
  result.dictionary = std::move(dict);
  return result;
}

SparseFixture make_sparse_fixture(std::size_t samples, std::size_t n, std::size_t atoms, std::size_t active,
                                  SeededRng& rng) {
  if (active > atoms) throw ContractError("make_sparse_fixture: active > atoms");
  NdArray gen({n, atoms});
  for (auto& v : gen.data()) v = rng.normal();
  for (std::size_t a = 0; a < atoms; ++a) {
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += gen(i, a) * gen(i, a);
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) gen(i, a) /= norm;
  }
  NdArray X({samples, n});
  std::vector<std::size_t> idx(atoms);
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t a = 0; a < atoms; ++a) idx[a] = a;
    rng.shuffle(idx);
    for (std::size_t j = 0; j < active; ++j) {
      const double c = rng.normal();
      for (std::size_t i = 0; i < n; ++i) X(s, i) += c * gen(i, idx[j]);
    }
  }
  return {std::move(X), std::move(gen)};
}

nlohmann::json dictionary_to_json(const LinearDictionary& dict, const DictionaryConfig& cfg, std::uint64_t seed) {
  nlohmann::json j = transform_to_json(dict);
  j["format_version"] = 1;
  j["metadata"] = {{"k", dict.analysis.rows()},
                   {"n", dict.analysis.cols()},
                   {"lambda_sparse", cfg.lambda_sparse},
                   {"lambda_recon", cfg.lambda_recon},
                   {"lambda_trim", cfg.lambda_trim},
                   {"learning_rate", cfg.learning_rate},
                   {"seed", seed},
                   {"steps", cfg.steps}};
  return j;
}

LinearDictionary dictionary_from_json(const nlohmann::json& j) {
  const Transform t = transform_from_json(j);
  const auto* dict = std::get_if<LinearDictionary>(&t);
  if (!dict) throw ContractError("dictionary checkpoint: kind must be linear_dictionary");
  return *dict;
}

}  // namespace trim

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trim/mlp.hpp"
#include "trim/ndarray.hpp"
#include "trim/rng.hpp"
#include "trim/transforms.hpp"

namespace trim {

enum class DictionaryInit {
  Identity,  // analysis = synthesis = I, requires atoms == n
  Random,    // analysis ~ N(0, 1/n), synthesis = pinv(analysis)
};

struct DictionaryConfig {
  std::size_t atoms = 8;
  double lambda_sparse = 0.0;
  double lambda_recon = 1.0;
  double lambda_trim = 0.0;
  std::size_t steps = 500;
  double learning_rate = 0.05;
  DictionaryInit init = DictionaryInit::Random;

  void validate() const;
};

/// Loss terms evaluated at a given dictionary, averaged over samples.
struct DictionaryLoss {
  double sparsity = 0.0;        // mean |analysis x|_1
  double reconstruction = 0.0;  // mean |x - synthesis analysis x|^2
  double trim = 0.0;            // mean |input x gradient scores|_1
  double total = 0.0;           // weighted sum
};

struct DictionaryResult {
  LinearDictionary dictionary;
  /// Entry i is evaluated before update i; the last entry is the final state,
  /// so there are steps + 1 entries.
  std::vector<DictionaryLoss> history;
};

DictionaryLoss dictionary_loss(const LinearDictionary& dict, const NdArray& X, const DictionaryConfig& cfg,
                               const MlpModel* model = nullptr);

/// Gradient descent on (analysis, synthesis) for
///   lambda_sparse |A x|_1 + lambda_recon |x - S A x|^2 + lambda_trim |TRIM(x)|_1
/// averaged over the rows of X. TRIM scores are input-times-gradient in
/// coefficient space, (A x) * (S^T grad f(x)), with the gradient factor held
/// constant within a step.
DictionaryResult learn_dictionary(const NdArray& X, const DictionaryConfig& cfg, const MlpModel* model,
                                  SeededRng& rng);

struct SparseFixture {
  NdArray X;           // samples x n
  NdArray generators;  // n x atoms, unit-norm columns
};

/// Samples that are sparse combinations of a random unit-norm dictionary.
SparseFixture make_sparse_fixture(std::size_t samples, std::size_t n, std::size_t atoms, std::size_t active,
                                  SeededRng& rng);

nlohmann::json dictionary_to_json(const LinearDictionary& dict, const DictionaryConfig& cfg, std::uint64_t seed);
LinearDictionary dictionary_from_json(const nlohmann::json& j);

}  // namespace trim

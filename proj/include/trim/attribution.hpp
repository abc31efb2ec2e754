#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "trim/mlp.hpp"
#include "trim/ndarray.hpp"

namespace trim {

/// A scalar function of a vector that can be evaluated and differentiated in
/// batches (rows = points). Attribution backends other than CD only need this.
class ScalarFunction {
 public:
  virtual ~ScalarFunction() = default;
  virtual std::size_t input_width() const = 0;
  virtual std::vector<double> values(const NdArray& points) const = 0;
  /// Row-wise gradients; fills `values` when non-null.
  virtual NdArray gradients(const NdArray& points, std::vector<double>* values) const = 0;

  double value(const NdArray& x) const;
};

/// One output of an MLP (the logit for classification heads).
class MlpFunction final : public ScalarFunction {
 public:
  explicit MlpFunction(const MlpModel& model, std::size_t output_index = 0);
  std::size_t input_width() const override { return model_.input_width(); }
  std::vector<double> values(const NdArray& points) const override;
  NdArray gradients(const NdArray& points, std::vector<double>* values) const override;

 private:
  const MlpModel& model_;
  std::size_t output_index_;
};

enum class Method { CD, IG, InputXGrad, Shapley };

std::string method_name(Method m);
Method parse_method(const std::string& name);

struct Decomposition {
  NdArray relevant;    // beta
  NdArray irrelevant;  // gamma
};

struct CdOutput {
  double beta_out;
  double gamma_out;
};

/// Below this magnitude both parts count as zero and the bias splits evenly.
inline constexpr double kCdTieThreshold = 1e-12;

/// Contextual decomposition through an MLP. Linear layers route the bias in
/// proportion to |W beta| and |W gamma|; ReLU layers keep ReLU(beta) relevant
/// and give the remainder ReLU(beta + gamma) - ReLU(beta) to gamma.
CdOutput cd_forward(const MlpModel& model, const Decomposition& d, std::size_t output_index = 0);
/// Row-wise CD for a batch of decompositions.
std::vector<CdOutput> cd_forward_batch(const MlpModel& model, const NdArray& relevant, const NdArray& irrelevant,
                                       std::size_t output_index = 0);

struct AttributionResult {
  Method method = Method::CD;
  std::vector<double> scores;           // per coordinate, or per group for Shapley
  std::vector<double> standard_errors;  // sampled Shapley only
  double score = 0.0;                   // attribution of the selected features
  double completeness_gap = 0.0;
  double baseline_output = 0.0;
  double output = 0.0;
};

/// Midpoint Riemann sum over `steps` points on the straight path from
/// baseline to x.
AttributionResult integrated_gradients(const ScalarFunction& f, const NdArray& x, const NdArray& baseline,
                                       std::size_t steps);

/// (x - baseline) * grad f(x). For ReLU networks this is the DeepLIFT rescale
/// attribution whenever x and the baseline share an activation pattern.
AttributionResult input_x_gradient(const ScalarFunction& f, const NdArray& x, const NdArray& baseline);

struct ShapleyConfig {
  enum class Mode { Exact, Sampled };
  Mode mode = Mode::Sampled;
  std::size_t permutations = 500;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kMaxExactShapleyGroups = 15;

/// Baseline Shapley values over a partition of the coordinates. The value of
/// a coalition is f evaluated with every coordinate outside it set to the
/// baseline. Sampled mode averages marginal contributions over seeded uniform
/// permutations; permutation p is drawn from the child stream p.
AttributionResult shapley(const ScalarFunction& f, const NdArray& x, const std::vector<std::vector<std::size_t>>& groups,
                          const NdArray& baseline, const ShapleyConfig& cfg);

/// Singleton partition {0}, {1}, ..., {n-1}.
std::vector<std::vector<std::size_t>> singleton_groups(std::size_t n);

}  // namespace trim

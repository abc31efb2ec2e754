#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trim/attribution.hpp"
#include "trim/error.hpp"
#include "trim/mlp.hpp"
#include "trim/transforms.hpp"

namespace trim {

/// The model seen through a transform: s -> f(T^-1(s) + r). The residual r
/// is fixed at construction, so f'(T(x)) == f(x) even when T is not
/// invertible.
class ReparametrizedFunction final : public ScalarFunction {
 public:
  ReparametrizedFunction(const MlpModel& model, const Transform& transform, NdArray residual,
                         std::size_t output_index = 0);

  std::size_t input_width() const override { return coefficient_count(transform_); }
  std::vector<double> values(const NdArray& points) const override;
  NdArray gradients(const NdArray& points, std::vector<double>* values) const override;

  /// Raw-space inputs for a batch of coefficient rows.
  NdArray to_raw(const NdArray& points) const;

 private:
  const MlpModel& model_;
  const Transform& transform_;
  NdArray residual_;
  std::size_t output_index_;
  // Rows are T^-1 of the unit coefficient vectors (k x n); only built when
  // k * n <= kDenseSynthesisLimit, otherwise rows are inverted one by one.
  NdArray synthesis_;
  NdArray synthesis_t_;
};

inline constexpr std::size_t kDenseSynthesisLimit = std::size_t{1} << 18;

struct MethodConfig {
  Method method = Method::CD;
  std::size_t ig_steps = 256;
  ShapleyConfig shapley;
};

struct TrimQuery {
  Transform transform;
  Mask mask;
  MethodConfig method;
};

/// Attribution of the masked transformed features s = M * T(x).
///
/// CD: beta = T^-1(M * T(x)), gamma = x - beta (any residual therefore lands
/// in gamma); score is the relevant output of cd_forward.
/// IG / input x gradient / Shapley: attribute f' over coefficients, using as
/// baseline the coefficients with masked entries zeroed; score sums the
/// attributions of masked coefficients (masked groups for Shapley).
AttributionResult trim_score(const MlpModel& model, const NdArray& x, const TrimQuery& q);

struct GroupScores {
  std::vector<std::size_t> labels;
  std::vector<double> scores;
  double prediction = 0.0;
  std::size_t argmax_label = 0;
};

/// One score per coefficient group. CD, IG and input x gradient score each
/// group with its own singleton mask. Shapley plays a single game over all
/// groups against the all-zero coefficient baseline, since with a per-group
/// masked baseline every other group is a null player.
GroupScores group_scores(const MlpModel& model, const NdArray& x, const Transform& transform,
                         const MethodConfig& method);

/// Index of the largest score (first on ties).
std::size_t argmax(const std::vector<double>& v);

struct BandCurve {
  std::vector<BandSpec> bands;
  std::vector<double> centers;
  std::vector<double> scores;
  std::vector<double> normalized;  // scores / prediction, signed
  double prediction = 0.0;
};

/// Thrown by band_sweep when the prediction is exactly zero; carries the
/// unnormalized curve.
class BandNormalizationError : public NormalizationError {
 public:
  explicit BandNormalizationError(BandCurve raw)
      : NormalizationError("band_sweep: prediction is zero, cannot normalize"), curve(std::move(raw)) {}
  BandCurve curve;
};

/// Consecutive bands of `width` labels covering [0, max label]; the last band
/// may be shorter.
std::vector<BandSpec> tile_bands(const Transform& transform, std::size_t width);

BandCurve band_sweep(const MlpModel& model, const NdArray& x, const Transform& transform, std::size_t width,
                     const MethodConfig& method = {});

// CSV with columns index,label,score,normalized_score.
std::string group_scores_csv(const GroupScores& g);
std::string band_curve_csv(const BandCurve& c);
nlohmann::json group_scores_json(const GroupScores& g, const nlohmann::json& metadata);
nlohmann::json band_curve_json(const BandCurve& c, const nlohmann::json& metadata);
nlohmann::json method_config_json(const MethodConfig& m);

}  // namespace trim

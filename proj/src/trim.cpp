#include "trim/trim.hpp"

#include <cmath>
#include <sstream>

#include "trim/csv.hpp"

namespace trim {

ReparametrizedFunction::ReparametrizedFunction(const MlpModel& model, const Transform& transform, NdArray residual,
                                               std::size_t output_index)
    : model_(model), transform_(transform), residual_(std::move(residual)), output_index_(output_index) {
  if (model.input_width() != raw_size(transform)) {
    throw DimensionError("model input width " + std::to_string(model.input_width()) +
                         " does not match transform raw size " + std::to_string(raw_size(transform)));
  }
  if (residual_.size() != raw_size(transform)) throw DimensionError("residual length does not match transform");
  const std::size_t n = raw_size(transform), k = coefficient_count(transform);
  if (n * k <= kDenseSynthesisLimit) {
    synthesis_ = NdArray({k, n});
    for (std::size_t c = 0; c < k; ++c) {
      NdArray e({k});
      e[c] = 1.0;
      const NdArray col = invert(transform, {e, kind(transform)});
      std::copy(col.data().begin(), col.data().end(), synthesis_.row(c).begin());
    }
    synthesis_t_ = transpose(synthesis_);
  }
}

NdArray ReparametrizedFunction::to_raw(const NdArray& points) const {
  const std::size_t rows = points.rows(), n = raw_size(transform_), k = coefficient_count(transform_);
  if (points.cols() != k) throw DimensionError("ReparametrizedFunction: coefficient count mismatch");
  if (synthesis_.size() != 0) {
    NdArray raw = matmul(points.rank() == 2 ? points : points.reshaped({1, k}), synthesis_);
    for (std::size_t r = 0; r < rows; ++r) {
      auto out = raw.row(r);
      for (std::size_t i = 0; i < n; ++i) out[i] += residual_[i];
    }
    return raw;
  }
  NdArray raw({rows, n});
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = points.row(r);
    const NdArray x = invert(transform_, {NdArray::vector({row.begin(), row.end()}), kind(transform_)});
    auto out = raw.row(r);
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + residual_[i];
  }
  return raw;
}

std::vector<double> ReparametrizedFunction::values(const NdArray& points) const {
  const NdArray out = model_.forward(to_raw(points));
  std::vector<double> v(out.rows());
  for (std::size_t r = 0; r < out.rows(); ++r) v[r] = out(r, output_index_);
  return v;
}

NdArray ReparametrizedFunction::gradients(const NdArray& points, std::vector<double>* values) const {
  NdArray out;
  const NdArray g = model_.grad_input_batch(to_raw(points), output_index_, values ? &out : nullptr);
  const std::size_t k = coefficient_count(transform_);
  if (values) {
    values->resize(out.rows());
    for (std::size_t r = 0; r < out.rows(); ++r) (*values)[r] = out(r, output_index_);
  }
  if (synthesis_.size() != 0) return matmul(g, synthesis_t_);
  NdArray gs({g.rows(), k});
  for (std::size_t r = 0; r < g.rows(); ++r) {
    const auto row = g.row(r);
    const NdArray pulled = invert_adjoint(transform_, NdArray::vector({row.begin(), row.end()}));
    std::copy(pulled.data().begin(), pulled.data().end(), gs.row(r).begin());
  }
  return gs;
}

namespace {

std::vector<std::vector<std::size_t>> index_groups(const std::vector<FrequencyGroup>& groups) {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(groups.size());
  for (const auto& g : groups) out.push_back(g.coefficient_indices);
  return out;
}

void check_query(const MlpModel& model, const NdArray& x, const Transform& t) {
  if (model.input_width() != raw_size(t)) {
    throw DimensionError("model input width " + std::to_string(model.input_width()) +
                         " does not match transform raw size " + std::to_string(raw_size(t)));
  }
  if (x.size() != raw_size(t)) throw DimensionError("input length does not match transform raw size");
}

}  // namespace

AttributionResult trim_score(const MlpModel& model, const NdArray& x, const TrimQuery& q) {
  check_query(model, x, q.transform);
  validate_mask(q.transform, q.mask);
  const NdArray xf = x.reshaped({x.size()});
  const CoefficientVector s = trim::apply(q.transform, xf);
  const NdArray masked = q.mask.apply(s.values);

  if (q.method.method == Method::CD) {
    const NdArray beta = invert(q.transform, {masked, s.layout});
    NdArray gamma = xf;
    for (std::size_t i = 0; i < gamma.size(); ++i) gamma[i] -= beta[i];
    const CdOutput cd = cd_forward(model, {beta, gamma});
    AttributionResult res;
    res.method = Method::CD;
    res.scores = {cd.beta_out};
    res.score = cd.beta_out;
    res.output = model.predict(xf.values());
    res.baseline_output = cd.gamma_out;
    res.completeness_gap = std::abs(cd.beta_out + cd.gamma_out - res.output);
    return res;
  }

  const ReparametrizedFunction fprime(model, q.transform, residual(q.transform, xf));
  const NdArray baseline = q.mask.complement().apply(s.values);
  AttributionResult res;
  switch (q.method.method) {
    case Method::IG: res = integrated_gradients(fprime, s.values, baseline, q.method.ig_steps); break;
    case Method::InputXGrad: res = input_x_gradient(fprime, s.values, baseline); break;
    case Method::Shapley: {
      const auto groups = coefficient_groups(q.transform);
      res = shapley(fprime, s.values, index_groups(groups), baseline, q.method.shapley);
      double total = 0.0;
      for (std::size_t g = 0; g < groups.size(); ++g) {
        if (q.mask.entries[groups[g].coefficient_indices.front()]) total += res.scores[g];
      }
      res.score = total;
      return res;
    }
    case Method::CD: break;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < res.scores.size(); ++i) {
    if (q.mask.entries[i]) total += res.scores[i];
  }
  res.score = total;
  return res;
}

std::size_t argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

GroupScores group_scores(const MlpModel& model, const NdArray& x, const Transform& transform,
                         const MethodConfig& method) {
  check_query(model, x, transform);
  const auto groups = coefficient_groups(transform);
  GroupScores out;
  out.prediction = model.predict(x.values());
  for (const auto& g : groups) out.labels.push_back(g.label);

  if (method.method == Method::Shapley) {
    const NdArray xf = x.reshaped({x.size()});
    const CoefficientVector s = trim::apply(transform, xf);
    const ReparametrizedFunction fprime(model, transform, residual(transform, xf));
    const NdArray zero({s.values.size()});
    out.scores = shapley(fprime, s.values, index_groups(groups), zero, method.shapley).scores;
  } else if (method.method == Method::CD) {
    // Same decomposition as trim_score, batched over groups.
    const NdArray xf = x.reshaped({x.size()});
    const CoefficientVector s = trim::apply(transform, xf);
    const std::size_t n = xf.size();
    NdArray beta({groups.size(), n}), gamma({groups.size(), n});
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const NdArray b = invert(transform, {group_mask(transform, groups, g).apply(s.values), s.layout});
      for (std::size_t i = 0; i < n; ++i) {
        beta(g, i) = b[i];
        gamma(g, i) = xf[i] - b[i];
      }
    }
    for (const auto& cd : cd_forward_batch(model, beta, gamma)) out.scores.push_back(cd.beta_out);
  } else {
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const TrimQuery q{transform, group_mask(transform, groups, g), method};
      out.scores.push_back(trim_score(model, x, q).score);
    }
  }
  out.argmax_label = out.labels[argmax(out.scores)];
  return out;
}

std::vector<BandSpec> tile_bands(const Transform& transform, std::size_t width) {
  if (width < 1) throw ContractError("band width must be >= 1");
  const std::size_t limit = max_frequency_label(transform) + 1;
  std::vector<BandSpec> bands;
  for (std::size_t lo = 0; lo < limit; lo += width) bands.push_back({lo, std::min(lo + width, limit)});
  return bands;
}

BandCurve band_sweep(const MlpModel& model, const NdArray& x, const Transform& transform, std::size_t width,
                     const MethodConfig& method) {
  check_query(model, x, transform);
  BandCurve curve;
  curve.bands = tile_bands(transform, width);
  curve.prediction = model.predict(x.values());
  for (const auto& b : curve.bands) {
    curve.centers.push_back(0.5 * static_cast<double>(b.lo + b.hi - 1));
    const TrimQuery q{transform, band_mask(transform, b), method};
    curve.scores.push_back(trim_score(model, x, q).score);
  }
  if (curve.prediction == 0.0) throw BandNormalizationError(std::move(curve));
  for (double s : curve.scores) curve.normalized.push_back(s / curve.prediction);
  return curve;
}

std::string group_scores_csv(const GroupScores& g) {
  CsvWriter w({"index", "label", "score", "normalized_score"});
  for (std::size_t i = 0; i < g.scores.size(); ++i) {
    const double norm = g.prediction != 0.0 ? g.scores[i] / g.prediction : std::nan("");
    w.row({format_number(static_cast<double>(i)), format_number(static_cast<double>(g.labels[i])),
           format_number(g.scores[i]), format_number(norm)});
  }
  return w.str();
}

std::string band_curve_csv(const BandCurve& c) {
  CsvWriter w({"index", "label", "score", "normalized_score"});
  for (std::size_t i = 0; i < c.scores.size(); ++i) {
    const double norm = i < c.normalized.size() ? c.normalized[i] : std::nan("");
    w.row({format_number(static_cast<double>(i)), format_number(c.centers[i]), format_number(c.scores[i]),
           format_number(norm)});
  }
  return w.str();
}

nlohmann::json method_config_json(const MethodConfig& m) {
  nlohmann::json j = {{"method", method_name(m.method)}};
  if (m.method == Method::IG) j["ig_steps"] = m.ig_steps;
  if (m.method == Method::Shapley) {
    j["shapley_mode"] = m.shapley.mode == ShapleyConfig::Mode::Exact ? "exact" : "sampled";
    j["shapley_permutations"] = m.shapley.permutations;
    j["shapley_seed"] = m.shapley.seed;
  }
  return j;
}

nlohmann::json group_scores_json(const GroupScores& g, const nlohmann::json& metadata) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["query"] = metadata;
  j["prediction"] = g.prediction;
  j["argmax_label"] = g.argmax_label;
  j["labels"] = g.labels;
  j["scores"] = g.scores;
  return j;
}

nlohmann::json band_curve_json(const BandCurve& c, const nlohmann::json& metadata) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["query"] = metadata;
  j["normalization"] = "score / prediction (signed)";
  j["prediction"] = c.prediction;
  auto bands = nlohmann::json::array();
  for (const auto& b : c.bands) bands.push_back({{"lo", b.lo}, {"hi", b.hi}});
  j["bands"] = bands;
  j["centers"] = c.centers;
  j["scores"] = c.scores;
  j["normalized_scores"] = c.normalized;
  return j;
}

}  // namespace trim

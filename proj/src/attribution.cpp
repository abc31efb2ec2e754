#include "trim/attribution.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "trim/error.hpp"
#include "trim/rng.hpp"

namespace trim {

double ScalarFunction::value(const NdArray& x) const {
  return values(x.reshaped({1, x.size()})).front();
}

MlpFunction::MlpFunction(const MlpModel& model, std::size_t output_index) : model_(model), output_index_(output_index) {
  if (output_index >= model.spec().output_width()) throw ContractError("MlpFunction: output_index out of range");
}

std::vector<double> MlpFunction::values(const NdArray& points) const {
  const NdArray out = model_.forward(points);
  std::vector<double> v(out.rows());
  for (std::size_t r = 0; r < out.rows(); ++r) v[r] = out(r, output_index_);
  return v;
}

NdArray MlpFunction::gradients(const NdArray& points, std::vector<double>* values) const {
  NdArray out;
  NdArray g = model_.grad_input_batch(points, output_index_, values ? &out : nullptr);
  if (values) {
    values->resize(out.rows());
    for (std::size_t r = 0; r < out.rows(); ++r) (*values)[r] = out(r, output_index_);
  }
  return g;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::CD: return "cd";
    case Method::IG: return "ig";
    case Method::InputXGrad: return "input_x_grad";
    case Method::Shapley: return "shapley";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "cd") return Method::CD;
  if (name == "ig") return Method::IG;
  if (name == "input_x_grad" || name == "deeplift") return Method::InputXGrad;
  if (name == "shapley" || name == "shap") return Method::Shapley;
  throw ContractError("unknown attribution method '" + name + "'");
}

namespace {

void check_same_length(const NdArray& a, const NdArray& b, const char* what) {
  if (a.size() != b.size()) throw DimensionError(std::string(what) + ": length mismatch");
}

NdArray as_row(const NdArray& x) { return x.reshaped({1, x.size()}); }

// Splits the bias of one linear layer between the two streams, in place.
void split_bias(NdArray& zb, NdArray& zg, const std::vector<double>& bias) {
  const std::size_t n = zb.cols();
  for (std::size_t r = 0; r < zb.rows(); ++r) {
    for (std::size_t j = 0; j < n; ++j) {
      const double ab = std::abs(zb(r, j)), ag = std::abs(zg(r, j));
      double share = 0.5;
      if (!(ab < kCdTieThreshold && ag < kCdTieThreshold)) share = ab / (ab + ag);
      zb(r, j) += bias[j] * share;
      zg(r, j) += bias[j] * (1.0 - share);
    }
  }
}

}  // namespace

std::vector<CdOutput> cd_forward_batch(const MlpModel& model, const NdArray& relevant, const NdArray& irrelevant,
                                       std::size_t output_index) {
  if (relevant.shape() != irrelevant.shape()) throw DimensionError("cd_forward: beta and gamma shapes differ");
  if (relevant.cols() != model.input_width()) throw DimensionError("cd_forward: width does not match model");
  if (output_index >= model.spec().output_width()) throw ContractError("cd_forward: output_index out of range");
  NdArray beta = relevant.rank() == 2 ? relevant : as_row(relevant);
  NdArray gamma = irrelevant.rank() == 2 ? irrelevant : as_row(irrelevant);

  const std::size_t L = model.spec().layer_count();
  for (std::size_t l = 0; l < L; ++l) {
    NdArray zb = matmul(beta, model.weight_t(l));
    NdArray zg = matmul(gamma, model.weight_t(l));
    split_bias(zb, zg, model.params().layers[l].bias);
    if (l + 1 < L) {
      for (std::size_t i = 0; i < zb.size(); ++i) {
        const double b = zb[i], total = zb[i] + zg[i];
        const double rb = b > 0.0 ? b : 0.0;
        const double rt = total > 0.0 ? total : 0.0;
        zb[i] = rb;
        zg[i] = rt - rb;
      }
    }
    beta = std::move(zb);
    gamma = std::move(zg);
  }
  std::vector<CdOutput> out(beta.rows());
  for (std::size_t r = 0; r < beta.rows(); ++r) out[r] = {beta(r, output_index), gamma(r, output_index)};
  return out;
}

CdOutput cd_forward(const MlpModel& model, const Decomposition& d, std::size_t output_index) {
  if (d.relevant.rows() != 1) throw DimensionError("cd_forward: expects a single decomposition");
  return cd_forward_batch(model, d.relevant, d.irrelevant, output_index).front();
}

AttributionResult integrated_gradients(const ScalarFunction& f, const NdArray& x, const NdArray& baseline,
                                       std::size_t steps) {
  check_same_length(x, baseline, "integrated_gradients");
  if (steps < 1) throw ContractError("integrated_gradients: steps must be >= 1");
  const std::size_t n = x.size();
  if (n != f.input_width()) throw DimensionError("integrated_gradients: width does not match function");

  std::vector<double> grad_sum(n, 0.0);
  constexpr std::size_t kChunk = 512;
  for (std::size_t start = 0; start < steps; start += kChunk) {
    const std::size_t rows = std::min(kChunk, steps - start);
    NdArray path({rows, n});
    for (std::size_t r = 0; r < rows; ++r) {
      const double alpha = (static_cast<double>(start + r) + 0.5) / static_cast<double>(steps);
      for (std::size_t i = 0; i < n; ++i) path(r, i) = baseline[i] + alpha * (x[i] - baseline[i]);
    }
    const NdArray g = f.gradients(path, nullptr);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t i = 0; i < n; ++i) grad_sum[i] += g(r, i);
  }

  AttributionResult res;
  res.method = Method::IG;
  res.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) res.scores[i] = (x[i] - baseline[i]) * grad_sum[i] / static_cast<double>(steps);
  res.score = sum(res.scores);
  NdArray ends({2, n});
  std::copy(x.data().begin(), x.data().end(), ends.row(0).begin());
  std::copy(baseline.data().begin(), baseline.data().end(), ends.row(1).begin());
  const auto v = f.values(ends);
  res.output = v[0];
  res.baseline_output = v[1];
  res.completeness_gap = std::abs(res.score - (res.output - res.baseline_output));
  return res;
}

AttributionResult input_x_gradient(const ScalarFunction& f, const NdArray& x, const NdArray& baseline) {
  check_same_length(x, baseline, "input_x_gradient");
  const std::size_t n = x.size();
  if (n != f.input_width()) throw DimensionError("input_x_gradient: width does not match function");
  std::vector<double> out;
  const NdArray g = f.gradients(as_row(x), &out);
  AttributionResult res;
  res.method = Method::InputXGrad;
  res.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) res.scores[i] = (x[i] - baseline[i]) * g[i];
  res.score = sum(res.scores);
  res.output = out.front();
  res.baseline_output = f.value(baseline);
  res.completeness_gap = std::abs(res.score - (res.output - res.baseline_output));
  return res;
}

std::vector<std::vector<std::size_t>> singleton_groups(std::size_t n) {
  std::vector<std::vector<std::size_t>> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = {i};
  return g;
}

namespace {

void validate_partition(const std::vector<std::vector<std::size_t>>& groups, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& g : groups) {
    if (g.empty()) throw ContractError("shapley: empty group");
    for (auto i : g) {
      if (i >= n) throw ContractError("shapley: group index out of range");
      if (seen[i]++) throw ContractError("shapley: groups overlap");
    }
  }
  for (auto s : seen) {
    if (!s) throw ContractError("shapley: groups do not cover every coordinate");
  }
}

void set_group(std::span<double> row, const std::vector<std::size_t>& group, const NdArray& src) {
  for (auto i : group) row[i] = src[i];
}

AttributionResult shapley_exact(const ScalarFunction& f, const NdArray& x,
                                const std::vector<std::vector<std::size_t>>& groups, const NdArray& baseline) {
  const std::size_t G = groups.size(), n = x.size();
  const std::size_t coalitions = std::size_t{1} << G;
  std::vector<double> value(coalitions);
  constexpr std::size_t kChunk = 2048;
  for (std::size_t start = 0; start < coalitions; start += kChunk) {
    const std::size_t rows = std::min(kChunk, coalitions - start);
    NdArray pts({rows, n});
    for (std::size_t r = 0; r < rows; ++r) {
      auto row = pts.row(r);
      std::copy(baseline.data().begin(), baseline.data().end(), row.begin());
      const std::size_t m = start + r;
      for (std::size_t g = 0; g < G; ++g) {
        if (m >> g & 1) set_group(row, groups[g], x);
      }
    }
    const auto v = f.values(pts);
    std::copy(v.begin(), v.end(), value.begin() + static_cast<std::ptrdiff_t>(start));
  }

  std::vector<double> factorial(G + 1, 1.0);
  for (std::size_t i = 1; i <= G; ++i) factorial[i] = factorial[i - 1] * static_cast<double>(i);
  std::vector<double> weight(G);
  for (std::size_t s = 0; s < G; ++s) weight[s] = factorial[s] * factorial[G - s - 1] / factorial[G];

  AttributionResult res;
  res.method = Method::Shapley;
  res.scores.assign(G, 0.0);
  for (std::size_t g = 0; g < G; ++g) {
    const std::size_t bit = std::size_t{1} << g;
    double phi = 0.0;
    for (std::size_t m = 0; m < coalitions; ++m) {
      if (m & bit) continue;
      phi += weight[static_cast<std::size_t>(std::popcount(m))] * (value[m | bit] - value[m]);
    }
    res.scores[g] = phi;
  }
  res.output = value[coalitions - 1];
  res.baseline_output = value[0];
  return res;
}

AttributionResult shapley_sampled(const ScalarFunction& f, const NdArray& x,
                                  const std::vector<std::vector<std::size_t>>& groups, const NdArray& baseline,
                                  const ShapleyConfig& cfg) {
  const std::size_t G = groups.size(), n = x.size();
  const std::size_t P = cfg.permutations;
  if (P < 1) throw ContractError("shapley: sampled mode needs at least one permutation");
  const SeededRng root(cfg.seed);

  std::vector<double> total(G, 0.0), total_sq(G, 0.0);
  double out = 0.0, base = 0.0;
  const std::size_t chunk = std::max<std::size_t>(1, 256 / (G + 1));
  std::vector<std::vector<std::size_t>> perms(chunk, std::vector<std::size_t>(G));
  for (std::size_t start = 0; start < P; start += chunk) {
    const std::size_t count = std::min(chunk, P - start);
    NdArray pts({count * (G + 1), n});
    for (std::size_t p = 0; p < count; ++p) {
      auto& perm = perms[p];
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      SeededRng rng = root.child(static_cast<std::uint64_t>(start + p));
      rng.shuffle(perm);
      auto row = pts.row(p * (G + 1));
      std::copy(baseline.data().begin(), baseline.data().end(), row.begin());
      for (std::size_t j = 0; j < G; ++j) {
        auto next = pts.row(p * (G + 1) + j + 1);
        std::copy(row.begin(), row.end(), next.begin());
        set_group(next, groups[perm[j]], x);
        row = next;
      }
    }
    const auto v = f.values(pts);
    for (std::size_t p = 0; p < count; ++p) {
      const double* pv = v.data() + p * (G + 1);
      for (std::size_t j = 0; j < G; ++j) {
        const double delta = pv[j + 1] - pv[j];
        total[perms[p][j]] += delta;
        total_sq[perms[p][j]] += delta * delta;
      }
      if (start + p == 0) {
        base = pv[0];
        out = pv[G];
      }
    }
  }

  AttributionResult res;
  res.method = Method::Shapley;
  res.scores.resize(G);
  res.standard_errors.resize(G);
  const double Pd = static_cast<double>(P);
  for (std::size_t g = 0; g < G; ++g) {
    const double mean = total[g] / Pd;
    res.scores[g] = mean;
    if (P > 1) {
      const double var = std::max(0.0, (total_sq[g] - Pd * mean * mean) / (Pd - 1.0));
      res.standard_errors[g] = std::sqrt(var / Pd);
    }
  }
  res.output = out;
  res.baseline_output = base;
  return res;
}

}  // namespace

AttributionResult shapley(const ScalarFunction& f, const NdArray& x, const std::vector<std::vector<std::size_t>>& groups,
                          const NdArray& baseline, const ShapleyConfig& cfg) {
  check_same_length(x, baseline, "shapley");
  if (x.size() != f.input_width()) throw DimensionError("shapley: width does not match function");
  validate_partition(groups, x.size());
  AttributionResult res;
  if (cfg.mode == ShapleyConfig::Mode::Exact) {
    if (groups.size() > kMaxExactShapleyGroups) {
      throw ContractError("shapley: exact mode supports at most " + std::to_string(kMaxExactShapleyGroups) +
                          " groups, got " + std::to_string(groups.size()));
    }
    res = shapley_exact(f, x, groups, baseline);
  } else {
    res = shapley_sampled(f, x, groups, baseline, cfg);
  }
  res.score = sum(res.scores);
  res.completeness_gap = std::abs(res.score - (res.output - res.baseline_output));
  return res;
}

}  // namespace trim

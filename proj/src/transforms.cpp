#include "trim/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "trim/error.hpp"
#include "trim/fft.hpp"

namespace trim {
namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

enum class Part { Real, Re, Im };

struct Slot {
  std::size_t bin;  // row-major index into the h x w spectrum
  Part part;
};

std::size_t wrap(std::size_t a, std::size_t n) { return (n - a) % n; }

long signed_freq(std::size_t a, std::size_t n) {
  return a <= n / 2 ? static_cast<long>(a) : static_cast<long>(a) - static_cast<long>(n);
}

std::vector<Slot> dft2d_layout(std::size_t h, std::size_t w) {
  std::vector<Slot> slots;
  slots.reserve(h * w);
  for (std::size_t a = 0; a < h; ++a) {
    for (std::size_t b = 0; b < w; ++b) {
      const std::size_t bin = a * w + b;
      const std::size_t partner = wrap(a, h) * w + wrap(b, w);
      if (partner == bin) {
        slots.push_back({bin, Part::Real});
      } else if (bin < partner) {
        slots.push_back({bin, Part::Re});
        slots.push_back({bin, Part::Im});
      }
    }
  }
  return slots;
}

std::size_t radial_label(std::size_t bin, std::size_t h, std::size_t w) {
  const double fa = static_cast<double>(signed_freq(bin / w, h));
  const double fb = static_cast<double>(signed_freq(bin % w, w));
  return static_cast<std::size_t>(std::lround(std::sqrt(fa * fa + fb * fb)));
}

NdArray matvec(const NdArray& m, const NdArray& v) {
  return matmul(m, v.reshaped({v.size(), 1})).reshaped({m.rows()});
}

void expect_length(const NdArray& x, std::size_t n, const char* what) {
  if (x.size() != n) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(n) + ", got " +
                         std::to_string(x.size()));
  }
}

Eigen::MatrixXd to_eigen(const NdArray& a) {
  Eigen::MatrixXd m(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) m(r, c) = a(r, c);
  return m;
}

NdArray from_eigen(const Eigen::MatrixXd& m) {
  NdArray a({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) a(r, c) = m(r, c);
  return a;
}

NdArray dft1d_apply(std::size_t n, const NdArray& x) {
  ComplexSeq z(n);
  std::copy(x.data().begin(), x.data().end(), z.re.begin());
  const auto X = fft(z, FftDirection::Forward);
  std::vector<double> s(n);
  s[0] = X.re[0];
  for (std::size_t k = 1; k < n / 2; ++k) {
    s[2 * k - 1] = kSqrt2 * X.re[k];
    s[2 * k] = kSqrt2 * X.im[k];
  }
  s[n - 1] = X.re[n / 2];
  return NdArray::vector(std::move(s));
}

ComplexSeq dft1d_synthesize(std::size_t n, const NdArray& s) {
  ComplexSeq X(n);
  X.re[0] = s[0];
  X.re[n / 2] = s[n - 1];
  for (std::size_t k = 1; k < n / 2; ++k) {
    X.re[k] = s[2 * k - 1] / kSqrt2;
    X.im[k] = s[2 * k] / kSqrt2;
    X.re[n - k] = X.re[k];
    X.im[n - k] = -X.im[k];
  }
  return fft(X, FftDirection::Inverse);
}

NdArray dft2d_apply(std::size_t h, std::size_t w, const NdArray& x) {
  ComplexSeq z(h * w);
  std::copy(x.data().begin(), x.data().end(), z.re.begin());
  const auto X = fft2d(z, h, w, FftDirection::Forward);
  const auto slots = dft2d_layout(h, w);
  std::vector<double> s(slots.size());
  for (std::size_t c = 0; c < slots.size(); ++c) {
    const auto& sl = slots[c];
    switch (sl.part) {
      case Part::Real: s[c] = X.re[sl.bin]; break;
      case Part::Re: s[c] = kSqrt2 * X.re[sl.bin]; break;
      case Part::Im: s[c] = kSqrt2 * X.im[sl.bin]; break;
    }
  }
  return NdArray::vector(std::move(s));
}

ComplexSeq dft2d_synthesize(std::size_t h, std::size_t w, const NdArray& s) {
  ComplexSeq X(h * w);
  const auto slots = dft2d_layout(h, w);
  for (std::size_t c = 0; c < slots.size(); ++c) {
    const auto& sl = slots[c];
    const std::size_t partner = wrap(sl.bin / w, h) * w + wrap(sl.bin % w, w);
    switch (sl.part) {
      case Part::Real: X.re[sl.bin] = s[c]; break;
      case Part::Re:
        X.re[sl.bin] = s[c] / kSqrt2;
        X.re[partner] = s[c] / kSqrt2;
        break;
      case Part::Im:
        X.im[sl.bin] = s[c] / kSqrt2;
        X.im[partner] = -s[c] / kSqrt2;
        break;
    }
  }
  return fft2d(X, h, w, FftDirection::Inverse);
}

NdArray real_part(const ComplexSeq& z) { return NdArray::vector(z.re); }

}  // namespace

TransformKind kind(const Transform& t) { return static_cast<TransformKind>(t.index()); }

std::string kind_name(TransformKind k) {
  switch (k) {
    case TransformKind::Identity: return "identity";
    case TransformKind::Dft1d: return "dft1d";
    case TransformKind::Dft2d: return "dft2d";
    case TransformKind::LinearInvertible: return "linear_invertible";
    case TransformKind::LinearDictionary: return "linear_dictionary";
  }
  return "unknown";
}

bool is_fourier(const Transform& t) {
  return std::holds_alternative<Dft1d>(t) || std::holds_alternative<Dft2d>(t);
}

std::size_t raw_size(const Transform& t) {
  return std::visit(overloaded{[](const IdentityTransform& i) { return i.n; }, [](const Dft1d& d) { return d.n; },
                               [](const Dft2d& d) { return d.h * d.w; },
                               [](const LinearInvertible& l) { return l.forward.cols(); },
                               [](const LinearDictionary& l) { return l.analysis.cols(); }},
                    t);
}

std::size_t coefficient_count(const Transform& t) {
  if (const auto* dict = std::get_if<LinearDictionary>(&t)) return dict->analysis.rows();
  return raw_size(t);
}

Transform make_dft1d(std::size_t n) {
  if (!is_power_of_two(n) || n < 2) throw SizeError("Dft1d: n must be a power of two >= 2");
  return Dft1d{n};
}

Transform make_dft2d(std::size_t h, std::size_t w) {
  if (!is_power_of_two(h) || !is_power_of_two(w) || h < 2 || w < 2) {
    throw SizeError("Dft2d: h and w must be powers of two >= 2");
  }
  return Dft2d{h, w};
}

Transform make_linear_invertible(NdArray forward, NdArray inverse) {
  if (forward.rank() != 2 || forward.rows() != forward.cols() || inverse.shape() != forward.shape()) {
    throw DimensionError("LinearInvertible: forward and inverse must be matching square matrices");
  }
  const NdArray prod = matmul(forward, inverse);
  const NdArray eye = NdArray::identity(forward.rows());
  if (max_abs_diff(prod.values(), eye.values()) >= 1e-8) {
    throw ContractError("LinearInvertible: A * A_inv deviates from identity by >= 1e-8");
  }
  return LinearInvertible{std::move(forward), std::move(inverse)};
}

Transform make_linear_invertible(NdArray forward) {
  if (forward.rank() != 2 || forward.rows() != forward.cols()) {
    throw DimensionError("LinearInvertible: square matrix required");
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(to_eigen(forward));
  if (!lu.isInvertible()) throw ContractError("LinearInvertible: matrix is singular");
  NdArray inverse = from_eigen(lu.inverse());
  return make_linear_invertible(std::move(forward), std::move(inverse));
}

NdArray pseudo_inverse(const NdArray& a) {
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(to_eigen(a));
  return from_eigen(cod.pseudoInverse());
}

Transform make_dictionary(NdArray analysis) {
  if (analysis.rank() != 2) throw DimensionError("LinearDictionary: analysis must be a matrix");
  NdArray synthesis = pseudo_inverse(analysis);
  return LinearDictionary{std::move(analysis), std::move(synthesis)};
}

Transform make_dictionary(NdArray analysis, NdArray synthesis) {
  if (analysis.rank() != 2 || synthesis.rank() != 2 || synthesis.rows() != analysis.cols() ||
      synthesis.cols() != analysis.rows()) {
    throw DimensionError("LinearDictionary: analysis k x n requires synthesis n x k");
  }
  return LinearDictionary{std::move(analysis), std::move(synthesis)};
}

CoefficientVector apply(const Transform& t, const NdArray& x) {
  expect_length(x, raw_size(t), "apply");
  const NdArray flat = x.reshaped({x.size()});
  NdArray s = std::visit(overloaded{[&](const IdentityTransform&) { return flat; },
                                    [&](const Dft1d& d) { return dft1d_apply(d.n, flat); },
                                    [&](const Dft2d& d) { return dft2d_apply(d.h, d.w, flat); },
                                    [&](const LinearInvertible& l) { return matvec(l.forward, flat); },
                                    [&](const LinearDictionary& l) { return matvec(l.analysis, flat); }},
                         t);
  return {std::move(s), kind(t)};
}

ComplexSeq synthesize_complex(const Transform& t, const CoefficientVector& s) {
  if (s.layout != kind(t)) throw ContractError("synthesize_complex: coefficient layout does not match transform");
  expect_length(s.values, coefficient_count(t), "synthesize_complex");
  if (const auto* d = std::get_if<Dft1d>(&t)) return dft1d_synthesize(d->n, s.values);
  if (const auto* d = std::get_if<Dft2d>(&t)) return dft2d_synthesize(d->h, d->w, s.values);
  throw ContractError("synthesize_complex: Fourier transform required");
}

NdArray invert(const Transform& t, const CoefficientVector& s) {
  if (s.layout != kind(t)) {
    throw ContractError("invert: coefficient layout " + kind_name(s.layout) + " does not match transform " +
                        kind_name(kind(t)));
  }
  expect_length(s.values, coefficient_count(t), "invert");
  const NdArray flat = s.values.reshaped({s.values.size()});
  return std::visit(overloaded{[&](const IdentityTransform&) { return flat; },
                               [&](const Dft1d& d) { return real_part(dft1d_synthesize(d.n, flat)); },
                               [&](const Dft2d& d) { return real_part(dft2d_synthesize(d.h, d.w, flat)); },
                               [&](const LinearInvertible& l) { return matvec(l.inverse, flat); },
                               [&](const LinearDictionary& l) { return matvec(l.synthesis, flat); }},
                    t);
}

NdArray residual(const Transform& t, const NdArray& x) {
  const NdArray back = invert(t, trim::apply(t, x));
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = x[i] - back[i];
  return NdArray::vector(std::move(r));
}

NdArray invert_adjoint(const Transform& t, const NdArray& g) {
  expect_length(g, raw_size(t), "invert_adjoint");
  const NdArray flat = g.reshaped({g.size()});
  return std::visit(overloaded{[&](const IdentityTransform&) { return flat; },
                               [&](const Dft1d& d) { return dft1d_apply(d.n, flat); },
                               [&](const Dft2d& d) { return dft2d_apply(d.h, d.w, flat); },
                               [&](const LinearInvertible& l) { return matvec(transpose(l.inverse), flat); },
                               [&](const LinearDictionary& l) { return matvec(transpose(l.synthesis), flat); }},
                    t);
}

std::vector<FrequencyGroup> frequency_groups(const Transform& t) {
  std::vector<FrequencyGroup> groups;
  if (const auto* d = std::get_if<Dft1d>(&t)) {
    const std::size_t n = d->n;
    groups.push_back({0, {0}, 0});
    for (std::size_t k = 1; k < n / 2; ++k) groups.push_back({k, {2 * k - 1, 2 * k}, k});
    groups.push_back({n / 2, {n - 1}, n / 2});
    return groups;
  }
  if (const auto* d = std::get_if<Dft2d>(&t)) {
    const auto slots = dft2d_layout(d->h, d->w);
    std::map<std::size_t, std::vector<std::size_t>> by_label;
    for (std::size_t c = 0; c < slots.size(); ++c) by_label[radial_label(slots[c].bin, d->h, d->w)].push_back(c);
    for (auto& [label, idx] : by_label) groups.push_back({groups.size(), std::move(idx), label});
    return groups;
  }
  throw ContractError("frequency_groups: Fourier transform required, got " + kind_name(kind(t)));
}

std::vector<FrequencyGroup> coefficient_groups(const Transform& t) {
  if (is_fourier(t)) return frequency_groups(t);
  std::vector<FrequencyGroup> groups;
  for (std::size_t i = 0; i < coefficient_count(t); ++i) groups.push_back({i, {i}, i});
  return groups;
}

Mask Mask::complement() const {
  Mask m = *this;
  for (auto& e : m.entries) e = e ? 0 : 1;
  return m;
}

NdArray Mask::apply(const NdArray& s) const {
  if (s.size() != entries.size()) throw DimensionError("Mask::apply: length mismatch");
  NdArray out = s;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!entries[i]) out[i] = 0.0;
  }
  return out;
}

void validate_mask(const Transform& t, const Mask& mask) {
  if (mask.size() != coefficient_count(t)) {
    throw ContractError("mask length " + std::to_string(mask.size()) + " does not match coefficient count " +
                        std::to_string(coefficient_count(t)));
  }
  for (auto e : mask.entries) {
    if (e > 1) throw ContractError("mask entries must be 0 or 1");
  }
  for (const auto& g : coefficient_groups(t)) {
    const auto first = mask.entries[g.coefficient_indices.front()];
    for (auto i : g.coefficient_indices) {
      if (mask.entries[i] != first) {
        throw ContractError("mask splits frequency group with label " + std::to_string(g.label));
      }
    }
  }
}

Mask group_mask(const Transform& t, const std::vector<FrequencyGroup>& groups, std::size_t group_index) {
  Mask m = Mask::zeros(coefficient_count(t));
  for (auto i : groups.at(group_index).coefficient_indices) m.entries[i] = 1;
  return m;
}

std::size_t max_frequency_label(const Transform& t) { return frequency_groups(t).back().label; }

Mask band_mask(const Transform& t, const BandSpec& band) {
  const auto groups = frequency_groups(t);
  const std::size_t limit = groups.back().label + 1;
  if (!(band.lo < band.hi) || band.hi > limit) {
    throw ContractError("band [" + std::to_string(band.lo) + ", " + std::to_string(band.hi) +
                        ") outside valid range [0, " + std::to_string(limit) + ")");
  }
  Mask m = Mask::zeros(coefficient_count(t));
  for (const auto& g : groups) {
    if (g.label >= band.lo && g.label < band.hi) {
      for (auto i : g.coefficient_indices) m.entries[i] = 1;
    }
  }
  return m;
}

namespace {

nlohmann::json matrix_json(const NdArray& m) {
  auto rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

NdArray matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty() || rows.front().empty()) throw DimensionError("matrix: empty");
  std::vector<double> flat;
  for (const auto& r : rows) {
    if (r.size() != rows.front().size()) throw DimensionError("matrix: ragged rows");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return NdArray::matrix(rows.size(), rows.front().size(), std::move(flat));
}

}  // namespace

nlohmann::json transform_to_json(const Transform& t) {
  nlohmann::json j;
  j["kind"] = kind_name(kind(t));
  std::visit(overloaded{[&](const IdentityTransform& i) { j["n"] = i.n; }, [&](const Dft1d& d) { j["n"] = d.n; },
                        [&](const Dft2d& d) {
                          j["h"] = d.h;
                          j["w"] = d.w;
                        },
                        [&](const LinearInvertible& l) {
                          j["forward"] = matrix_json(l.forward);
                          j["inverse"] = matrix_json(l.inverse);
                        },
                        [&](const LinearDictionary& l) {
                          j["analysis"] = matrix_json(l.analysis);
                          j["synthesis"] = matrix_json(l.synthesis);
                        }},
             t);
  return j;
}

Transform transform_from_json(const nlohmann::json& j) {
  const auto k = j.at("kind").get<std::string>();
  if (k == "identity") return IdentityTransform{j.at("n").get<std::size_t>()};
  if (k == "dft1d") return make_dft1d(j.at("n").get<std::size_t>());
  if (k == "dft2d") return make_dft2d(j.at("h").get<std::size_t>(), j.at("w").get<std::size_t>());
  if (k == "linear_invertible") {
    return make_linear_invertible(matrix_from_json(j.at("forward")), matrix_from_json(j.at("inverse")));
  }
  if (k == "linear_dictionary") {
    return make_dictionary(matrix_from_json(j.at("analysis")), matrix_from_json(j.at("synthesis")));
  }
  throw ContractError("unknown transform kind '" + k + "'");
}

}  // namespace trim

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "trim/ndarray.hpp"

namespace trim {

// Transform family T : X -> S. Every member is linear; the DFT members are
// orthonormal real maps, so their inverse is their transpose.

struct IdentityTransform {
  std::size_t n;
};

/// Real 1-D DFT packed as [Re0, Re1, Im1, ..., Re(n/2-1), Im(n/2-1), Re(n/2)].
/// Interior pairs carry a sqrt(2) factor so the packing is orthonormal.
struct Dft1d {
  std::size_t n;
};

/// Real 2-D DFT of an h x w grid (row-major). Self-conjugate bins give one
/// real coefficient; every other conjugate pair is stored once, at the
/// member that comes first in row-major order, as sqrt(2)*(Re, Im).
struct Dft2d {
  std::size_t h;
  std::size_t w;
};

struct LinearInvertible {
  NdArray forward;  // n x n
  NdArray inverse;  // n x n
};

/// s = analysis * x, x' = synthesis * s. Not invertible in general; the
/// residual x - x' is carried separately.
struct LinearDictionary {
  NdArray analysis;   // k x n
  NdArray synthesis;  // n x k
};

using Transform = std::variant<IdentityTransform, Dft1d, Dft2d, LinearInvertible, LinearDictionary>;

enum class TransformKind { Identity, Dft1d, Dft2d, LinearInvertible, LinearDictionary };

TransformKind kind(const Transform& t);
std::string kind_name(TransformKind k);
bool is_fourier(const Transform& t);
/// Raw-space length n.
std::size_t raw_size(const Transform& t);
/// Number of transformed coefficients.
std::size_t coefficient_count(const Transform& t);

/// Validating constructors.
Transform make_dft1d(std::size_t n);
Transform make_dft2d(std::size_t h, std::size_t w);
/// Checks max|A * A_inv - I| < 1e-8.
Transform make_linear_invertible(NdArray forward, NdArray inverse);
/// Computes the inverse numerically.
Transform make_linear_invertible(NdArray forward);
/// synthesis = Moore-Penrose pseudo-inverse of analysis.
Transform make_dictionary(NdArray analysis);
Transform make_dictionary(NdArray analysis, NdArray synthesis);
NdArray pseudo_inverse(const NdArray& a);

struct CoefficientVector {
  NdArray values;
  TransformKind layout;
};

CoefficientVector apply(const Transform& t, const NdArray& x);
NdArray invert(const Transform& t, const CoefficientVector& s);
/// x - invert(apply(x)).
NdArray residual(const Transform& t, const NdArray& x);
/// Transpose of the inverse map: pulls a raw-space gradient back to
/// coefficient space.
NdArray invert_adjoint(const Transform& t, const NdArray& g);

/// Full complex signal synthesized from Fourier coefficients, before the real
/// part is taken. Exposed so callers can check imaginary leakage.
ComplexSeq synthesize_complex(const Transform& t, const CoefficientVector& s);

/// Coefficients that must be masked together, with their physical label.
struct FrequencyGroup {
  std::size_t group_id;
  std::vector<std::size_t> coefficient_indices;
  std::size_t label;
};

/// Fourier transforms only: DC/Nyquist singletons and {Re_k, Im_k} pairs in
/// 1-D; integer-rounded radial frequency shells in 2-D. Ordered by label.
std::vector<FrequencyGroup> frequency_groups(const Transform& t);
/// frequency_groups for Fourier transforms, one singleton per coefficient
/// (label = index) otherwise.
std::vector<FrequencyGroup> coefficient_groups(const Transform& t);

struct Mask {
  std::vector<std::uint8_t> entries;

  static Mask zeros(std::size_t n) { return Mask{std::vector<std::uint8_t>(n, 0)}; }
  static Mask ones(std::size_t n) { return Mask{std::vector<std::uint8_t>(n, 1)}; }
  std::size_t size() const noexcept { return entries.size(); }
  Mask complement() const;
  NdArray apply(const NdArray& s) const;

  friend bool operator==(const Mask&, const Mask&) = default;
};

/// Throws ContractError unless the mask has the transform's coefficient count,
/// is 0/1 valued, and is constant within every group.
void validate_mask(const Transform& t, const Mask& mask);
Mask group_mask(const Transform& t, const std::vector<FrequencyGroup>& groups, std::size_t group_index);

/// Frequency band [lo, hi) in label units.
struct BandSpec {
  std::size_t lo;
  std::size_t hi;
  std::size_t width() const noexcept { return hi - lo; }
};

/// Largest group label of a Fourier transform (n/2 in 1-D).
std::size_t max_frequency_label(const Transform& t);
/// Ones on every coefficient whose group label lies in [lo, hi).
Mask band_mask(const Transform& t, const BandSpec& band);

nlohmann::json transform_to_json(const Transform& t);
Transform transform_from_json(const nlohmann::json& j);

}  // namespace trim

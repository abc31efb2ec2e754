#pragma once

#include <cstddef>

#include "trim/ndarray.hpp"

namespace trim {

enum class FftDirection { Forward, Inverse };

bool is_power_of_two(std::size_t n) noexcept;

/// Radix-2 decimation-in-time FFT with unitary 1/sqrt(n) scaling in both
/// directions. Forward uses exp(-2*pi*i*jk/n). Throws SizeError unless the
/// length is a power of two.
ComplexSeq fft(const ComplexSeq& x, FftDirection dir);

/// Unitary 2-D FFT of an h x w row-major complex grid (rows then columns).
ComplexSeq fft2d(const ComplexSeq& x, std::size_t h, std::size_t w, FftDirection dir);

}  // namespace trim

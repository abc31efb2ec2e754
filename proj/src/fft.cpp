#include "trim/fft.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "trim/error.hpp"

namespace trim {

bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

ComplexSeq fft(const ComplexSeq& x, FftDirection dir) {
  const std::size_t n = x.size();
  if (!is_power_of_two(n)) throw SizeError("fft: length " + std::to_string(n) + " is not a power of two");

  ComplexSeq y = x;
  auto& re = y.re;
  auto& im = y.im;

  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }

  const double sign = dir == FftDirection::Forward ? -1.0 : 1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const double step = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    // Twiddles are evaluated directly rather than by recurrence to keep the
    // error flat at large n.
    std::vector<double> tw_re(half), tw_im(half);
    for (std::size_t k = 0; k < half; ++k) {
      tw_re[k] = std::cos(step * static_cast<double>(k));
      tw_im[k] = std::sin(step * static_cast<double>(k));
    }
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const double wr = tw_re[k];
        const double wi = tw_im[k];
        const std::size_t a = start + k, b = a + half;
        const double tr = re[b] * wr - im[b] * wi;
        const double ti = re[b] * wi + im[b] * wr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
      }
    }
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    re[i] *= scale;
    im[i] *= scale;
  }
  return y;
}

ComplexSeq fft2d(const ComplexSeq& x, std::size_t h, std::size_t w, FftDirection dir) {
  if (x.size() != h * w) throw DimensionError("fft2d: grid size does not match h*w");
  ComplexSeq out = x;
  ComplexSeq line(w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      line.re[c] = out.re[r * w + c];
      line.im[c] = out.im[r * w + c];
    }
    const auto t = fft(line, dir);
    for (std::size_t c = 0; c < w; ++c) {
      out.re[r * w + c] = t.re[c];
      out.im[r * w + c] = t.im[c];
    }
  }
  ComplexSeq col(h);
  for (std::size_t c = 0; c < w; ++c) {
    for (std::size_t r = 0; r < h; ++r) {
      col.re[r] = out.re[r * w + c];
      col.im[r] = out.im[r * w + c];
    }
    const auto t = fft(col, dir);
    for (std::size_t r = 0; r < h; ++r) {
      out.re[r * w + c] = t.re[r];
      out.im[r * w + c] = t.im[r];
    }
  }
  return out;
}

}  // namespace trim

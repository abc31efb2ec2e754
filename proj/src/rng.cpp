#include "trim/rng.hpp"

#include <cmath>
#include <numbers>

#include "trim/error.hpp"

namespace trim {

std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

SeededRng SeededRng::child(std::string_view label) const {
  return SeededRng(mix64(seed_ ^ mix64(fnv1a(label))));
}

SeededRng SeededRng::child(std::uint64_t index) const {
  return SeededRng(mix64(mix64(seed_) + 0x632be59bd9b4e019ULL * (index + 1)));
}

std::uint64_t SeededRng::next_u64() { return engine_(); }

double SeededRng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t SeededRng::uniform_index(std::uint64_t n) {
  if (n == 0) throw ContractError("uniform_index: n must be positive");
  const std::uint64_t limit = std::uint64_t(-1) - (std::uint64_t(-1) % n);
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return v % n;
}

double SeededRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

NdArray standard_normal(SeededRng& rng, std::size_t n) {
  if (n == 0) throw ContractError("standard_normal: n must be >= 1");
  std::vector<double> v(n);
  for (auto& e : v) e = rng.normal();
  return NdArray::vector(std::move(v));
}

}  // namespace trim

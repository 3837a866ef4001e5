#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace terraincl {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_label(std::string_view label) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Labeled stream derivation. Every random stream in a run is
// derive_seed(run_seed, "<label>", index...) so that streams never share state
// and adding a consumer (e.g. the validation pool) cannot shift another one.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view label,
                                    std::uint64_t index = 0) noexcept {
  std::uint64_t z = mix64(parent + kGolden);
  z = mix64(z ^ hash_label(label));
  return mix64(z + (index + 1) * kGolden);
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view label,
                                    std::uint64_t a, std::uint64_t b) noexcept {
  return derive_seed(derive_seed(parent, label, a), "sub", b);
}

// Counter-based generator: output i is a pure function of (key, i), so copies
// replay exactly. Usable wherever a UniformRandomBitGenerator is expected.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  constexpr CounterRng() noexcept = default;
  constexpr explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0) noexcept
      : key_(key), counter_(counter) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  constexpr result_type operator()() noexcept { return at(counter_++); }
  constexpr result_type at(std::uint64_t i) const noexcept { return mix64(key_ + (i + 1) * kGolden); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n) by rejection, no modulo bias.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t x;
    do {
      x = (*this)();
    } while (x >= limit);
    return x % n;
  }

  // Box-Muller without caching, so the stream position is always 2 draws/sample.
  double normal() noexcept {
    double u1 = uniform01();
    const double u2 = uniform01();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

// Stateless uniform in [lo, hi] keyed by a position; used for terrain cells.
inline double keyed_uniform(std::uint64_t key, std::uint64_t i, std::uint64_t j, double lo,
                            double hi) noexcept {
  const std::uint64_t bits = mix64(mix64(key ^ (i * kGolden)) + (j + 1) * 0xD1B54A32D192ED03ULL);
  const double u = static_cast<double>(bits >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

}  // namespace terraincl

#pragma once

// Counter-based random numbers.
//
// Every draw is a pure function of (key, counter):
//
//   word(key, counter) = mix64(key + (counter + 1) * 0x9E3779B97F4A7C15)
//
// where mix64 is the SplitMix64 finalizer
//
//   z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//   z ^= z >> 27; z *= 0x94D049BB133111EB;
//   z ^= z >> 31;
//
// A stream advances its counter by one per 64-bit word. Substreams are keyed
// by hashing a parent key with either a label (FNV-1a 64 of the bytes) or an
// index:
//
//   substream(key, label) = mix64(key ^ fnv1a64(label))
//   substream(key, index) = mix64(key ^ mix64(index ^ 0xD1B54A32D192ED03))
//
// Derived variates use only integer arithmetic and <cmath> so streams are
// reproducible across platforms:
//   uniform()         (word >> 11) * 2^-53, in [0, 1)
//   uniform_index(n)  Lemire multiply-shift with rejection of the low word
//   normal()          Box-Muller pair, the second value is cached
//   poisson(lambda)   inversion for lambda <= 30, sums of such draws above
//   gamma(shape)      Marsaglia-Tsang squeeze

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string_view>

namespace wildsurvey {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

constexpr std::uint64_t substream_key(std::uint64_t key,
                                      std::string_view label) noexcept {
  return mix64(key ^ fnv1a64(label));
}

constexpr std::uint64_t substream_key(std::uint64_t key,
                                      std::uint64_t index) noexcept {
  return mix64(key ^ mix64(index ^ 0xD1B54A32D192ED03ULL));
}

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  CounterRng substream(std::string_view label) const noexcept {
    return CounterRng(substream_key(key_, label));
  }
  CounterRng substream(std::uint64_t index) const noexcept {
    return CounterRng(substream_key(key_, index));
  }

  std::uint64_t next_u64() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
  }

  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform();
  }

  // Unbiased integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) noexcept {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const unsigned __int128 m =
          static_cast<unsigned __int128>(next_u64()) * n;
      if (static_cast<std::uint64_t>(m) >= threshold) {
        return static_cast<std::uint64_t>(m >> 64);
      }
    }
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  double exponential(double mean) noexcept {
    return -mean * std::log1p(-uniform());
  }

  double normal() noexcept {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    return radius * std::cos(angle);
  }

  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

  std::uint64_t poisson(double lambda) noexcept {
    if (!(lambda > 0.0)) return 0;
    std::uint64_t total = 0;
    while (lambda > kPoissonChunk) {
      total += poisson_inversion(kPoissonChunk);
      lambda -= kPoissonChunk;
    }
    return total + poisson_inversion(lambda);
  }

  // Gamma with unit scale.
  double gamma(double shape) noexcept {
    if (shape < 1.0) {
      const double u = 1.0 - uniform();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x;
      double v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = 1.0 - uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  // Negative binomial in the mean/dispersion form (variance mu + mu^2/k),
  // drawn as a gamma-Poisson mixture.
  std::uint64_t negative_binomial(double mu, double k) noexcept {
    if (!(mu > 0.0)) return 0;
    return poisson(gamma(k) * mu / k);
  }

 private:
  static constexpr double kPoissonChunk = 30.0;

  std::uint64_t poisson_inversion(double lambda) noexcept {
    double u = uniform();
    double p = std::exp(-lambda);
    std::uint64_t x = 0;
    while (u > p) {
      u -= p;
      ++x;
      p *= lambda / static_cast<double>(x);
      if (p <= 0.0) break;  // guards the far tail against rounding
    }
    return x;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::optional<double> spare_;
};

}  // namespace wildsurvey

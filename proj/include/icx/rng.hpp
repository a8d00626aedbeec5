#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace icx {

/// SplitMix64 finalizer, used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of sub-stream `stream` under `master`. Every random draw in the
/// library comes from a stream derived this way, so one master seed fixes
/// every output.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream + 0x5851F42D4C957F2DULL));
}

/// Named stream ids.
namespace streams {
inline constexpr std::uint64_t sources = 1;
inline constexpr std::uint64_t mixing = 2;
inline constexpr std::uint64_t noise = 3;
inline constexpr std::uint64_t labels = 4;
inline constexpr std::uint64_t spatial = 5;
inline constexpr std::uint64_t ica = 6;
inline constexpr std::uint64_t head = 7;
inline constexpr std::uint64_t tsne = 8;
inline constexpr std::uint64_t selection = 9;
}  // namespace streams

/// mt19937_64 with hand-written transforms. The standard distributions are
/// implementation-defined, so they are avoided to keep output bytes
/// identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1).
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection keeps the draw exactly uniform.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal via Box-Muller; caches the second variate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Laplace(0, b) via inverse CDF.
  double laplace(double b = 1.0) {
    const double u = uniform_open() - 0.5;
    return u < 0 ? b * std::log1p(2.0 * u) : -b * std::log1p(-2.0 * u);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace icx

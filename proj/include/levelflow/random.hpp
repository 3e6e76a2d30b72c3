#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace levelflow {

// Seed mixing from SplitMix64. Used for deriving child stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of the i-th child stream of a parent seed.
///
/// child_seed(p, i) = splitmix64(splitmix64(p) ^ splitmix64(i)). Realization r of
/// a run always draws from child_seed(run_seed, r), independent of which worker
/// thread computes it.
constexpr std::uint64_t child_seed(std::uint64_t parent, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(parent) ^ splitmix64(index ^ 0xD1B54A32D192ED03ULL));
}

/// Reproducible random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Uniform and Gaussian variates are derived here rather than through
/// the <random> distributions, whose algorithms are implementation-defined:
///  - uniform(): (bits >> 11 + 0.5) * 2^-53, strictly inside (0, 1);
///  - normal(): Marsaglia polar method with one cached spare ("polar-v1").
class RandomStream {
 public:
  static constexpr const char* gaussian_algorithm = "polar-v1";

  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = 0.0, v = 0.0, s = 0.0;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * factor;
    has_spare_ = true;
    return u * factor;
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace levelflow

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tsdl {

/// Seeded pseudo-random source used for every random fill, shuffle and
/// dropout mask. The engine is std::mt19937_64, whose output sequence is fixed
/// by the standard; the uniform and normal transforms are implemented here so
/// the whole stream is identical across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller.
  double normal();

  double normal(double mean, double stdev) { return mean + stdev * normal(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Derives an independent stream seed from a base seed and a label.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label);

}  // namespace tsdl

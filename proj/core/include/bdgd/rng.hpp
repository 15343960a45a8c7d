#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace bdgd {

/// Seedable random stream with platform-independent output.
///
/// Bits come from std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard distributions are implementation-defined, so the
/// uniform, integer and normal draws are implemented here on top of raw bits.
/// Independent streams are derived from a root seed and a path of integers
/// through splitmix64 mixing.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm =
      "mt19937_64; splitmix64 stream derivation; 53-bit uniforms; Box-Muller normals";

  explicit Rng(std::uint64_t seed = 0);

  /// Stream for (seed, path...). Distinct paths give statistically independent streams.
  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, n), n > 0, without modulo bias.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal.
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace bdgd

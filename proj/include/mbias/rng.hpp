#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace mbias {

/// SplitMix64 finalizer. Used to derive independent substream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic random stream.
///
/// Bits come from std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Uniforms take the top 53 bits; normals use the Box-Muller
/// transform (cosine branch first, the sine branch is cached for the next
/// call). Nothing here touches std::*_distribution, whose algorithms are
/// implementation-defined, so streams reproduce across standard libraries.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(mix64(seed)) {}

  /// Stream for item `index` of an experiment seeded with `master`. The
  /// result depends only on (master, index), never on evaluation order.
  static RngStream substream(std::uint64_t master, std::uint64_t index) {
    return RngStream(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer on [0, n). Rejection sampling, no modulo bias.
  std::size_t below(std::size_t n);

  /// Standard normal variate.
  double normal();

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace mbias

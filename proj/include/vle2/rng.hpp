#pragma once

#include <cmath>
#include <cstdint>

namespace vle2 {

/// Counter-based generator: draw i of stream (seed, stream) is a pure
/// function of (seed ^ stream, i), so streams can be split without sharing
/// state. The output function is the splitmix64 finalizer.
class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(uint64_t seed, uint64_t stream = 0) : key_(seed ^ stream) {}

  uint64_t next_u64() {
    uint64_t z = key_ + (++ctr_) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [0, n). Multiply-shift map; bias is O(n / 2^64).
  uint64_t next_below(uint64_t n) {
    return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  /// Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_below(static_cast<uint64_t>(hi - lo + 1)));
  }

  /// Standard normal via Box-Muller; always consumes two draws.
  double normal() {
    double u1 = 1.0 - next_double();  // (0, 1]
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  uint64_t draws() const { return ctr_; }

 private:
  uint64_t key_ = 0;
  uint64_t ctr_ = 0;
};

}  // namespace vle2

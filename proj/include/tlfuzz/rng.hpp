#pragma once

#include <cstdint>

namespace tlfuzz {

// 64-bit finalizer (splitmix64). Used for packet ids, MinHash families and
// the seeded RNG streams; stable across platforms and compilers.
inline constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

// Deterministic splitmix64 stream. std::uniform_*_distribution is not
// portable across standard libraries, so all bounded draws are hand-rolled.
class Rng {
 public:
  Rng() = default;
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  // Derives an independent stream from (seed, stream tag).
  Rng(std::uint64_t seed, std::uint64_t stream)
      : state_(mix64(seed + 0x632BE59BD9B4E019ull * (stream + 1))) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix64(state_);
  }

  // Uniform draw in [0, n). n must be >= 1.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Uniform draw in [lo, hi], inclusive.
  std::int64_t range_i64(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(
                    below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  // Uniform double in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_ = 0;
};

}  // namespace tlfuzz

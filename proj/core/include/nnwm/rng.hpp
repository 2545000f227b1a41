#pragma once

#include <cstdint>

namespace nnwm {

/// splitmix64 finalizer: xor-shift-multiply mix of a 64-bit word.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

/// Derives the seed of an independent child stream from a parent seed and a
/// stream index: mix64(seed + GOLDEN * (stream + 1)) with
/// GOLDEN = 0x9E3779B97F4A7C15. Used everywhere a component needs its own
/// reproducible stream (init, shuffling, noise, ...).
constexpr std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t stream) {
  return mix64(seed + 0x9E3779B97F4A7C15ULL * (stream + 1));
}

// Stream indices for derive_stream. Fixed for reproducibility; never renumber.
inline constexpr std::uint64_t kStreamInit = 1;        // parameter initialization
inline constexpr std::uint64_t kStreamShuffle = 2;     // epoch shuffling
inline constexpr std::uint64_t kStreamTemplates = 3;   // synthetic class templates
inline constexpr std::uint64_t kStreamTrainNoise = 4;  // synthetic train pixel noise
inline constexpr std::uint64_t kStreamTestNoise = 5;   // synthetic test pixel noise
inline constexpr std::uint64_t kStreamSplit = 6;       // dataset split shuffling
inline constexpr std::uint64_t kStreamPrune = 7;       // random pruning order
inline constexpr std::uint64_t kStreamDistill = 8;     // distilled student init
inline constexpr std::uint64_t kStreamAltDomain = 9;   // alternate-domain task seed

/// Deterministic 64-bit generator (splitmix64). The full contract, so that a
/// key matrix regenerates bit-identically from (family, T, M, seed) on any
/// implementation:
///
///   state <- seed
///   next_u64():  state += 0x9E3779B97F4A7C15; return mix64(state)
///   next_unit():       (next_u64() >> 11) * 2^-53          in [0, 1)
///   next_unit_open():  ((next_u64() >> 11) + 1) * 2^-53    in (0, 1]
///   next_below(n):     next_u64() % n
///   next_normal():     Box-Muller. Draw u1 = next_unit_open(), u2 =
///                      next_unit(), let r = sqrt(-2 ln u1); the call returns
///                      r * cos(2 pi u2) and the following call returns the
///                      cached r * sin(2 pi u2). Each pair consumes exactly
///                      two next_u64() draws.
///
/// All floating-point steps are IEEE-754 double; exact cross-platform
/// reproducibility of normals additionally assumes correctly rounded
/// ln/cos/sin from libm (integer draws are exact everywhere).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1]; safe as a log argument.
  double next_unit_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). Plain modulo; the bias is negligible for the
  /// column counts used here and keeps the contract trivial to restate.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  /// Standard normal via Box-Muller as documented above.
  double next_normal();

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace nnwm

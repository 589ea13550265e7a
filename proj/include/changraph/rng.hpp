#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace changraph {

/// Counter-based Philox4x32-10 generator (Salmon et al., SC'11).
///
/// A stream is identified by (key, stream id): the 64-bit key is the master
/// seed, the 64-bit stream id occupies the high counter words. Blocks are
/// indexed by the low counter words, so any stream can regenerate any block
/// independently of the others. This is what makes parallel Monte Carlo
/// reproducible: worker i draws from stream derive_stream(tag, i) and the
/// schedule does not matter.
class Philox {
public:
  Philox() = default;
  Philox(std::uint64_t seed, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        ctr_{0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(0xD2511F53u) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(0xCD9E8D57u) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
      key[0] += 0x9E3779B9u;
      key[1] += 0xBB67AE85u;
    }
    return ctr;
  }

  std::uint32_t next_u32() {
    if (pos_ == 4) {
      buf_ = block(ctr_, key_);
      pos_ = 0;
      if (++ctr_[0] == 0) ++ctr_[1];  // 64-bit block counter
    }
    return buf_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return lo | (hi << 32);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; the paired draw is cached.
  double next_normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = 1.0 - next_double();  // (0, 1]
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925287 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

private:
  std::array<std::uint32_t, 2> key_{0, 0};
  std::array<std::uint32_t, 4> ctr_{0, 0, 0, 0};
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Documented splitting rule: stream id for worker `index` of experiment
/// `tag` is splitmix64(tag) ^ splitmix64(index + 1). Distinct (tag, index)
/// pairs collide with probability ~2^-64.
inline std::uint64_t derive_stream(std::uint64_t tag, std::uint64_t index) {
  return splitmix64(tag) ^ splitmix64(index + 1);
}

}  // namespace changraph

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <string_view>

namespace banditrex {

/// Counter-based pseudo-random generator (splitmix64 stream) with named
/// sub-stream derivation. Every experiment draw goes through this class so
/// that results are bit-reproducible across platforms and independent of
/// standard-library distribution internals. Derivation is pure hashing:
/// streams for different (policy, replication, week, user) keys never
/// overlap draws, which is what makes adding or removing a policy leave
/// all other policies' outputs unchanged.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  /// splitmix64 finalizer.
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  /// FNV-1a, used to fold stream labels into seeds.
  static constexpr std::uint64_t hash(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001B3ULL;
    }
    return h;
  }

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Unbiased integer in [0, n). n must be > 0.
  std::uint64_t next_below(std::uint64_t n) {
    // rejection sampling on the top of the range
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  /// Standard normal draw, Box-Muller. Consumes exactly two uniforms per
  /// call so the stream position never depends on cached state.
  double next_normal() {
    const double u1 = 1.0 - next_double();  // (0, 1]
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Bernoulli(p).
  bool next_bernoulli(double p) { return next_double() < p; }

  /// Seed of the sub-stream identified by (root, label?, path).
  static std::uint64_t derive(std::uint64_t root,
                              std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = mix(root + kGamma);
    for (std::uint64_t p : path) s = mix(s ^ (p + kGamma));
    return s;
  }

  static std::uint64_t derive(std::uint64_t root, std::string_view label,
                              std::initializer_list<std::uint64_t> path = {}) {
    std::uint64_t s = mix(root + kGamma);
    s = mix(s ^ (hash(label) + kGamma));
    for (std::uint64_t p : path) s = mix(s ^ (p + kGamma));
    return s;
  }

  /// Derive an independent stream from a root seed and a label path.
  static Rng stream(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
    return Rng(derive(root, path));
  }

  static Rng stream(std::uint64_t root, std::string_view label,
                    std::initializer_list<std::uint64_t> path = {}) {
    return Rng(derive(root, label, path));
  }

  /// Derive a child stream without disturbing this stream's position.
  Rng substream(std::string_view label, std::uint64_t index = 0) const {
    std::uint64_t s = mix(state_ ^ (hash(label) + kGamma));
    s = mix(s ^ (index + kGamma));
    return Rng(s);
  }

 private:
  std::uint64_t state_;
};

}  // namespace banditrex

#pragma once

// Counter-based random numbers: every draw is a pure function of
// (seed, stream, index), so generation order and thread count never change
// the result.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace hbe::rng {

inline std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t key(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return mix(mix(mix(seed) ^ stream) ^ index);
}

/// Uniform in (0, 1).
inline double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return (static_cast<double>(key(seed, stream, index) >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on two independent uniforms.
inline double normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  const double u1 = uniform(seed, stream, 2 * index);
  const double u2 = uniform(seed, stream, 2 * index + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Stream identifiers keep independent uses of one seed decorrelated.
inline constexpr std::uint64_t kMaskStream = 0x6d61736bULL;
inline constexpr std::uint64_t kNoiseStream = 0x6e6f6973ULL;
inline constexpr std::uint64_t kPatternStream = 0x70617474ULL;
inline constexpr std::uint64_t kCaptureStream = 0x63617074ULL;
inline constexpr std::uint64_t kSceneStream = 0x7363656eULL;

}  // namespace hbe::rng

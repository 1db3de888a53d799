#pragma once

// Synthetic degradations: random and zoom masks, Gaussian noise with
// constant, per-pixel or signal-dependent variance.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "hbe/image.hpp"
#include "hbe/random.hpp"

namespace hbe {

inline constexpr double kMinNoiseVariance = 1e-6;
/// Noise variance stored at unobserved pixels (never used by the solver).
inline constexpr double kMaskedNoiseVariance = 1.0;

struct ConstantNoise {
  double variance = 0.0;
};
struct PerPixelNoise {
  ImageGrid variance;
};
/// var(p) = gain * C(p) + offset
struct AffineNoise {
  double gain = 0.0;
  double offset = 0.0;
};
using NoiseModel = std::variant<ConstantNoise, PerPixelNoise, AffineNoise>;

struct RandomMask {
  double missing_fraction = 0.0;
};
struct ZoomMask {
  int factor = 2;
};
struct ExplicitMask {
  ImageGrid mask;
};

struct MaskSpec {
  std::variant<RandomMask, ZoomMask, ExplicitMask> kind = RandomMask{};
  std::uint64_t seed = 0;
};

/// Binary mask: 1 = observed, 0 = missing.
inline ImageGrid make_mask(const MaskSpec& spec, int width, int height) {
  ImageGrid mask(width, height, 1.0);
  const std::size_t count = mask.size();
  if (const auto* rnd = std::get_if<RandomMask>(&spec.kind)) {
    const double rho = rnd->missing_fraction;
    if (!(rho >= 0.0 && rho < 1.0)) throw ArgumentError("make_mask: missing fraction must be in [0,1)");
    const auto zeros = static_cast<std::size_t>(std::llround(rho * static_cast<double>(count)));
    if (zeros == 0) return mask;
    // Sampling without replacement: the `zeros` pixels with smallest keys.
    std::vector<std::pair<std::uint64_t, std::size_t>> keys(count);
    for (std::size_t i = 0; i < count; ++i) keys[i] = {rng::key(spec.seed, rng::kMaskStream, i), i};
    std::nth_element(keys.begin(), keys.begin() + static_cast<long>(zeros) - 1, keys.end());
    for (std::size_t k = 0; k < zeros; ++k) mask.data[keys[k].second] = 0.0;
  } else if (const auto* zoom = std::get_if<ZoomMask>(&spec.kind)) {
    const int z = zoom->factor;
    if (z < 2 || z > 4) throw ArgumentError("make_mask: zoom factor must be 2, 3 or 4");
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c) mask.at(r, c) = (r % z == 0 && c % z == 0) ? 1.0 : 0.0;
  } else {
    const auto& ex = std::get<ExplicitMask>(spec.kind).mask;
    if (ex.width != width || ex.height != height) throw ArgumentError("make_mask: explicit mask size mismatch");
    for (std::size_t i = 0; i < count; ++i) mask.data[i] = ex.data[i] > 0.0 ? 1.0 : 0.0;
  }
  return mask;
}

inline ImageGrid noise_variance_map(const ImageGrid& clean, const NoiseModel& model) {
  ImageGrid var(clean.width, clean.height);
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        for (std::size_t i = 0; i < var.size(); ++i) {
          double v;
          if constexpr (std::is_same_v<T, ConstantNoise>) {
            v = m.variance;
          } else if constexpr (std::is_same_v<T, PerPixelNoise>) {
            require_same_shape(clean, m.variance, "noise_variance_map");
            v = m.variance.data[i];
          } else {
            v = m.gain * clean.data[i] + m.offset;
          }
          var.data[i] = std::max(v, kMinNoiseVariance);
        }
      },
      model);
  return var;
}

struct NoiseOptions {
  bool clip = false;
  double clip_low = 0.0;
  double clip_high = 255.0;
};

struct NoisyImage {
  ImageGrid noisy;
  ImageGrid variance;
};

inline NoisyImage apply_noise(const ImageGrid& clean, const NoiseModel& model, std::uint64_t seed,
                              const NoiseOptions& opts = {}) {
  if (!clean.all_finite()) throw ArgumentError("apply_noise: clean image has non-finite values");
  NoisyImage out{clean, noise_variance_map(clean, model)};
  for (std::size_t i = 0; i < clean.size(); ++i) {
    double v = clean.data[i] + std::sqrt(out.variance.data[i]) * rng::normal(seed, rng::kNoiseStream, i);
    if (opts.clip) v = std::clamp(v, opts.clip_low, opts.clip_high);
    out.noisy.data[i] = v;
  }
  return out;
}

struct BuildOptions {
  NoiseOptions noise;
  /// Store NaN instead of 0 at unobserved pixels.
  bool poison_masked = false;
};

struct BuiltProblem {
  RestorationProblem problem;
  ImageGrid ground_truth;
};

inline BuiltProblem build_problem(const ImageGrid& clean, const MaskSpec& mask_spec,
                                  const NoiseModel& noise, std::uint64_t seed,
                                  const BuildOptions& opts = {}) {
  ImageGrid mask = make_mask(mask_spec, clean.width, clean.height);
  NoisyImage noisy = apply_noise(clean, noise, seed, opts.noise);
  RestorationProblem p{std::move(noisy.noisy), std::move(mask), std::move(noisy.variance)};
  const double fill = opts.poison_masked ? std::numeric_limits<double>::quiet_NaN() : 0.0;
  for (std::size_t i = 0; i < p.observed.size(); ++i) {
    if (p.mask.data[i] == 0.0) {
      p.observed.data[i] = fill;
      p.noise_var.data[i] = kMaskedNoiseVariance;
    }
  }
  return {std::move(p), clean};
}

/// High-resolution problem whose known samples are the low-resolution
/// pixels placed on the lattice (i*z, j*z).
inline RestorationProblem zoom_problem(const ImageGrid& lowres, int factor, double noise_var) {
  if (factor < 2 || factor > 4) throw ArgumentError("zoom_problem: factor must be 2, 3 or 4");
  const int w = lowres.width * factor, h = lowres.height * factor;
  RestorationProblem p{ImageGrid(w, h, 0.0), ImageGrid(w, h, 0.0), ImageGrid(w, h, kMaskedNoiseVariance)};
  const double v = std::max(noise_var, kMinNoiseVariance);
  for (int r = 0; r < lowres.height; ++r)
    for (int c = 0; c < lowres.width; ++c) {
      p.observed.at(r * factor, c * factor) = lowres.at(r, c);
      p.mask.at(r * factor, c * factor) = 1.0;
      p.noise_var.at(r * factor, c * factor) = v;
    }
  return p;
}

/// Plain decimation keeping pixels (i*z, j*z).
inline ImageGrid decimate(const ImageGrid& img, int factor) {
  ImageGrid out((img.width + factor - 1) / factor, (img.height + factor - 1) / factor);
  for (int r = 0; r < out.height; ++r)
    for (int c = 0; c < out.width; ++c) out.at(r, c) = img.at(r * factor, c * factor);
  return out;
}

}  // namespace hbe

#pragma once

// Single-shot HDR from a spatially varying exposure (SVE) capture.
//
// Raw model:   Z(p) ~ N(g_p C(p) + mu_R, alpha g_p C(p) + var_R),
//              g_p = alpha o_p a_p tau, clipped to [0, z_sat]
// Irradiance:  Y(p) = (Z(p) - mu_R) / g_p
// Exposure:    D(p) = 1 iff mu_R < Z(p) < z_sat
// Noise on Y:  (alpha g_p D(p) C(p) + var_R) / g_p^2
//
// Reconstruction restores Y with mask D and the noise variance evaluated at
// the current oracle irradiance.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hbe/degradation.hpp"
#include "hbe/image.hpp"
#include "hbe/random.hpp"
#include "hbe/solver.hpp"

namespace hbe {

struct CameraParams {
  double gain = 0.87;  // alpha
  ImageGrid prnu;      // a_p; empty means a_p = 1
  double tau = 1.0 / 200.0;
  double mu_R = 2048.0;
  double var_R = 30.0;
  double z_sat = 15000.0;

  void validate() const {
    if (!(gain > 0.0 && tau > 0.0 && var_R > 0.0))
      throw ArgumentError("CameraParams: gain, tau and var_R must be positive");
    if (!(z_sat > mu_R)) throw ArgumentError("CameraParams: z_sat must exceed mu_R");
    for (double a : prnu.data)
      if (!(a > 0.0)) throw ArgumentError("CameraParams: PRNU factors must be positive");
  }

  double prnu_at(std::size_t i) const { return prnu.empty() ? 1.0 : prnu.data[i]; }
};

enum class SveLayout { regular, nonregular };

struct SvePattern {
  ImageGrid gains;  // o_p
  std::vector<double> levels;
  SveLayout layout = SveLayout::nonregular;
  std::uint64_t seed = 0;
};

/// Regular: levels tiled over a k x k super-pixel (k = ceil(sqrt(L))) in
/// raster order. Non-regular: i.i.d. equiprobable levels.
inline SvePattern generate_sve_pattern(const std::vector<double>& levels, SveLayout layout, int width,
                                       int height, std::uint64_t seed) {
  if (levels.empty()) throw ArgumentError("generate_sve_pattern: no exposure levels");
  for (double l : levels)
    if (!(l > 0.0)) throw ArgumentError("generate_sve_pattern: levels must be positive");
  SvePattern p{ImageGrid(width, height), levels, layout, seed};
  const std::size_t count = levels.size();
  const int k = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count))));
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      std::size_t idx;
      if (layout == SveLayout::regular) {
        idx = static_cast<std::size_t>((r % k) * k + (c % k)) % count;
      } else {
        const double u = rng::uniform(seed, rng::kPatternStream, p.gains.index(r, c));
        idx = std::min(count - 1, static_cast<std::size_t>(u * static_cast<double>(count)));
      }
      p.gains.at(r, c) = levels[idx];
    }
  return p;
}

/// alpha * (o_p a_p) * tau, the raw units per unit irradiance.
inline double exposure_factor(const SvePattern& pattern, const CameraParams& cam, std::size_t i) {
  return cam.gain * (pattern.gains.data[i] * cam.prnu_at(i)) * cam.tau;
}

inline void check_hdr_shapes(const ImageGrid& img, const SvePattern& pattern, const CameraParams& cam,
                             const char* what) {
  require_same_shape(img, pattern.gains, what);
  if (!cam.prnu.empty()) require_same_shape(img, cam.prnu, what);
  cam.validate();
}

struct CaptureOptions {
  bool add_noise = true;
  bool clip = true;
};

inline ImageGrid simulate_sve_capture(const ImageGrid& irradiance, const SvePattern& pattern,
                                      const CameraParams& cam, std::uint64_t seed,
                                      const CaptureOptions& opts = {}) {
  check_hdr_shapes(irradiance, pattern, cam, "simulate_sve_capture");
  ImageGrid raw(irradiance.width, irradiance.height);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double c = irradiance.data[i];
    if (!(c >= 0.0)) throw ArgumentError("simulate_sve_capture: irradiance must be non-negative");
    const double g = exposure_factor(pattern, cam, i);
    double z = g * c + cam.mu_R;
    if (opts.add_noise) z += std::sqrt(cam.gain * g * c + cam.var_R) * rng::normal(seed, rng::kCaptureStream, i);
    if (opts.clip) z = std::clamp(z, 0.0, cam.z_sat);
    raw.data[i] = z;
  }
  return raw;
}

inline ImageGrid exposure_mask(const ImageGrid& raw, const CameraParams& cam) {
  ImageGrid d(raw.width, raw.height);
  for (std::size_t i = 0; i < raw.size(); ++i)
    d.data[i] = (raw.data[i] > cam.mu_R && raw.data[i] < cam.z_sat) ? 1.0 : 0.0;
  return d;
}

inline ImageGrid raw_to_irradiance(const ImageGrid& raw, const SvePattern& pattern, const CameraParams& cam) {
  check_hdr_shapes(raw, pattern, cam, "raw_to_irradiance");
  ImageGrid y(raw.width, raw.height);
  for (std::size_t i = 0; i < raw.size(); ++i) y.data[i] = (raw.data[i] - cam.mu_R) / exposure_factor(pattern, cam, i);
  return y;
}

/// Irradiance-domain noise variance with the oracle standing in for C.
inline ImageGrid irradiance_noise_var(const ImageGrid& oracle, const ImageGrid& mask, const SvePattern& pattern,
                                      const CameraParams& cam) {
  check_hdr_shapes(oracle, pattern, cam, "irradiance_noise_var");
  require_same_shape(oracle, mask, "irradiance_noise_var");
  ImageGrid var(oracle.width, oracle.height);
  for (std::size_t i = 0; i < var.size(); ++i) {
    const double g = exposure_factor(pattern, cam, i);
    const double c = std::max(oracle.data[i], 0.0);
    var.data[i] = (cam.gain * g * mask.data[i] * c + cam.var_R) / (g * g);
  }
  return var;
}

struct HdrOptions {
  /// The capture is known to be noise-free: the solver uses a negligible
  /// noise variance instead of the sensor model.
  bool assume_noiseless = false;
  double max_masked_fraction = 0.95;
  int threads = 1;
};

struct HdrReport {
  ImageGrid irradiance;
  ImageGrid mask;
  double masked_fraction = 0.0;
  std::size_t failed_groups = 0;
};

inline HdrReport reconstruct_hdr_detailed(const ImageGrid& raw, const SvePattern& pattern,
                                          const CameraParams& cam, const SolverConfig& cfg,
                                          const HdrOptions& opts = {}) {
  check_hdr_shapes(raw, pattern, cam, "reconstruct_hdr");
  HdrReport report;
  report.mask = exposure_mask(raw, cam);
  std::size_t masked = 0;
  for (double d : report.mask.data) masked += d == 0.0 ? 1 : 0;
  report.masked_fraction = static_cast<double>(masked) / static_cast<double>(raw.size());
  if (report.masked_fraction > opts.max_masked_fraction)
    throw StateError("reconstruct_hdr: " + std::to_string(100.0 * report.masked_fraction) +
                     "% of pixels are saturated or under-exposed; the scene exceeds the "
                     "dynamic range covered by the exposure pattern");

  ImageGrid y = raw_to_irradiance(raw, pattern, cam);
  RestorationProblem problem{y, report.mask, ImageGrid(raw.width, raw.height, kMaskedNoiseVariance)};
  RestoreOptions ropts;
  ropts.threads = opts.threads;
  if (opts.assume_noiseless) {
    problem.noise_var = ImageGrid(raw.width, raw.height, 1e-8);
  } else {
    ImageGrid plug = y;
    for (std::size_t i = 0; i < plug.size(); ++i)
      if (report.mask.data[i] == 0.0) plug.data[i] = 0.0;
    problem.noise_var = irradiance_noise_var(plug, report.mask, pattern, cam);
    ropts.refresh_noise = [&](const ImageGrid& oracle) {
      return irradiance_noise_var(oracle, report.mask, pattern, cam);
    };
  }
  RestoreReport rr = restore_detailed(problem, cfg, ropts);
  report.irradiance = std::move(rr.image);
  report.failed_groups = rr.failed_groups;
  return report;
}

inline ImageGrid reconstruct_hdr(const ImageGrid& raw, const SvePattern& pattern, const CameraParams& cam,
                                 const SolverConfig& cfg, const HdrOptions& opts = {}) {
  return reconstruct_hdr_detailed(raw, pattern, cam, cfg, opts).irradiance;
}

/// PSNR helper for linear HDR data: both images scaled so the reference
/// maximum maps to 255.
inline ImageGrid normalize_to_255(const ImageGrid& img, double reference_max) {
  ImageGrid out = img;
  for (double& v : out.data) v *= 255.0 / reference_max;
  return out;
}

/// Display-only log tone map: 255 log(1 + C/C_med) / log(1 + C_max/C_med).
inline ImageGrid tone_map_log(const ImageGrid& c) {
  std::vector<double> v;
  v.reserve(c.size());
  for (double x : c.data) v.push_back(std::max(x, 0.0));
  if (v.empty()) return c;
  std::vector<double> sorted = v;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(sorted.size() / 2), sorted.end());
  const double med = std::max(sorted[sorted.size() / 2], 1e-12);
  const double mx = std::max(*std::max_element(v.begin(), v.end()), 1e-12);
  ImageGrid out(c.width, c.height);
  const double denom = std::log1p(mx / med);
  for (std::size_t i = 0; i < v.size(); ++i)
    out.data[i] = denom > 0.0 ? std::clamp(255.0 * std::log1p(v[i] / med) / denom, 0.0, 255.0) : 0.0;
  return out;
}

}  // namespace hbe

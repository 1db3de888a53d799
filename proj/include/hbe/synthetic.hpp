#pragma once

// Procedural test images: periodic textures, piecewise-constant edges,
// band-limited fields, filtered noise and an HDR irradiance scene.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "hbe/image.hpp"
#include "hbe/random.hpp"

namespace hbe::synthetic {

/// Sinusoidal grating: 128 + amplitude * sin(2 pi (x cos a + y sin a) / period + phase).
inline ImageGrid stripes(int w, int h, double period, double angle, double amplitude = 80.0,
                         double phase = 0.0) {
  ImageGrid img(w, h);
  const double ca = std::cos(angle), sa = std::sin(angle);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      img.at(r, c) = 128.0 + amplitude * std::sin(2.0 * std::numbers::pi * (c * ca + r * sa) / period + phase);
  return img;
}

inline ImageGrid checkerboard(int w, int h, int cell, double low = 60.0, double high = 190.0) {
  ImageGrid img(w, h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) img.at(r, c) = ((r / cell + c / cell) % 2 == 0) ? low : high;
  return img;
}

/// Sum of two crossed gratings, a periodic texture with 2-D structure.
inline ImageGrid weave(int w, int h, double period, double angle) {
  ImageGrid a = stripes(w, h, period, angle, 45.0);
  ImageGrid b = stripes(w, h, period * 1.5, angle + std::numbers::pi / 2.0, 45.0, 1.0);
  for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += b.data[i] - 128.0;
  return a;
}

/// Piecewise-constant scene with straight and curved edges, 4x4
/// supersampled.
inline ImageGrid edges(int w, int h, std::uint64_t seed) {
  const double u0 = rng::uniform(seed, rng::kSceneStream, 0);
  const double u1 = rng::uniform(seed, rng::kSceneStream, 1);
  const double u2 = rng::uniform(seed, rng::kSceneStream, 2);
  const double theta = std::numbers::pi * u0;
  const double cx = w * (0.3 + 0.4 * u1), cy = h * (0.3 + 0.4 * u2);
  const double radius = 0.22 * std::min(w, h);
  ImageGrid img(w, h);
  const int ss = 4;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int a = 0; a < ss; ++a)
        for (int b = 0; b < ss; ++b) {
          const double x = c + (b + 0.5) / ss, y = r + (a + 0.5) / ss;
          double v = (-std::sin(theta) * (x - 0.5 * w) + std::cos(theta) * (y - 0.5 * h) > 0.0) ? 170.0 : 70.0;
          if ((x - cx) * (x - cx) + (y - cy) * (y - cy) < radius * radius) v = v > 100.0 ? 30.0 : 220.0;
          if (x > 0.7 * w && y > 0.65 * h && x < 0.92 * w) v = 120.0;
          acc += v;
        }
      img.at(r, c) = acc / (ss * ss);
    }
  return img;
}

/// Band-limited random field: a few low-frequency cosines.
inline ImageGrid bandlimited(int w, int h, std::uint64_t seed, double max_cycles = 6.0) {
  ImageGrid img(w, h, 128.0);
  for (int k = 0; k < 8; ++k) {
    const double fx = max_cycles * (2.0 * rng::uniform(seed, rng::kSceneStream, 10 + 4 * k) - 1.0) / w;
    const double fy = max_cycles * (2.0 * rng::uniform(seed, rng::kSceneStream, 11 + 4 * k) - 1.0) / h;
    const double ph = 2.0 * std::numbers::pi * rng::uniform(seed, rng::kSceneStream, 12 + 4 * k);
    const double amp = 12.0 + 10.0 * rng::uniform(seed, rng::kSceneStream, 13 + 4 * k);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        img.at(r, c) += amp * std::cos(2.0 * std::numbers::pi * (fx * c + fy * r) + ph);
  }
  return img;
}

/// White noise smoothed by a separable binomial filter, rescaled to mean
/// 128 and standard deviation `stddev`.
inline ImageGrid filtered_noise(int w, int h, std::uint64_t seed, int passes = 3, double stddev = 40.0) {
  ImageGrid img(w, h);
  for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = rng::normal(seed, rng::kSceneStream, i);
  ImageGrid tmp = img;
  for (int p = 0; p < passes; ++p) {
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        tmp.at(r, c) = 0.25 * img.at(r, std::max(c - 1, 0)) + 0.5 * img.at(r, c) +
                       0.25 * img.at(r, std::min(c + 1, w - 1));
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        img.at(r, c) = 0.25 * tmp.at(std::max(r - 1, 0), c) + 0.5 * tmp.at(r, c) +
                       0.25 * tmp.at(std::min(r + 1, h - 1), c);
  }
  double mean = 0.0, sq = 0.0;
  for (double v : img.data) mean += v;
  mean /= static_cast<double>(img.size());
  for (double v : img.data) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / static_cast<double>(img.size()));
  for (double& v : img.data) v = 128.0 + stddev * (v - mean) / sd;
  return img;
}

/// Linear-irradiance scene spanning about three decades: a dim shaded wall,
/// a bright window with mullions and a striped blind, and a lamp.
inline ImageGrid hdr_scene(int w, int h) {
  ImageGrid img(w, h);
  const int ss = 4;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int a = 0; a < ss; ++a)
        for (int b = 0; b < ss; ++b) {
          const double x = (c + (b + 0.5) / ss) / w, y = (r + (a + 0.5) / ss) / h;
          double v = 150.0 + 1200.0 * x * (1.0 - 0.5 * y);
          if (x > 0.45 && x < 0.9 && y > 0.1 && y < 0.55) {
            v = 9000.0 + 5000.0 * y;
            if (std::abs(x - 0.675) < 0.015 || std::abs(y - 0.325) < 0.015) v = 900.0;
            else if (y > 0.4) v *= 0.75 + 0.25 * std::sin(2.0 * std::numbers::pi * x * w / 9.0);
          }
          const double dx = x - 0.22, dy = y - 0.72;
          if (dx * dx + dy * dy < 0.01) v = 30000.0;
          acc += v;
        }
      img.at(r, c) = acc / (ss * ss);
    }
  return img;
}

}  // namespace hbe::synthetic

#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "hbe/image.hpp"

namespace hbe {

struct Metrics {
  double psnr = 0.0;  // +inf for identical images
  double mse = 0.0;
};

inline Metrics compute_psnr(const ImageGrid& a, const ImageGrid& b, double peak = 255.0) {
  require_same_shape(a, b, "compute_psnr");
  if (a.empty()) throw ArgumentError("compute_psnr: empty images");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    sum += d * d;
  }
  Metrics m;
  m.mse = sum / static_cast<double>(a.size());
  m.psnr = m.mse == 0.0 ? std::numeric_limits<double>::infinity()
                        : 20.0 * std::log10(peak / std::sqrt(m.mse));
  return m;
}

/// "inf" for identical images, fixed-point otherwise.
inline std::string format_psnr(double psnr) {
  if (std::isinf(psnr)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", psnr);
  return buf;
}

}  // namespace hbe

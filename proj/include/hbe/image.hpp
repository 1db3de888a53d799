#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "hbe/types.hpp"

namespace hbe {

/// Single-channel image, row-major.
struct ImageGrid {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  ImageGrid() = default;
  ImageGrid(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
    if (w < 0 || h < 0) throw ArgumentError("ImageGrid: negative dimension");
  }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  double& at(int row, int col) { return data[index(row, col)]; }
  double at(int row, int col) const { return data[index(row, col)]; }

  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(col);
  }

  bool same_shape(const ImageGrid& o) const { return width == o.width && height == o.height; }

  bool all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const ImageGrid&, const ImageGrid&) = default;
};

inline void require_same_shape(const ImageGrid& a, const ImageGrid& b, const char* what) {
  if (!a.same_shape(b))
    throw ArgumentError(std::string(what) + ": image dimensions differ (" +
                        std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                        std::to_string(b.width) + "x" + std::to_string(b.height) + ")");
}

/// Degraded observation Z = D C + N with per-pixel diag(D) and diag(Sigma_N).
struct RestorationProblem {
  ImageGrid observed;
  ImageGrid mask;
  ImageGrid noise_var;

  int width() const { return observed.width; }
  int height() const { return observed.height; }

  void validate() const {
    require_same_shape(observed, mask, "RestorationProblem");
    require_same_shape(observed, noise_var, "RestorationProblem");
    if (observed.empty()) throw ArgumentError("RestorationProblem: empty image");
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!(mask.data[i] >= 0.0 && mask.data[i] <= 1.0))
        throw ArgumentError("RestorationProblem: mask entries must lie in [0,1]");
      if (!(noise_var.data[i] > 0.0) || !std::isfinite(noise_var.data[i]))
        throw ArgumentError("RestorationProblem: noise variance must be positive");
    }
  }
};

}  // namespace hbe

#pragma once

// Image <-> patch plumbing: extraction, weighted similarity search in an
// oracle image, collaborative grouping and overlap-averaging aggregation.

#include <algorithm>
#include <cmath>
#include <compare>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hbe/image.hpp"
#include "hbe/types.hpp"

namespace hbe {

struct PatchIndex {
  int top = 0;
  int left = 0;
  auto operator<=>(const PatchIndex&) const = default;
};

struct SearchConfig {
  int patch_side = 8;
  int window_side = 25;
  double epsilon = 1.5;
  int step = 1;
  int min_group = 2;
  double unknown_weight = 0.01;

  void validate() const {
    if (patch_side < 1) throw ArgumentError("SearchConfig: patch_side must be >= 1");
    if (window_side < patch_side) throw ArgumentError("SearchConfig: window_side < patch_side");
    if (!(epsilon >= 1.0)) throw ArgumentError("SearchConfig: epsilon must be >= 1");
    if (step < 1) throw ArgumentError("SearchConfig: step must be >= 1");
    if (min_group < 1) throw ArgumentError("SearchConfig: min_group must be >= 1");
    if (!(unknown_weight > 0.0 && unknown_weight <= 1.0))
      throw ArgumentError("SearchConfig: unknown_weight must be in (0,1]");
  }
};

/// Similar patches sharing one model. members[0] is the anchor; the rest are
/// in ascending distance order.
struct PatchGroup {
  PatchIndex anchor;
  std::vector<PatchIndex> members;
  std::vector<double> distances;
};

inline bool patch_fits(int width, int height, PatchIndex idx, int side) {
  return idx.top >= 0 && idx.left >= 0 && idx.top + side <= height && idx.left + side <= width;
}

inline Patch extract_patch(const ImageGrid& image, PatchIndex idx, int side) {
  if (side < 1 || !patch_fits(image.width, image.height, idx, side))
    throw ArgumentError("extract_patch: patch at (" + std::to_string(idx.top) + "," +
                        std::to_string(idx.left) + ") side " + std::to_string(side) +
                        " out of bounds");
  Patch p(static_cast<long>(side) * side);
  long k = 0;
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) p[k++] = image.at(idx.top + r, idx.left + c);
  return p;
}

/// Weighted mean squared difference; pixels known in both patches weigh 1,
/// all others `unknown_weight`.
inline double patch_distance(const Patch& a, const Patch& b, const Vector& mask_a,
                             const Vector& mask_b, double unknown_weight) {
  if (a.size() != b.size() || mask_a.size() != a.size() || mask_b.size() != a.size())
    throw ArgumentError("patch_distance: length mismatch");
  if (!(unknown_weight > 0.0 && unknown_weight <= 1.0))
    throw ArgumentError("patch_distance: unknown_weight must be in (0,1]");
  double num = 0.0, den = 0.0;
  for (long j = 0; j < a.size(); ++j) {
    double w = (mask_a[j] > 0.0 && mask_b[j] > 0.0) ? 1.0 : unknown_weight;
    double d = a[j] - b[j];
    num += w * d * d;
    den += w;
  }
  return num / den;
}

/// Top-left corners of the restoration grid in raster order. The last row
/// and column are clamped so every pixel is covered.
inline std::vector<PatchIndex> anchor_grid(int width, int height, int side, int step) {
  if (side > width || side > height) throw ArgumentError("anchor_grid: patch larger than image");
  if (step < 1) throw ArgumentError("anchor_grid: step must be >= 1");
  auto axis = [&](int extent) {
    std::vector<int> v;
    for (int x = 0; x + side <= extent; x += step) v.push_back(x);
    if (v.back() != extent - side) v.push_back(extent - side);
    return v;
  };
  std::vector<PatchIndex> out;
  for (int r : axis(height))
    for (int c : axis(width)) out.push_back({r, c});
  return out;
}

inline PatchGroup find_similar(const ImageGrid& oracle, const ImageGrid& masks, PatchIndex anchor,
                               const SearchConfig& cfg) {
  cfg.validate();
  require_same_shape(oracle, masks, "find_similar");
  const int side = cfg.patch_side;
  if (!patch_fits(oracle.width, oracle.height, anchor, side))
    throw ArgumentError("find_similar: anchor out of bounds");

  const int half = cfg.window_side / 2;
  const int r0 = std::max(0, anchor.top - half);
  const int r1 = std::min(oracle.height - side, anchor.top + half);
  const int c0 = std::max(0, anchor.left - half);
  const int c1 = std::min(oracle.width - side, anchor.left + half);

  struct Candidate {
    double distance;
    PatchIndex idx;
  };
  std::vector<Candidate> cands;
  cands.reserve(static_cast<std::size_t>(r1 - r0 + 1) * static_cast<std::size_t>(c1 - c0 + 1));
  const double wu = cfg.unknown_weight;
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      if (r == anchor.top && c == anchor.left) continue;
      double num = 0.0, den = 0.0;
      for (int i = 0; i < side; ++i) {
        const std::size_t ra = oracle.index(anchor.top + i, anchor.left);
        const std::size_t rb = oracle.index(r + i, c);
        for (int j = 0; j < side; ++j) {
          const double w = (masks.data[ra + j] > 0.0 && masks.data[rb + j] > 0.0) ? 1.0 : wu;
          const double d = oracle.data[ra + j] - oracle.data[rb + j];
          num += w * d * d;
          den += w;
        }
      }
      cands.push_back({num / den, {r, c}});
    }
  }
  // Raster order is the generation order, so a stable sort breaks ties by
  // lowest raster index.
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.distance < b.distance; });

  PatchGroup g;
  g.anchor = anchor;
  g.members.push_back(anchor);
  g.distances.push_back(0.0);
  if (!cands.empty()) {
    const double threshold = cfg.epsilon * cands.front().distance;
    const std::size_t cap = static_cast<std::size_t>(cfg.window_side) * cfg.window_side;
    for (const auto& cand : cands) {
      if (cand.distance > threshold || g.members.size() >= cap) break;
      g.members.push_back(cand.idx);
      g.distances.push_back(cand.distance);
    }
  }
  if (static_cast<int>(g.members.size()) < cfg.min_group) {
    g.members.resize(1);
    g.distances.resize(1);
  }
  return g;
}

/// Greedy raster sweep: a group is dropped when its anchor already belongs
/// to an earlier kept group.
inline std::vector<PatchGroup> group_collaborative(const std::vector<PatchGroup>& groups) {
  std::vector<PatchGroup> kept;
  std::set<PatchIndex> covered;
  for (const auto& g : groups) {
    if (covered.contains(g.anchor)) continue;
    kept.push_back(g);
    covered.insert(g.members.begin(), g.members.end());
  }
  return kept;
}

/// Accumulates overlapping patch estimates and averages them uniformly.
class Aggregator {
 public:
  Aggregator(int width, int height, int side)
      : side_(side), sum_(width, height, 0.0), weight_(width, height, 0.0) {}

  void add(PatchIndex idx, const Patch& p) {
    if (p.size() != static_cast<long>(side_) * side_ || !patch_fits(sum_.width, sum_.height, idx, side_))
      throw ArgumentError("aggregate: patch out of bounds or wrong size");
    long k = 0;
    for (int r = 0; r < side_; ++r) {
      const std::size_t row = sum_.index(idx.top + r, idx.left);
      for (int c = 0; c < side_; ++c, ++k) {
        sum_.data[row + c] += p[k];
        weight_.data[row + c] += 1.0;
      }
    }
  }

  ImageGrid finish() const {
    ImageGrid out(sum_.width, sum_.height);
    for (int r = 0; r < out.height; ++r)
      for (int c = 0; c < out.width; ++c) {
        const std::size_t i = out.index(r, c);
        if (weight_.data[i] == 0.0)
          throw StateError("aggregate: pixel (" + std::to_string(r) + "," + std::to_string(c) +
                           ") is not covered by any patch");
        out.data[i] = sum_.data[i] / weight_.data[i];
      }
    return out;
  }

 private:
  int side_;
  ImageGrid sum_;
  ImageGrid weight_;
};

inline ImageGrid aggregate(const std::vector<std::pair<PatchIndex, Patch>>& patches, int width,
                           int height, int side) {
  Aggregator agg(width, height, side);
  for (const auto& [idx, p] : patches) agg.add(idx, p);
  return agg.finish();
}

}  // namespace hbe

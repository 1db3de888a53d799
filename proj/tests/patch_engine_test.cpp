#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "hbe/patch_engine.hpp"
#include "hbe/synthetic.hpp"

namespace hbe {
namespace {

TEST(ExtractPatch, ConstantImage) {
  ImageGrid img(10, 7, 7.0);
  for (int r = 0; r + 3 <= 7; ++r)
    for (int c = 0; c + 3 <= 10; ++c) EXPECT_EQ(extract_patch(img, {r, c}, 3), Patch::Constant(9, 7.0));
}

TEST(ExtractPatch, RowMajor) {
  ImageGrid img(2, 2);
  img.data = {1, 2, 3, 4};
  EXPECT_EQ(extract_patch(img, {0, 0}, 2), (Vector{{1.0, 2.0, 3.0, 4.0}}));
}

TEST(ExtractPatch, OutOfBounds) {
  ImageGrid img(2, 2);
  EXPECT_THROW(extract_patch(img, {1, 0}, 2), ArgumentError);
}

TEST(PatchDistance, HandValues) {
  Vector a{{0.0, 0.0}}, b{{2.0, 0.0}};
  Vector known = Vector::Ones(2);
  EXPECT_DOUBLE_EQ(patch_distance(a, a, known, known, 0.01), 0.0);
  EXPECT_DOUBLE_EQ(patch_distance(a, b, known, known, 0.01), 2.0);
  Vector first_unknown{{0.0, 1.0}};
  EXPECT_NEAR(patch_distance(a, b, first_unknown, known, 0.01), 4.0 * 0.01 / 1.01, 1e-15);
  EXPECT_NEAR(4.0 * 0.01 / 1.01, 0.0396, 1e-4);
}

TEST(PatchDistance, SymmetricNonNegative) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    Vector a(16), b(16), ma(16), mb(16);
    for (long j = 0; j < 16; ++j) {
      a[j] = 255 * u(rng);
      b[j] = 255 * u(rng);
      ma[j] = u(rng) < 0.5;
      mb[j] = u(rng) < 0.5;
    }
    const double d = patch_distance(a, b, ma, mb, 0.01);
    EXPECT_GE(d, 0.0);
    EXPECT_EQ(d, patch_distance(b, a, mb, ma, 0.01));
    EXPECT_GT(d, 0.0);
    EXPECT_EQ(patch_distance(a, a, ma, ma, 0.01), 0.0);
  }
}

SearchConfig small_search() {
  SearchConfig s;
  s.patch_side = 4;
  s.window_side = 9;
  return s;
}

TEST(FindSimilar, ConstantOracleAdmitsEverything) {
  ImageGrid oracle(20, 20, 5.0), masks(20, 20, 1.0);
  SearchConfig s = small_search();
  PatchGroup g = find_similar(oracle, masks, {8, 8}, s);
  EXPECT_EQ(g.members.size(), 81u);
  EXPECT_EQ(g.members.front(), (PatchIndex{8, 8}));
}

TEST(FindSimilar, ExactDuplicate) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 255.0);
  ImageGrid oracle(20, 20), masks(20, 20, 1.0);
  for (double& v : oracle.data) v = u(rng);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) oracle.at(10 + r, 11 + c) = oracle.at(8 + r, 8 + c);
  PatchGroup g = find_similar(oracle, masks, {8, 8}, small_search());
  ASSERT_EQ(g.members.size(), 2u);
  EXPECT_EQ(g.members[1], (PatchIndex{10, 11}));
  EXPECT_EQ(g.distances[1], 0.0);
}

// Vertical stripes of period 6 plus a little deterministic jitter, so
// same-phase positions are near copies and distances are distinct.
ImageGrid jittered_stripes() {
  ImageGrid img(40, 40);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0.0, 1.0);
  const double table[6] = {40.0, 120.0, 200.0, 220.0, 140.0, 60.0};
  for (int r = 0; r < 40; ++r)
    for (int c = 0; c < 40; ++c) img.at(r, c) = table[c % 6] + g(rng);
  return img;
}

TEST(FindSimilar, StripeTextureMatchesExhaustiveScan) {
  ImageGrid oracle = jittered_stripes();
  ImageGrid masks(40, 40, 1.0);
  SearchConfig s;
  s.patch_side = 6;
  s.window_side = 25;
  for (PatchIndex anchor : {PatchIndex{16, 17}, PatchIndex{0, 0}, PatchIndex{30, 34}}) {
    PatchGroup g = find_similar(oracle, masks, anchor, s);

    // Independent scan of every window position.
    const Patch a = extract_patch(oracle, anchor, 6);
    double nearest = INFINITY;
    std::vector<std::pair<double, PatchIndex>> all;
    for (int r = anchor.top - 12; r <= anchor.top + 12; ++r)
      for (int c = anchor.left - 12; c <= anchor.left + 12; ++c) {
        if (r < 0 || c < 0 || r + 6 > 40 || c + 6 > 40 || (r == anchor.top && c == anchor.left)) continue;
        const Patch b = extract_patch(oracle, {r, c}, 6);
        double ss = 0.0;
        for (long j = 0; j < 36; ++j) ss += (a[j] - b[j]) * (a[j] - b[j]);
        all.push_back({ss / 36.0, {r, c}});
        nearest = std::min(nearest, ss / 36.0);
      }
    std::set<PatchIndex> expect{anchor};
    for (const auto& [d, idx] : all)
      if (d <= s.epsilon * nearest) expect.insert(idx);
    std::set<PatchIndex> got(g.members.begin(), g.members.end());
    EXPECT_EQ(got, expect);
    EXPECT_GT(got.size(), 2u);
    for (const auto& m : g.members) EXPECT_EQ((m.left - anchor.left) % 6, 0);
    for (std::size_t k = 1; k < g.distances.size(); ++k) EXPECT_LE(g.distances[k], s.epsilon * g.distances[1]);
  }
}

TEST(FindSimilar, TiesBreakByRasterOrder) {
  ImageGrid oracle(20, 20, 5.0), masks(20, 20, 1.0);
  SearchConfig s = small_search();
  s.window_side = 5;
  PatchGroup g = find_similar(oracle, masks, {8, 8}, s);
  ASSERT_GE(g.members.size(), 3u);
  EXPECT_EQ(g.members[1], (PatchIndex{6, 6}));
  EXPECT_EQ(g.members[2], (PatchIndex{6, 7}));
}

TEST(FindSimilar, BelowMinGroupFallsBackToAnchor) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 255.0);
  ImageGrid oracle(20, 20), masks(20, 20, 1.0);
  for (double& v : oracle.data) v = u(rng);
  SearchConfig s = small_search();
  s.epsilon = 1.0;
  s.min_group = 5;
  PatchGroup g = find_similar(oracle, masks, {8, 8}, s);
  EXPECT_EQ(g.members.size(), 1u);
}

TEST(GroupCollaborative, SingletonsUnchanged) {
  std::vector<PatchGroup> groups;
  for (int i = 0; i < 5; ++i) groups.push_back({{i, 0}, {{i, 0}}, {0.0}});
  auto kept = group_collaborative(groups);
  ASSERT_EQ(kept.size(), 5u);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(kept[static_cast<std::size_t>(i)].anchor, (PatchIndex{i, 0}));
}

TEST(GroupCollaborative, MutualMembersMerge) {
  std::vector<PatchGroup> groups{{{0, 0}, {{0, 0}, {0, 1}}, {0, 1}}, {{0, 1}, {{0, 1}, {0, 0}}, {0, 1}}};
  EXPECT_EQ(group_collaborative(groups).size(), 1u);
}

TEST(GroupCollaborative, CoverageOnRandomGroups) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> pos(0, 9), size(1, 6);
  for (int t = 0; t < 20; ++t) {
    std::vector<PatchGroup> groups;
    for (int r = 0; r < 10; ++r)
      for (int c = 0; c < 10; ++c) {
        PatchGroup g{{r, c}, {{r, c}}, {0.0}};
        const int k = size(rng);
        for (int i = 1; i < k; ++i) g.members.push_back({pos(rng), pos(rng)});
        groups.push_back(g);
      }
    std::set<PatchIndex> covered;
    for (const auto& g : group_collaborative(groups)) covered.insert(g.members.begin(), g.members.end());
    for (const auto& g : groups) EXPECT_TRUE(covered.contains(g.anchor));
  }
}

TEST(Aggregate, WholeImagePatchIsIdentity) {
  Patch p(9);
  for (long j = 0; j < 9; ++j) p[j] = static_cast<double>(j);
  ImageGrid out = aggregate({{{0, 0}, p}}, 3, 3, 3);
  for (long j = 0; j < 9; ++j) EXPECT_EQ(out.data[static_cast<std::size_t>(j)], p[j]);
}

TEST(Aggregate, OverlapAverages) {
  ImageGrid out = aggregate({{{0, 0}, Patch::Constant(4, 2.0)}, {{0, 1}, Patch::Constant(4, 4.0)}}, 3, 2, 2);
  EXPECT_EQ(out.at(0, 0), 2.0);
  EXPECT_EQ(out.at(0, 1), 3.0);
  EXPECT_EQ(out.at(1, 1), 3.0);
  EXPECT_EQ(out.at(1, 2), 4.0);
}

TEST(Aggregate, DenseCoverageMatchesDirectAccumulation) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 255.0);
  const int w = 12, h = 9, side = 4;
  std::vector<std::pair<PatchIndex, Patch>> patches;
  std::vector<double> sum(static_cast<std::size_t>(w * h), 0.0), cnt(static_cast<std::size_t>(w * h), 0.0);
  for (PatchIndex idx : anchor_grid(w, h, side, 1)) {
    Patch p(side * side);
    for (long j = 0; j < p.size(); ++j) p[j] = u(rng);
    patches.push_back({idx, p});
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c) {
        sum[static_cast<std::size_t>((idx.top + r) * w + idx.left + c)] += p[r * side + c];
        cnt[static_cast<std::size_t>((idx.top + r) * w + idx.left + c)] += 1.0;
      }
  }
  ImageGrid out = aggregate(patches, w, h, side);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out.data[i], sum[i] / cnt[i]);

  for (auto& [idx, p] : patches) p *= 3.0;
  ImageGrid scaled = aggregate(patches, w, h, side);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(scaled.data[i], 3.0 * out.data[i], 1e-12);
}

TEST(Aggregate, UncoveredPixelIsStateError) {
  EXPECT_THROW(aggregate({{{0, 0}, Patch::Constant(4, 1.0)}}, 3, 3, 2), StateError);
}

TEST(AnchorGrid, ClampedLastRowAndColumn) {
  auto a = anchor_grid(10, 7, 4, 3);
  std::set<int> rows, cols;
  for (auto idx : a) {
    rows.insert(idx.top);
    cols.insert(idx.left);
  }
  EXPECT_EQ(rows, (std::set<int>{0, 3}));
  EXPECT_EQ(cols, (std::set<int>{0, 3, 6}));
}

}  // namespace
}  // namespace hbe

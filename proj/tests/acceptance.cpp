// Acceptance suite: one PASS/FAIL line per criterion with its runtime.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <thread>

#include "hbe/degradation.hpp"
#include "hbe/hdr_sve.hpp"
#include "hbe/io.hpp"
#include "hbe/metrics.hpp"
#include "hbe/solver.hpp"
#include "hbe/synthetic.hpp"
#include "test_util.hpp"

using namespace hbe;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ImageGrid camera_crop() { return read_image(std::string(HBE_TEST_DATA_DIR) + "/camera_crop128.pgm"); }

int all_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

Outcome objective_descent() {
  test::Rng rng(1001);
  const long sizes[] = {4, 9, 16};
  std::uniform_int_distribution<int> pick_m(1, 8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  InnerConfig cfg;
  cfg.max_iters = 30;
  cfg.rel_tol = 0.0;
  int bad = 0;
  double worst = -INFINITY;
  for (int t = 0; t < 200; ++t) {
    const long n = sizes[t % 3];
    const long m = pick_m(rng);
    auto group = test::random_group(n, m, 0.2 + 0.6 * u(rng), rng);
    long known = 0;
    for (long j = 0; j < n; ++j) known += group.front().mask[j] > 0.0;
    HyperpriorParams h = test::random_hyper(n, m, known, rng);
    MapSolution sol = minimize_f(group, h, cfg);
    for (std::size_t k = 1; k < sol.objective_trace.size(); ++k) {
      const double prev = sol.objective_trace[k - 1];
      const double rise = (sol.objective_trace[k] - prev) / std::max(1.0, std::abs(prev));
      worst = std::max(worst, rise);
      if (rise > 1e-9) {
        ++bad;
        break;
      }
    }
  }
  return {bad == 0, fmt("%d/200 non-monotone traces, largest relative rise %.2e", bad, worst)};
}

Outcome partial_optimum() {
  test::Rng rng(1002);
  std::uniform_int_distribution<int> pick_n(1, 9), pick_m(1, 5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  InnerConfig one;
  one.max_iters = 1;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const long n = pick_n(rng), m = pick_m(rng);
    auto group = test::random_group(n, m, 0.6 * u(rng), rng);
    HyperpriorParams h = test::random_hyper(n, m, n, rng);
    MapSolution sol = minimize_f(group, h, one);
    test::StackedSolution ref = test::stacked_quadratic_minimizer(group, h.sigma0.inverse(), h);
    worst = std::max(worst, test::max_rel_diff(sol.model.mean, ref.mean));
    for (long i = 0; i < m; ++i)
      worst = std::max(worst, test::max_rel_diff(sol.patches[static_cast<std::size_t>(i)],
                                                 ref.patches[static_cast<std::size_t>(i)]));
  }
  return {worst <= 1e-8, fmt("max relative deviation %.2e over 100 instances", worst)};
}

Outcome precision_stationarity() {
  test::Rng rng(1003);
  std::uniform_int_distribution<int> pick_n(1, 16), pick_m(1, 8);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0.0;
  int not_spd = 0;
  for (int t = 0; t < 100; ++t) {
    const long n = pick_n(rng), m = pick_m(rng);
    auto group = test::random_group(n, m, 0.4, rng);
    HyperpriorParams h = test::random_hyper(n, m, n, rng);
    MapSolution sol = minimize_f(group, h);
    const Matrix& lam = sol.model.precision;
    if (Eigen::LLT<Matrix>(lam).info() != Eigen::Success) ++not_spd;
    const double f0 = objective_f(group, sol.patches, sol.model, h);
    for (int d = 0; d < 10; ++d) {
      Matrix e(n, n);
      for (long a = 0; a < n; ++a)
        for (long b = 0; b < n; ++b) e(a, b) = g(rng);
      e = (0.5 * (e + e.transpose())).eval();
      e /= e.norm();
      // A step relative to the smallest eigenvalue keeps the truncation error
      // of the central difference small for ill-conditioned precisions.
      const double step = 1e-5 * Eigen::SelfAdjointEigenSolver<Matrix>(lam).eigenvalues().minCoeff();
      const double fp = objective_f(group, sol.patches, {sol.model.mean, lam + step * e}, h);
      const double fm = objective_f(group, sol.patches, {sol.model.mean, lam - step * e}, h);
      const double slope = std::abs(fp - fm) / (2.0 * step) * lam.norm();
      worst = std::max(worst, slope / (1.0 + std::abs(f0)));
    }
  }
  return {worst <= 1e-5 && not_spd == 0,
          fmt("max scaled derivative %.2e (x(1+|f|)), %d non-SPD precisions", worst, not_spd)};
}

Outcome denoising() {
  const ImageGrid clean = camera_crop();
  RestoreOptions opts;
  opts.threads = all_threads();
  double in = 0.0, out = 0.0;
  for (int r = 0; r < 10; ++r) {
    BuiltProblem bp = build_problem(clean, MaskSpec{RandomMask{0.0}, 1}, ConstantNoise{30.0},
                                    1000 + static_cast<std::uint64_t>(r));
    in += compute_psnr(bp.problem.observed, clean).psnr;
    out += compute_psnr(restore(bp.problem, SolverConfig::denoising(), opts), clean).psnr;
  }
  in /= 10.0;
  out /= 10.0;
  return {out >= in + 2.5, fmt("camera 128x128, var 30: input %.3f dB, output %.3f dB, gain %+.3f dB", in, out,
                               out - in)};
}

Outcome interpolation() {
  RestoreOptions opts;
  opts.threads = all_threads();
  int wins = 0;
  double min_gain = INFINITY;
  for (int k = 0; k < 20; ++k) {
    const ImageGrid clean = k < 10 ? synthetic::stripes(64, 64, 5.0 + 0.5 * k, std::numbers::pi * k / 10.0)
                                   : synthetic::edges(64, 64, static_cast<std::uint64_t>(k));
    const auto seed = static_cast<std::uint64_t>(100 + k);
    BuiltProblem bp = build_problem(clean, MaskSpec{RandomMask{0.7}, seed}, ConstantNoise{0.0}, seed);
    const double fill = compute_psnr(smooth_fill(bp.problem), clean).psnr;
    const double hbe = compute_psnr(restore(bp.problem, SolverConfig::interpolation(), opts), clean).psnr;
    wins += hbe - fill >= 2.0 ? 1 : 0;
    min_gain = std::min(min_gain, hbe - fill);
  }
  return {wins >= 18, fmt("%d/20 cases at least 2 dB over smooth fill, smallest gain %+.2f dB", wins, min_gain)};
}

Outcome known_pixel_fidelity() {
  const ImageGrid clean = camera_crop();
  RestoreOptions opts;
  opts.threads = all_threads();
  BuiltProblem id = build_problem(clean, MaskSpec{RandomMask{0.0}, 1}, ConstantNoise{0.0}, 1);
  const double psnr = compute_psnr(restore(id.problem, SolverConfig::interpolation(), opts), clean).psnr;
  BuiltProblem half = build_problem(clean, MaskSpec{RandomMask{0.5}, 2}, ConstantNoise{0.0}, 2);
  const ImageGrid out = restore(half.problem, SolverConfig::interpolation(), opts);
  double dev = 0.0, count = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (half.problem.mask.data[i] > 0.0) {
      dev += std::abs(out.data[i] - clean.data[i]);
      count += 1.0;
    }
  dev /= count;
  return {psnr >= 60.0 && dev < 1.0,
          fmt("identity %s dB, mean known-pixel deviation %.4f", format_psnr(psnr).c_str(), dev)};
}

Outcome hdr_round_trip() {
  const ImageGrid c = synthetic::hdr_scene(128, 128);
  const SvePattern pattern = generate_sve_pattern({1.0, 8.0, 64.0, 512.0}, SveLayout::nonregular, 128, 128, 7);
  const SolverConfig cfg = SolverConfig::interpolation();
  HdrOptions opts;
  opts.threads = all_threads();

  CameraParams ideal;
  ideal.z_sat = std::numeric_limits<double>::infinity();
  const ImageGrid raw_a = simulate_sve_capture(c, pattern, ideal, 0, CaptureOptions{false, false});
  HdrOptions noiseless = opts;
  noiseless.assume_noiseless = true;
  const ImageGrid rec_a = reconstruct_hdr(raw_a, pattern, ideal, cfg, noiseless);
  double rel = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) rel = std::max(rel, std::abs(rec_a.data[i] - c.data[i]) / c.data[i]);

  const CameraParams cam;
  const ImageGrid raw_b = simulate_sve_capture(c, pattern, cam, 8);
  HdrReport rep = reconstruct_hdr_detailed(raw_b, pattern, cam, cfg, opts);
  const double peak = *std::max_element(c.data.begin(), c.data.end());
  const double psnr = compute_psnr(normalize_to_255(rep.irradiance, peak), normalize_to_255(c, peak)).psnr;
  return {rel <= 1e-3 && psnr >= 30.0,
          fmt("(a) max relative error %.2e; (b) %.2f dB with %.1f%% of pixels masked", rel, psnr,
              100.0 * rep.masked_fraction)};
}

Outcome determinism() {
  const ImageGrid clean = synthetic::edges(48, 48, 21);
  BuiltProblem bp = build_problem(clean, MaskSpec{RandomMask{0.5}, 3}, ConstantNoise{10.0}, 3);
  std::vector<ImageGrid> outs;
  for (int t : {1, 2, 4, 8}) {
    RestoreOptions o;
    o.threads = t;
    outs.push_back(restore(bp.problem, SolverConfig::interpolation(), o));
  }
  setenv("HBE_DETERMINISTIC", "1", 1);
  RestoreOptions many;
  many.threads = 8;
  outs.push_back(restore(bp.problem, SolverConfig::interpolation(), many));
  unsetenv("HBE_DETERMINISTIC");
  bool same = true;
  for (const auto& o : outs) same = same && o == outs.front();

  int leaks = 0;
  test::Rng rng(1008);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const ImageGrid img = t % 2 ? synthetic::edges(24, 24, static_cast<std::uint64_t>(t))
                                : synthetic::filtered_noise(24, 24, static_cast<std::uint64_t>(t));
    const MaskSpec mask{RandomMask{0.2 + 0.7 * u(rng)}, static_cast<std::uint64_t>(t)};
    const ConstantNoise noise{30.0 * u(rng)};
    BuildOptions poison;
    poison.poison_masked = true;
    BuiltProblem clean_run = build_problem(img, mask, noise, static_cast<std::uint64_t>(t));
    BuiltProblem nan_run = build_problem(img, mask, noise, static_cast<std::uint64_t>(t), poison);
    const ImageGrid a = restore(clean_run.problem, SolverConfig::interpolation());
    const ImageGrid b = restore(nan_run.problem, SolverConfig::interpolation());
    if (!b.all_finite() || !(a == b)) ++leaks;
  }
  return {same && leaks == 0, fmt("thread counts 1/2/4/8 and deterministic mode %s; %d/50 NaN-poisoned problems leaked",
                                  same ? "byte-identical" : "DIFFER", leaks)};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"objective descent", objective_descent},
      {"partial optimum matches stacked solve", partial_optimum},
      {"precision stationarity", precision_stationarity},
      {"denoising improvement", denoising},
      {"interpolation dominance", interpolation},
      {"known-pixel fidelity", known_pixel_fidelity},
      {"HDR round trip", hdr_round_trip},
      {"determinism and non-leakage", determinism},
  };
  int failed = 0, index = 0;
  for (const auto& [name, fn] : criteria) {
    ++index;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += o.pass ? 0 : 1;
    std::printf("criterion %d %-38s %s  %8.2f s  %s\n", index, name, o.pass ? "PASS" : "FAIL", secs, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/8 criteria passed\n", 8 - failed);
  return failed;
}

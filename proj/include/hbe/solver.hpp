#pragma once

// Full restoration pipeline: oracle initialization, then for each outer
// iteration a raster sweep over not-yet-restored anchors (collaborative
// grouping), per-group hyperparameter estimation from the oracle, joint MAP
// restoration of the group, and aggregation into the next oracle.

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "hbe/core_model.hpp"
#include "hbe/image.hpp"
#include "hbe/init_oracle.hpp"
#include "hbe/parallel.hpp"
#include "hbe/patch_engine.hpp"

namespace hbe {

struct SolverConfig {
  double alpha_low = 0.5;
  double alpha_high = 1.0;
  /// Fraction applied to both P/n and M/m_nominal in the kappa/nu rule.
  double pm_threshold = 0.5;
  double m_nominal = 30.0;
  int outer_iters = 3;
  InnerConfig inner;
  SearchConfig search;
  InitMode init_mode = InitMode::directional_gmm;

  static SolverConfig interpolation() { return {}; }

  static SolverConfig denoising() {
    SolverConfig c;
    c.alpha_low = 100.0;
    c.alpha_high = 100.0;
    return c;
  }

  void validate() const {
    if (!(alpha_low > 0.0 && alpha_high > 0.0)) throw ArgumentError("SolverConfig: alphas must be positive");
    if (!(alpha_low <= alpha_high)) throw ArgumentError("SolverConfig: alpha_low must not exceed alpha_high");
    if (!(pm_threshold > 0.0 && pm_threshold <= 1.0))
      throw ArgumentError("SolverConfig: pm_threshold must be in (0,1]");
    if (!(m_nominal > 0.0)) throw ArgumentError("SolverConfig: m_nominal must be positive");
    if (outer_iters < 1) throw ArgumentError("SolverConfig: outer_iters must be >= 1");
    if (inner.max_iters < 1) throw ArgumentError("SolverConfig: inner max_iters must be >= 1");
    if (!(inner.rel_tol >= 0.0)) throw ArgumentError("SolverConfig: inner rel_tol must be >= 0");
    search.validate();
  }
};

/// Ridge added to every estimated prior covariance.
inline double covariance_ridge(const Matrix& s) {
  const double per_pixel = s.trace() / static_cast<double>(s.rows());
  return 1e-6 * std::max(per_pixel, 1.0);
}

inline ImageGrid init_oracle(const RestorationProblem& problem, const SolverConfig& cfg) {
  return init_oracle(problem, cfg.init_mode, cfg.search);
}

struct HyperpriorEstimate {
  HyperpriorParams params;
  /// Fewer than two patches: mu0 is the single patch, Sigma0 = ridge * Id.
  bool single_patch = false;
};

/// Sample mean and unbiased sample covariance (plus ridge) of oracle patches.
inline HyperpriorEstimate estimate_hyperparams(std::span<const Patch> oracle_patches, double kappa,
                                               double nu) {
  if (oracle_patches.empty()) throw ArgumentError("estimate_hyperparams: no patches");
  const long n = oracle_patches.front().size();
  for (const auto& p : oracle_patches)
    if (p.size() != n) throw ArgumentError("estimate_hyperparams: dimension mismatch");
  const long m = static_cast<long>(oracle_patches.size());

  HyperpriorEstimate out;
  out.params.kappa = kappa;
  out.params.nu = nu;
  if (m < 2) {
    out.params.mu0 = oracle_patches.front();
    out.params.sigma0 = covariance_ridge(Matrix::Zero(n, n)) * Matrix::Identity(n, n);
    out.single_patch = true;
    return out;
  }
  Matrix data(n, m);
  for (long j = 0; j < m; ++j) data.col(j) = oracle_patches[static_cast<std::size_t>(j)];
  out.params.mu0 = data.rowwise().mean();
  data.colwise() -= out.params.mu0;
  Matrix s = symmetrized(data * data.transpose() / static_cast<double>(m - 1));
  s.diagonal().array() += covariance_ridge(s);
  out.params.sigma0 = std::move(s);
  return out;
}

struct KappaNu {
  double kappa;
  double nu;
};

/// kappa = M alpha, nu = M alpha + n, with alpha_low only when both the
/// group and the known-pixel count are large.
inline KappaNu kappa_nu_rule(long group_size, long known_pixels, long n, const SolverConfig& cfg) {
  if (group_size < 1) throw ArgumentError("kappa_nu_rule: M must be >= 1");
  if (known_pixels < 0 || known_pixels > n) throw ArgumentError("kappa_nu_rule: P must be in [0, n]");
  const bool rich = static_cast<double>(known_pixels) > cfg.pm_threshold * static_cast<double>(n) &&
                    static_cast<double>(group_size) > cfg.pm_threshold * cfg.m_nominal;
  const double alpha = rich ? cfg.alpha_low : cfg.alpha_high;
  const double kappa = static_cast<double>(group_size) * alpha;
  return {kappa, kappa + static_cast<double>(n)};
}

struct RestoreOptions {
  int threads = 1;
  /// Recomputes the noise variance map from the current oracle before each
  /// outer iteration (signal-dependent noise).
  std::function<ImageGrid(const ImageGrid& oracle)> refresh_noise;
  /// Skip init_oracle and start from this image.
  std::optional<ImageGrid> initial_oracle;
  bool keep_iterates = false;
};

struct RestoreReport {
  ImageGrid image;
  ImageGrid initial_oracle;
  std::vector<ImageGrid> iterates;
  std::vector<std::size_t> groups_per_iteration;
  std::size_t failed_groups = 0;
  std::size_t single_patch_groups = 0;
};

namespace detail {

struct GroupResult {
  std::vector<Patch> patches;
  bool failed = false;
  bool single_patch = false;
};

inline GroupResult solve_group(const RestorationProblem& problem, const ImageGrid& oracle,
                               const PatchGroup& group, const SolverConfig& cfg) {
  const int side = cfg.search.patch_side;
  const long n = static_cast<long>(side) * side;
  std::vector<Patch> oracle_patches;
  std::vector<DegradedPatch> degraded;
  oracle_patches.reserve(group.members.size());
  degraded.reserve(group.members.size());
  for (PatchIndex idx : group.members) {
    oracle_patches.push_back(extract_patch(oracle, idx, side));
    degraded.push_back(extract_degraded(problem, idx, side));
  }
  GroupResult res;
  try {
    long known = 0;
    for (long j = 0; j < n; ++j) known += degraded.front().mask[j] > 0.0 ? 1 : 0;
    KappaNu kn = kappa_nu_rule(static_cast<long>(group.members.size()), known, n, cfg);
    HyperpriorEstimate hyper = estimate_hyperparams(oracle_patches, kn.kappa, kn.nu);
    res.single_patch = hyper.single_patch;
    MapSolution sol = minimize_f(degraded, hyper.params, cfg.inner);
    for (const auto& p : sol.patches)
      if (!p.allFinite()) throw NumericalError("solve_group: non-finite patch estimate");
    res.patches = std::move(sol.patches);
  } catch (const NumericalError&) {
    res.failed = true;
  } catch (const DomainError&) {
    res.failed = true;
  }
  if (res.failed) res.patches = std::move(oracle_patches);
  return res;
}

}  // namespace detail

inline RestoreReport restore_detailed(const RestorationProblem& input, const SolverConfig& cfg,
                                      const RestoreOptions& opts = {}) {
  input.validate();
  cfg.validate();
  const int side = cfg.search.patch_side;
  if (side > input.width() || side > input.height())
    throw ArgumentError("restore: image smaller than the patch size");

  RestorationProblem problem = input;
  RestoreReport report;
  ImageGrid oracle;
  if (opts.initial_oracle) {
    require_same_shape(*opts.initial_oracle, problem.observed, "restore: initial oracle");
    oracle = *opts.initial_oracle;
  } else {
    oracle = init_oracle(problem, cfg.init_mode, cfg.search);
  }
  report.initial_oracle = oracle;

  const auto anchors = anchor_grid(problem.width(), problem.height(), side, cfg.search.step);
  const int threads = resolve_threads(opts.threads);
  for (int it = 0; it < cfg.outer_iters; ++it) {
    if (opts.refresh_noise) {
      problem.noise_var = opts.refresh_noise(oracle);
      problem.validate();
    }
    // Raster sweep: anchors already restored as a member of an earlier
    // group are skipped.
    std::vector<char> restored(problem.observed.size(), 0);
    std::vector<PatchGroup> groups;
    for (PatchIndex a : anchors) {
      if (restored[problem.observed.index(a.top, a.left)]) continue;
      PatchGroup g = find_similar(oracle, problem.mask, a, cfg.search);
      for (PatchIndex m : g.members) restored[problem.observed.index(m.top, m.left)] = 1;
      groups.push_back(std::move(g));
    }
    std::vector<detail::GroupResult> results(groups.size());
    parallel_for(groups.size(), threads, [&](std::size_t g) {
      results[g] = detail::solve_group(problem, oracle, groups[g], cfg);
    });
    Aggregator agg(problem.width(), problem.height(), side);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (results[g].failed) ++report.failed_groups;
      if (results[g].single_patch) ++report.single_patch_groups;
      for (std::size_t k = 0; k < groups[g].members.size(); ++k)
        agg.add(groups[g].members[k], results[g].patches[k]);
    }
    report.groups_per_iteration.push_back(groups.size());
    oracle = agg.finish();
    if (opts.keep_iterates) report.iterates.push_back(oracle);
  }
  report.image = std::move(oracle);
  return report;
}

inline ImageGrid restore(const RestorationProblem& problem, const SolverConfig& cfg,
                         const RestoreOptions& opts = {}) {
  return restore_detailed(problem, cfg, opts).image;
}

}  // namespace hbe

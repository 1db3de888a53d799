#pragma once

// Joint MAP estimation of a group of patches and their shared Gaussian
// model under a Normal-Wishart hyperprior.
//
// For a group {Z_i} of M degraded patches (Z_i = D_i C_i + N_i with diagonal
// D_i and diagonal noise covariance), the negative log posterior is
//
//   f(C, mu, L) = 1/2 sum_i (Z_i - D_i C_i)' N_i^-1 (Z_i - D_i C_i)
//               - (nu - n + M)/2 log|L|
//               + 1/2 sum_i (C_i - mu)' L (C_i - mu)
//               + kappa/2 (mu - mu0)' L (mu - mu0)
//               + 1/2 trace(nu S0 L)
//
// It is biconvex in (C, mu) and L. minimize_f alternates the two closed-form
// partial minimizers, which makes the objective non-increasing.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hbe/linalg.hpp"
#include "hbe/types.hpp"

namespace hbe {

/// One observed patch: Z (`observed`), diag(D) (`mask`) and diag(Sigma_N)
/// (`noise_var`). Observed values where mask == 0 are never read.
struct DegradedPatch {
  Vector observed;
  Vector mask;
  Vector noise_var;

  long size() const { return observed.size(); }

  void validate() const {
    if (observed.size() < 1)
      throw ArgumentError("DegradedPatch: empty patch");
    if (mask.size() != observed.size() || noise_var.size() != observed.size())
      throw ArgumentError("DegradedPatch: observed/mask/noise_var length mismatch");
    for (long j = 0; j < size(); ++j) {
      if (!(mask[j] >= 0.0 && mask[j] <= 1.0))
        throw ArgumentError("DegradedPatch: mask entry outside [0,1]");
      if (!(noise_var[j] > 0.0) || !std::isfinite(noise_var[j]))
        throw ArgumentError("DegradedPatch: noise variance must be positive");
    }
  }
};

struct GaussianModel {
  Vector mean;
  Matrix precision;
};

/// Normal-Wishart parameters (mu0, Sigma0, kappa, nu).
struct HyperpriorParams {
  Vector mu0;
  Matrix sigma0;
  double kappa = 1.0;
  double nu = 1.0;

  long dim() const { return mu0.size(); }

  void validate() const {
    const long n = dim();
    if (n < 1) throw ArgumentError("HyperpriorParams: empty mean");
    if (sigma0.rows() != n || sigma0.cols() != n)
      throw ArgumentError("HyperpriorParams: sigma0 shape mismatch");
    if (!(kappa > 0.0)) throw ArgumentError("HyperpriorParams: kappa must be > 0");
    if (!(nu > static_cast<double>(n) - 1.0))
      throw ArgumentError("HyperpriorParams: nu must exceed n - 1");
  }
};

struct InnerConfig {
  int max_iters = 30;
  double rel_tol = 1e-6;
};

struct MapSolution {
  std::vector<Patch> patches;
  GaussianModel model;
  std::vector<double> objective_trace;
  int iterations = 0;
};

/// The gain A = L^-1 D' (D L^-1 D' + Sigma_N)^-1 of one patch. Columns of A
/// at zero mask entries are structurally zero, so only the columns on the
/// observed support are stored.
class Gain {
 public:
  Gain() = default;
  Gain(long n, std::vector<long> support, Matrix columns)
      : n_(n), support_(std::move(support)), columns_(std::move(columns)) {}

  long size() const { return n_; }
  const std::vector<long>& support() const { return support_; }
  const Matrix& columns() const { return columns_; }

  Matrix dense() const {
    Matrix a = Matrix::Zero(n_, n_);
    for (std::size_t k = 0; k < support_.size(); ++k)
      a.col(support_[k]) = columns_.col(static_cast<long>(k));
    return a;
  }

  /// A x, reading x only on the support.
  Vector apply(const Vector& x) const {
    Vector xs(static_cast<long>(support_.size()));
    for (std::size_t k = 0; k < support_.size(); ++k) xs[static_cast<long>(k)] = x[support_[k]];
    return columns_ * xs;
  }

  /// A (Z - D mu), reading Z only on the support.
  Vector apply_residual(const DegradedPatch& p, const Vector& mu) const {
    Vector r(static_cast<long>(support_.size()));
    for (std::size_t k = 0; k < support_.size(); ++k) {
      long j = support_[k];
      r[static_cast<long>(k)] = p.observed[j] - p.mask[j] * mu[j];
    }
    return columns_ * r;
  }

  /// acc += weight * A D
  void add_times_mask(Matrix& acc, const Vector& mask, double weight = 1.0) const {
    for (std::size_t k = 0; k < support_.size(); ++k) {
      long j = support_[k];
      acc.col(j) += (weight * mask[j]) * columns_.col(static_cast<long>(k));
    }
  }

 private:
  long n_ = 0;
  std::vector<long> support_;
  Matrix columns_;
};

namespace detail {

/// Gain from the covariance L^-1 directly.
inline Gain gain_from_covariance(const Matrix& cov, const Vector& mask,
                                 const Vector& noise_var) {
  const long n = cov.rows();
  std::vector<long> support;
  for (long j = 0; j < n; ++j)
    if (mask[j] != 0.0) support.push_back(j);
  const long p = static_cast<long>(support.size());
  if (p == 0) return Gain(n, {}, Matrix(n, 0));

  // K = D_S cov_SS D_S + N_S ; B = D_S cov_S:
  Matrix k(p, p);
  Matrix b(p, n);
  for (long a = 0; a < p; ++a) {
    const long ja = support[static_cast<std::size_t>(a)];
    b.row(a) = mask[ja] * cov.row(ja);
    for (long c = 0; c < p; ++c) {
      const long jc = support[static_cast<std::size_t>(c)];
      k(a, c) = mask[ja] * cov(ja, jc) * mask[jc];
    }
    k(a, a) += noise_var[ja];
  }
  k = symmetrized(k);
  Eigen::LLT<Matrix> llt(k);
  if (llt.info() != Eigen::Success || !k.allFinite()) {
    long piv = failing_cholesky_pivot(k);
    long at = piv >= 0 ? support[static_cast<std::size_t>(piv)] : -1;
    throw NumericalError("gain: observation covariance not SPD at pixel " +
                             std::to_string(at),
                         at);
  }
  Matrix cols = llt.solve(b).transpose();
  return Gain(n, std::move(support), std::move(cols));
}

inline std::uint64_t hash_bytes(const double* data, long count, std::uint64_t h) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < static_cast<std::size_t>(count) * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Gains of a group, shared between patches with identical mask and noise.
struct GainSet {
  std::vector<Gain> unique;
  std::vector<std::size_t> of_patch;
  std::vector<std::size_t> representative;  // a patch index using unique[u]
  std::vector<double> multiplicity;

  const Gain& operator[](std::size_t i) const { return unique[of_patch[i]]; }
};

inline GainSet build_gains(const Matrix& cov, std::span<const DegradedPatch> group) {
  GainSet set;
  set.of_patch.resize(group.size());
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> seen;
  for (std::size_t i = 0; i < group.size(); ++i) {
    const auto& p = group[i];
    std::uint64_t h = hash_bytes(p.mask.data(), p.size(), 0xcbf29ce484222325ULL);
    h = hash_bytes(p.noise_var.data(), p.size(), h);
    auto& bucket = seen[h];
    bool found = false;
    for (std::size_t u : bucket) {
      const auto& q = group[set.representative[u]];
      if (q.mask == p.mask && q.noise_var == p.noise_var) {
        set.of_patch[i] = u;
        set.multiplicity[u] += 1.0;
        found = true;
        break;
      }
    }
    if (found) continue;
    set.unique.push_back(gain_from_covariance(cov, p.mask, p.noise_var));
    set.representative.push_back(i);
    set.multiplicity.push_back(1.0);
    set.of_patch[i] = set.unique.size() - 1;
    bucket.push_back(set.unique.size() - 1);
  }
  return set;
}

inline GainSet wrap_gains(std::span<const Gain> gains) {
  GainSet set;
  set.unique.assign(gains.begin(), gains.end());
  for (std::size_t i = 0; i < gains.size(); ++i) {
    set.of_patch.push_back(i);
    set.representative.push_back(i);
    set.multiplicity.push_back(1.0);
  }
  return set;
}

inline Vector solve_mean(std::span<const DegradedPatch> group, const GainSet& gains,
                         const HyperpriorParams& hyper) {
  const long n = hyper.dim();
  if (group.empty()) return hyper.mu0;
  Matrix sys = hyper.kappa * Matrix::Identity(n, n);
  for (std::size_t u = 0; u < gains.unique.size(); ++u)
    gains.unique[u].add_times_mask(sys, group[gains.representative[u]].mask,
                                   gains.multiplicity[u]);
  Vector rhs = hyper.kappa * hyper.mu0;
  for (std::size_t i = 0; i < group.size(); ++i) rhs += gains[i].apply(group[i].observed);
  if (!sys.allFinite() || !rhs.allFinite())
    throw NumericalError("update_mean: non-finite system");
  Vector mu = sys.partialPivLu().solve(rhs);
  if (!mu.allFinite()) throw NumericalError("update_mean: singular system");
  return mu;
}

inline std::vector<Patch> solve_patches(std::span<const DegradedPatch> group,
                                        const GainSet& gains, const Vector& mean) {
  std::vector<Patch> out;
  out.reserve(group.size());
  for (std::size_t i = 0; i < group.size(); ++i)
    out.push_back(gains[i].apply_residual(group[i], mean) + mean);
  return out;
}

/// Sigma = L^-1 minimizing f for fixed (C, mu).
inline Matrix update_covariance(std::span<const Patch> patches, const Vector& mean,
                                const HyperpriorParams& hyper) {
  const long n = hyper.dim();
  const double m = static_cast<double>(patches.size());
  const double dof = hyper.nu + m - static_cast<double>(n);
  if (!(dof > 0.0))
    throw ArgumentError("update_precision: nu + M - n must be positive");
  Matrix s = hyper.nu * hyper.sigma0;
  Vector d = mean - hyper.mu0;
  s.noalias() += hyper.kappa * d * d.transpose();
  if (!patches.empty()) {
    Matrix centered(n, static_cast<long>(patches.size()));
    for (std::size_t i = 0; i < patches.size(); ++i)
      centered.col(static_cast<long>(i)) = patches[i] - mean;
    s.noalias() += centered * centered.transpose();
  }
  return symmetrized(s / dof);
}

struct ObjectiveTerms {
  double data = 0.0;
  double log_det = 0.0;
  double spread = 0.0;
  double mean_prior = 0.0;
  double trace = 0.0;
  double total() const { return data + log_det + spread + mean_prior + trace; }
};

inline double data_term(std::span<const DegradedPatch> group, std::span<const Patch> patches) {
  double s = 0.0;
  for (std::size_t i = 0; i < group.size(); ++i) {
    const auto& p = group[i];
    for (long j = 0; j < p.size(); ++j) {
      if (p.mask[j] == 0.0) continue;  // placeholder observation
      double r = p.observed[j] - p.mask[j] * patches[i][j];
      s += r * r / p.noise_var[j];
    }
  }
  return 0.5 * s;
}

/// Objective evaluated with L = cov^-1, given the Cholesky factor of cov.
inline ObjectiveTerms objective_from_covariance(std::span<const DegradedPatch> group,
                                                std::span<const Patch> patches,
                                                const Vector& mean, const SpdFactor& cov,
                                                const HyperpriorParams& hyper) {
  const double n = static_cast<double>(hyper.dim());
  const double m = static_cast<double>(patches.size());
  ObjectiveTerms t;
  t.data = data_term(group, patches);
  t.log_det = 0.5 * (hyper.nu - n + m) * cov.log_det();  // -log|L| = log|cov|
  for (const auto& c : patches) t.spread += 0.5 * cov.inv_quad(c - mean);
  t.mean_prior = 0.5 * hyper.kappa * cov.inv_quad(mean - hyper.mu0);
  t.trace = 0.5 * hyper.nu * cov.solve(hyper.sigma0).trace();
  return t;
}

inline void check_dims(std::span<const DegradedPatch> group, std::span<const Patch> patches,
                       long n) {
  if (group.size() != patches.size())
    throw ArgumentError("patch list and group have different lengths");
  for (const auto& p : group)
    if (p.size() != n) throw ArgumentError("degraded patch dimension mismatch");
  for (const auto& c : patches)
    if (c.size() != n) throw ArgumentError("patch dimension mismatch");
}

}  // namespace detail

/// Negative log joint posterior f (up to additive constants).
inline double objective_f(std::span<const DegradedPatch> group, std::span<const Patch> patches,
                          const GaussianModel& model, const HyperpriorParams& hyper) {
  const long n = hyper.dim();
  detail::check_dims(group, patches, n);
  if (model.mean.size() != n || model.precision.rows() != n || model.precision.cols() != n)
    throw ArgumentError("objective_f: model dimension mismatch");
  Eigen::LLT<Matrix> llt(model.precision);
  if (llt.info() != Eigen::Success || !model.precision.allFinite())
    throw DomainError("objective_f: precision is not positive definite");
  double log_det = 0.0;
  for (long j = 0; j < n; ++j) log_det += 2.0 * std::log(llt.matrixLLT()(j, j));

  const Matrix& lam = model.precision;
  const double m = static_cast<double>(patches.size());
  double f = detail::data_term(group, patches);
  f -= 0.5 * (hyper.nu - static_cast<double>(n) + m) * log_det;
  for (const auto& c : patches) {
    Vector d = c - model.mean;
    f += 0.5 * d.dot(lam * d);
  }
  Vector dm = model.mean - hyper.mu0;
  f += 0.5 * hyper.kappa * dm.dot(lam * dm);
  f += 0.5 * hyper.nu * (hyper.sigma0.cwiseProduct(lam.transpose())).sum();
  return f;
}

/// Gain A = L^-1 D' (D L^-1 D' + Sigma_N)^-1 for D = diag(mask),
/// Sigma_N = diag(noise_var).
inline Gain compute_gain(const Matrix& precision, const Vector& mask, const Vector& noise_var) {
  const long n = precision.rows();
  if (precision.cols() != n || mask.size() != n || noise_var.size() != n)
    throw ArgumentError("compute_gain: dimension mismatch");
  for (long j = 0; j < n; ++j)
    if (!(noise_var[j] > 0.0)) throw ArgumentError("compute_gain: noise variance must be > 0");
  SpdFactor lam(symmetrized(precision), "precision");
  return detail::gain_from_covariance(symmetrized(lam.inverse()), mask, noise_var);
}

/// mu = (kappa Id + sum A_i D_i)^-1 (sum A_i Z_i + kappa mu0)
inline Vector update_mean(std::span<const DegradedPatch> group, std::span<const Gain> gains,
                          const HyperpriorParams& hyper) {
  if (group.size() != gains.size())
    throw ArgumentError("update_mean: one gain per patch required");
  for (const auto& p : group)
    if (p.size() != hyper.dim()) throw ArgumentError("update_mean: dimension mismatch");
  return detail::solve_mean(group, detail::wrap_gains(gains), hyper);
}

/// C_i = A_i (Z_i - D_i mu) + mu
inline std::vector<Patch> update_patches(std::span<const DegradedPatch> group,
                                         std::span<const Gain> gains, const Vector& mean) {
  if (group.size() != gains.size())
    throw ArgumentError("update_patches: one gain per patch required");
  for (std::size_t i = 0; i < group.size(); ++i)
    if (group[i].size() != mean.size() || gains[i].size() != mean.size())
      throw ArgumentError("update_patches: dimension mismatch");
  return detail::solve_patches(group, detail::wrap_gains(gains), mean);
}

/// L minimizing f for fixed (C, mu):
///   L^-1 = [nu S0 + kappa (mu-mu0)(mu-mu0)' + sum (C_i-mu)(C_i-mu)'] / (nu + M - n)
inline Matrix update_precision(std::span<const Patch> patches, const Vector& mean,
                               const HyperpriorParams& hyper) {
  for (const auto& c : patches)
    if (c.size() != hyper.dim()) throw ArgumentError("update_precision: dimension mismatch");
  Matrix cov = detail::update_covariance(patches, mean, hyper);
  return symmetrized(SpdFactor(cov, "covariance").inverse());
}

/// Alternating convex minimization of f starting from L = Sigma0^-1.
inline MapSolution minimize_f(std::span<const DegradedPatch> group, const HyperpriorParams& hyper,
                              const InnerConfig& cfg = {}) {
  hyper.validate();
  if (cfg.max_iters < 1) throw ArgumentError("minimize_f: max_iters must be >= 1");
  if (!(cfg.rel_tol >= 0.0)) throw ArgumentError("minimize_f: rel_tol must be >= 0");
  for (const auto& p : group) {
    if (p.size() != hyper.dim()) throw ArgumentError("minimize_f: dimension mismatch");
    p.validate();
  }
  const double dof = hyper.nu + static_cast<double>(group.size()) - static_cast<double>(hyper.dim());
  if (!(dof > 0.0)) throw ArgumentError("minimize_f: nu + M - n must be positive");

  MapSolution sol;
  Matrix cov = symmetrized(hyper.sigma0);
  std::optional<SpdFactor> cov_factor;
  SpdFactor(cov, "sigma0");
  Vector mean;
  const double n = static_cast<double>(hyper.dim());
  for (int l = 1; l <= cfg.max_iters; ++l) {
    detail::GainSet gains = detail::build_gains(cov, group);
    mean = detail::solve_mean(group, gains, hyper);
    sol.patches = detail::solve_patches(group, gains, mean);
    cov = detail::update_covariance(sol.patches, mean, hyper);
    cov_factor.emplace(cov, "covariance update");
    // At the closed-form update, nu S0 = dof cov - sum of the outer products
    // behind the spread and mean-prior terms, so
    // trace(nu S0 L) = dof n - 2 (spread + mean_prior).
    detail::ObjectiveTerms terms;
    terms.data = detail::data_term(group, sol.patches);
    terms.log_det = 0.5 * (hyper.nu - n + static_cast<double>(group.size())) * cov_factor->log_det();
    for (const auto& c : sol.patches) terms.spread += 0.5 * cov_factor->inv_quad(c - mean);
    terms.mean_prior = 0.5 * hyper.kappa * cov_factor->inv_quad(mean - hyper.mu0);
    terms.trace = 0.5 * dof * n - terms.spread - terms.mean_prior;
    const std::pair<const char*, double> named[] = {
        {"data", terms.data},           {"log-determinant", terms.log_det},
        {"patch spread", terms.spread}, {"mean prior", terms.mean_prior},
        {"trace", terms.trace}};
    for (const auto& [name, v] : named)
      if (!std::isfinite(v))
        throw NumericalError("minimize_f: objective term '" + std::string(name) +
                             "' is not finite at iteration " + std::to_string(l));
    const double f = terms.total();
    sol.objective_trace.push_back(f);
    sol.iterations = l;
    if (l >= 2) {
      const double prev = sol.objective_trace[sol.objective_trace.size() - 2];
      if (std::abs(f - prev) <= cfg.rel_tol * std::abs(prev)) break;
    }
  }
  sol.model.mean = std::move(mean);
  sol.model.precision = symmetrized(cov_factor->inverse());
  return sol;
}

}  // namespace hbe

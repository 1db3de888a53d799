#pragma once

// First oracle image for the restoration pipeline.
//
// directional-gmm: a fixed bank of 19 zero-mean Gaussian patch models, 18
// learned from anti-aliased straight edges at orientations k*pi/18 plus one
// isotropic model with DCT eigenvectors. Each patch picks the model with the
// highest marginal likelihood of its observed pixels and is restored with
// the corresponding Wiener estimate; overlapping estimates are averaged.
//
// smooth-fill: missing pixels replaced by the discrete harmonic
// interpolant of the known ones.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "hbe/core_model.hpp"
#include "hbe/image.hpp"
#include "hbe/patch_engine.hpp"

namespace hbe {

enum class InitMode { directional_gmm, smooth_fill };

struct SmoothFillConfig {
  double tolerance = 1e-9;
  int max_sweeps = 200000;
  double relaxation = 1.5;
};

/// Harmonic fill: known pixels (mask > 0) keep observed/mask, each missing
/// pixel converges to the average of its 4-neighbours.
inline ImageGrid smooth_fill(const RestorationProblem& problem, const SmoothFillConfig& cfg = {}) {
  const ImageGrid& obs = problem.observed;
  const ImageGrid& mask = problem.mask;
  require_same_shape(obs, mask, "smooth_fill");
  ImageGrid out(obs.width, obs.height);
  std::vector<std::size_t> missing;
  double sum = 0.0, scale = 1.0;
  std::size_t known = 0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (mask.data[i] > 0.0) {
      out.data[i] = obs.data[i] / mask.data[i];
      sum += out.data[i];
      scale = std::max(scale, std::abs(out.data[i]));
      ++known;
    } else {
      missing.push_back(i);
    }
  }
  const double start = known ? sum / static_cast<double>(known) : 0.0;
  for (std::size_t i : missing) out.data[i] = start;
  if (known == 0 || missing.empty()) return out;

  const int w = obs.width, h = obs.height;
  for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    double change = 0.0;
    for (std::size_t i : missing) {
      const int r = static_cast<int>(i / static_cast<std::size_t>(w));
      const int c = static_cast<int>(i % static_cast<std::size_t>(w));
      double acc = 0.0;
      int cnt = 0;
      if (r > 0) { acc += out.data[i - w]; ++cnt; }
      if (r + 1 < h) { acc += out.data[i + w]; ++cnt; }
      if (c > 0) { acc += out.data[i - 1]; ++cnt; }
      if (c + 1 < w) { acc += out.data[i + 1]; ++cnt; }
      if (cnt == 0) continue;
      const double target = acc / cnt;
      const double next = out.data[i] + cfg.relaxation * (target - out.data[i]);
      change = std::max(change, std::abs(next - out.data[i]));
      out.data[i] = next;
    }
    if (change <= cfg.tolerance * scale) break;
  }
  return out;
}

/// The fixed bank of 19 patch models.
class DirectionalPriors {
 public:
  static constexpr int kOrientations = 18;
  static constexpr int kClasses = kOrientations + 1;
  static constexpr int kDctClass = kOrientations;

  struct Fit {
    int label = 0;
    double scale = 0.0;
    double dc = 0.0;
    std::vector<double> log_likelihood;
  };

  explicit DirectionalPriors(int side) : side_(side) {
    if (side < 2) throw ArgumentError("DirectionalPriors: patch side must be >= 2");
    for (int k = 0; k < kOrientations; ++k)
      add_class(edge_covariance(side, std::numbers::pi * k / kOrientations));
    add_class(dct_covariance(side));
  }

  int side() const { return side_; }
  long dim() const { return static_cast<long>(side_) * side_; }
  const Matrix& covariance(int k) const { return cov_[static_cast<std::size_t>(k)]; }

  /// Orientation (radians) of the edge direction of class k < kOrientations.
  static double orientation(int k) { return std::numbers::pi * k / kOrientations; }

  /// Sample covariance of DC-removed patches straddling an anti-aliased
  /// straight step edge whose direction makes angle `theta` with the x axis.
  static Matrix edge_covariance(int side, double theta) {
    const int size = 4 * side;
    const int ss = 8;
    const double cx = 0.5 * size, cy = 0.5 * size;
    const double nx = -std::sin(theta), ny = std::cos(theta);
    ImageGrid img(size, size);
    for (int r = 0; r < size; ++r)
      for (int c = 0; c < size; ++c) {
        int above = 0;
        for (int a = 0; a < ss; ++a)
          for (int b = 0; b < ss; ++b) {
            const double x = c + (b + 0.5) / ss - cx;
            const double y = r + (a + 0.5) / ss - cy;
            if (nx * x + ny * y > 0.0) ++above;
          }
        img.at(r, c) = static_cast<double>(above) / (ss * ss);
      }
    const long n = static_cast<long>(side) * side;
    Matrix acc = Matrix::Zero(n, n);
    long count = 0;
    for (int r = 0; r + side <= size; ++r)
      for (int c = 0; c + side <= size; ++c) {
        Patch p = extract_patch(img, {r, c}, side);
        p.array() -= p.mean();
        if (p.squaredNorm() < 1e-12) continue;
        acc.noalias() += p * p.transpose();
        ++count;
      }
    return acc / static_cast<double>(count);
  }

  /// Rank of DCT frequency (u,v) in zig-zag order. Atoms on one
  /// anti-diagonal share the rank of its first entry, keeping the model
  /// symmetric in u and v.
  static double frequency_index(int u, int v) { return (u + v) * (u + v + 1) / 2.0; }

  /// Eigenvectors: the 2-D DCT-II basis; eigenvalue of frequency (u,v) is
  /// 1/(1+frequency_index(u,v)).
  static Matrix dct_covariance(int side) {
    const long n = static_cast<long>(side) * side;
    auto basis = [side](int u, int x) {
      const double a = u == 0 ? std::sqrt(1.0 / side) : std::sqrt(2.0 / side);
      return a * std::cos(std::numbers::pi * (2 * x + 1) * u / (2.0 * side));
    };
    Matrix acc = Matrix::Zero(n, n);
    for (int u = 0; u < side; ++u)
      for (int v = 0; v < side; ++v) {
        Vector b(n);
        for (int r = 0; r < side; ++r)
          for (int c = 0; c < side; ++c) b[r * side + c] = basis(u, r) * basis(v, c);
        acc.noalias() += (1.0 / (1.0 + frequency_index(u, v))) * b * b.transpose();
      }
    return acc;
  }

  /// Model selection on the observed pixels. Returns nullopt when the
  /// patch has no observed pixel.
  std::optional<Fit> classify(const DegradedPatch& p) const {
    auto prep = prepare(p);
    if (!prep) return std::nullopt;
    Fit fit;
    fit.dc = prep->dc;
    fit.log_likelihood.resize(kClasses);
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < kClasses; ++k) {
      double s = 0.0;
      const double ll = evaluate(*prep, k, s, nullptr);
      fit.log_likelihood[static_cast<std::size_t>(k)] = ll;
      if (ll > best) {
        best = ll;
        fit.label = k;
        fit.scale = s;
      }
    }
    return fit;
  }

  Patch restore(const DegradedPatch& p, const Fit& fit) const {
    auto prep = prepare(p);
    if (!prep) throw ArgumentError("DirectionalPriors::restore: patch has no observed pixel");
    double s = 0.0;
    Patch out;
    evaluate(*prep, fit.label, s, &out);
    return out;
  }

 private:
  struct Prepared {
    const DegradedPatch* patch;
    std::vector<long> support;
    double dc = 0.0;
    Vector y;  // DC-removed observations on the support
    bool uniform = false;  // full support, unit mask, constant noise
  };

  void add_class(const Matrix& raw) {
    const long n = raw.rows();
    Matrix c = symmetrized(raw);
    c *= static_cast<double>(n) / c.trace();
    c.diagonal().array() += kRidge;
    Eigen::SelfAdjointEigenSolver<Matrix> es(c);
    dc_eig_.push_back(c.sum() / static_cast<double>(n));  // 1 is an eigenvector
    cov_.push_back(c);
    eigvec_.push_back(es.eigenvectors());
    eigval_.push_back(es.eigenvalues());
  }

  std::optional<Prepared> prepare(const DegradedPatch& p) const {
    if (p.size() != dim()) throw ArgumentError("DirectionalPriors: patch dimension mismatch");
    Prepared out;
    out.patch = &p;
    double num = 0.0, den = 0.0;
    bool uniform = true;
    for (long j = 0; j < p.size(); ++j) {
      if (p.mask[j] > 0.0) {
        out.support.push_back(j);
        num += p.mask[j] * p.observed[j];
        den += p.mask[j] * p.mask[j];
        if (p.mask[j] != 1.0 || p.noise_var[j] != p.noise_var[0]) uniform = false;
      } else {
        uniform = false;
      }
    }
    if (out.support.empty()) return std::nullopt;
    out.dc = num / den;
    out.uniform = uniform;
    out.y.resize(static_cast<long>(out.support.size()));
    for (std::size_t a = 0; a < out.support.size(); ++a) {
      const long j = out.support[a];
      out.y[static_cast<long>(a)] = p.observed[j] - p.mask[j] * out.dc;
    }
    return out;
  }

  // Log marginal likelihood of class k (scale fitted by moments); writes
  // the Wiener estimate into *restored when non-null.
  double evaluate(const Prepared& prep, int k, double& scale, Patch* restored) const {
    const DegradedPatch& p = *prep.patch;
    const Matrix& cov = covariance(k);
    const long n = dim();
    const long m = static_cast<long>(prep.support.size());
    double noise_sum = 0.0;
    for (long j : prep.support) noise_sum += p.noise_var[j];
    const double floor = 1e-6 * (1.0 + noise_sum / static_cast<double>(m));
    const double energy = prep.y.squaredNorm();

    if (prep.uniform) {
      const Matrix& u = eigvec_[static_cast<std::size_t>(k)];
      const Vector& lam = eigval_[static_cast<std::size_t>(k)];
      const double sigma2 = p.noise_var[0];
      scale = std::max((energy - noise_sum) / lam.sum(), floor);
      Vector w = u.transpose() * prep.y;
      Vector denom = (scale * lam).array() + sigma2;
      // y is orthogonal to the constant vector, an eigenvector of every
      // class, so the DC term only changes the determinant.
      const double dc_before = scale * dc_eig_[static_cast<std::size_t>(k)] + sigma2;
      const double dc_after = dc_before + kDcVariance * scale * static_cast<double>(n * n);
      const double ll = -0.5 * ((w.array().square() / denom.array()).sum() +
                                denom.array().log().sum() + std::log(dc_after / dc_before));
      if (restored) {
        Vector shrunk = (scale * lam).cwiseQuotient(denom).cwiseProduct(w);
        *restored = (u * shrunk).array() + prep.dc;
      }
      return ll;
    }

    Matrix kmat(m, m);
    double tr = 0.0;
    for (long a = 0; a < m; ++a) {
      const long ja = prep.support[static_cast<std::size_t>(a)];
      for (long b = 0; b < m; ++b) {
        const long jb = prep.support[static_cast<std::size_t>(b)];
        kmat(a, b) = p.mask[ja] * cov(ja, jb) * p.mask[jb];
      }
      tr += kmat(a, a);
    }
    scale = std::max((energy - noise_sum) / tr, floor);
    kmat *= scale;
    const double dcvar = kDcVariance * scale * static_cast<double>(n);
    for (long a = 0; a < m; ++a)
      for (long b = 0; b < m; ++b)
        kmat(a, b) += dcvar * p.mask[prep.support[static_cast<std::size_t>(a)]] *
                      p.mask[prep.support[static_cast<std::size_t>(b)]];
    for (long a = 0; a < m; ++a) kmat(a, a) += p.noise_var[prep.support[static_cast<std::size_t>(a)]];
    SpdFactor fac(kmat, "directional model");
    const double ll = -0.5 * (fac.inv_quad(prep.y) + fac.log_det());
    if (restored) {
      Vector alpha = fac.solve(prep.y);
      Patch out = Patch::Constant(n, prep.dc);
      for (long a = 0; a < m; ++a) {
        const long ja = prep.support[static_cast<std::size_t>(a)];
        out += (scale * p.mask[ja] * alpha[a]) * cov.col(ja);
        out.array() += dcvar * p.mask[ja] * alpha[a];
      }
      *restored = std::move(out);
    }
    return ll;
  }

  static constexpr double kRidge = 1e-2;
  // Variance of the DC offset per unit of fitted scale and patch pixel.
  static constexpr double kDcVariance = 1.0;
  int side_;
  std::vector<Matrix> cov_;
  std::vector<Matrix> eigvec_;
  std::vector<Vector> eigval_;
  std::vector<double> dc_eig_;
};

inline DegradedPatch extract_degraded(const RestorationProblem& problem, PatchIndex idx, int side) {
  return {extract_patch(problem.observed, idx, side), extract_patch(problem.mask, idx, side),
          extract_patch(problem.noise_var, idx, side)};
}

/// First oracle image, fully populated.
inline ImageGrid init_oracle(const RestorationProblem& problem, InitMode mode, const SearchConfig& search) {
  problem.validate();
  ImageGrid fill = smooth_fill(problem);
  if (mode == InitMode::smooth_fill) return fill;

  const int side = search.patch_side;
  if (side > problem.width() || side > problem.height()) return fill;
  DirectionalPriors priors(side);
  ImageGrid sum(problem.width(), problem.height(), 0.0);
  ImageGrid weight(problem.width(), problem.height(), 0.0);
  for (PatchIndex idx : anchor_grid(problem.width(), problem.height(), side, search.step)) {
    DegradedPatch dp = extract_degraded(problem, idx, side);
    auto fit = priors.classify(dp);
    if (!fit) continue;
    Patch est = priors.restore(dp, *fit);
    long k = 0;
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c, ++k) {
        sum.at(idx.top + r, idx.left + c) += est[k];
        weight.at(idx.top + r, idx.left + c) += 1.0;
      }
  }
  for (std::size_t i = 0; i < fill.size(); ++i)
    if (weight.data[i] > 0.0) fill.data[i] = sum.data[i] / weight.data[i];
  return fill;
}

}  // namespace hbe

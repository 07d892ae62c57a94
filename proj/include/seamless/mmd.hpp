#pragma once

// Gaussian-kernel MMD^2 U-statistic, the covariate-similarity borrowing
// weight, the analytic variance of MMD^2 and the confidence interval for the
// weight.
//
//   MMD^2 = A1 + A2 - 2 A12
//   A1  = sum_{a != b} k(x1a, x1b) / (n1 (n1 - 1))
//   A2  = sum_{c != d} k(x2c, x2d) / (n2 (n2 - 1))
//   A12 = sum_{a, c}   k(x1a, x2c) / (n1 n2)
//
//   w   = 1 - MMD^2 / MMD_max                     (MMD_max = 2 for k <= 1)
//
//   V   = 4 (n1 - 2) / (n1 (n1 - 1)) z1'  + 4 (n2 - 2) / (n2 (n2 - 1)) z2'
//       + 2 / (n1 (n1 - 1)) z1''          + 2 / (n2 (n2 - 1)) z2''
//       + 4 / (n1 n2) z3''
//
// where z1', z2' are the variances of the per-point kernel-mean differences
// and z1'', z2'', z3'' the variances of individual kernel values. The
// remainder term is dropped, so V is an asymptotic approximation.

#include <Eigen/Core>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "seamless/covariates.hpp"
#include "seamless/error.hpp"

namespace seamless {

enum class BandwidthRule { MedianHeuristic, Fixed };

/// Squared: w = 1 - MMD^2 / MMD_max. Root: w = 1 - sqrt(MMD^2 / MMD_max),
/// kept for sensitivity analysis only.
enum class WeightScale { Squared, Root };

struct KernelConfig {
  BandwidthRule bandwidth = BandwidthRule::MedianHeuristic;
  double sigma = 1.0;  // used when bandwidth == Fixed
  double mmd_max = 2.0;
  WeightScale scale = WeightScale::Squared;

  static KernelConfig fixed(double sigma) {
    KernelConfig k;
    k.bandwidth = BandwidthRule::Fixed;
    k.sigma = sigma;
    return k;
  }
};

struct MmdEstimate {
  double a1 = 0.0;
  double a2 = 0.0;
  double a12 = 0.0;   // un-doubled cross mean
  double mmd2 = 0.0;  // raw, may be negative
  Eigen::Index n1 = 0;
  Eigen::Index n2 = 0;
  double sigma = 1.0;
};

struct VarianceComponents {
  // Pieces of the first-order terms, kept for diagnostics.
  double var_mu11 = 0.0, var_mu21 = 0.0, cov_1 = 0.0;
  double var_mu22 = 0.0, var_mu12 = 0.0, cov_2 = 0.0;

  double zeta1_dag = 0.0;
  double zeta2_dag = 0.0;
  double zeta1_ddag = 0.0;
  double zeta2_ddag = 0.0;
  double zeta3_ddag = 0.0;
};

struct WeightEstimate {
  double w = 1.0;
  double variance_v = 0.0;
  double ci_low = 1.0;
  double ci_high = 1.0;
  double alpha = 0.05;
};

template <class A, class B>
double gaussian_kernel(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y,
                       double sigma) {
  require(x.size() == y.size(), ErrorCode::DimensionMismatch,
          "kernel arguments differ in dimension");
  require(sigma > 0.0, ErrorCode::InvalidParams, "kernel bandwidth must be positive");
  return std::exp(-(x - y).squaredNorm() / (2.0 * sigma * sigma));
}

/// Median of all nonzero pairwise Euclidean distances; 1 if every distance is 0.
inline double median_heuristic_bandwidth(const Eigen::MatrixXd& pooled) {
  require(pooled.rows() >= 2, ErrorCode::InsufficientSample,
          "median heuristic needs at least two points");
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(pooled.rows() * (pooled.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < pooled.rows(); ++i)
    for (Eigen::Index j = i + 1; j < pooled.rows(); ++j) {
      const double dist = (pooled.row(i) - pooled.row(j)).norm();
      if (dist > 0.0) d.push_back(dist);
    }
  if (d.empty()) return 1.0;
  const auto mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  const double hi = d[mid];
  if (d.size() % 2 == 1) return hi;
  const double lo = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

inline double resolve_bandwidth(const Eigen::MatrixXd& x1, const Eigen::MatrixXd& x2,
                                const KernelConfig& k) {
  if (k.bandwidth == BandwidthRule::Fixed) {
    require(k.sigma > 0.0, ErrorCode::InvalidParams, "fixed bandwidth must be positive");
    return k.sigma;
  }
  Eigen::MatrixXd pooled(x1.rows() + x2.rows(), x1.cols());
  pooled << x1, x2;
  return median_heuristic_bandwidth(pooled);
}

/// Kernel matrices within and across the two samples.
struct KernelGram {
  Eigen::MatrixXd k11;
  Eigen::MatrixXd k22;
  Eigen::MatrixXd k12;  // n1 x n2
  double sigma = 1.0;

  Eigen::Index n1() const { return k11.rows(); }
  Eigen::Index n2() const { return k22.rows(); }
};

namespace detail {

inline Eigen::MatrixXd gram(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                            double sigma, bool symmetric) {
  const double inv = 1.0 / (2.0 * sigma * sigma);
  Eigen::MatrixXd k(x.rows(), y.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = symmetric ? i : 0; j < y.rows(); ++j) {
      const double v = std::exp(-(x.row(i) - y.row(j)).squaredNorm() * inv);
      k(i, j) = v;
      if (symmetric) k(j, i) = v;
    }
  }
  return k;
}

// Sum of off-diagonal entries of a square matrix.
inline double off_diagonal_sum(const Eigen::MatrixXd& k) { return k.sum() - k.trace(); }

}  // namespace detail

inline KernelGram kernel_gram(const Eigen::MatrixXd& x1, const Eigen::MatrixXd& x2,
                              const KernelConfig& cfg) {
  require(x1.cols() == x2.cols(), ErrorCode::DimensionMismatch,
          "samples differ in encoded dimension");
  KernelGram g;
  g.sigma = resolve_bandwidth(x1, x2, cfg);
  g.k11 = detail::gram(x1, x1, g.sigma, true);
  g.k22 = detail::gram(x2, x2, g.sigma, true);
  g.k12 = detail::gram(x1, x2, g.sigma, false);
  return g;
}

inline MmdEstimate mmd2_unbiased(const KernelGram& g) {
  const auto n1 = g.n1(), n2 = g.n2();
  require(n1 >= 2 && n2 >= 2, ErrorCode::InsufficientSample,
          "MMD^2 U-statistic needs at least two points per sample");
  MmdEstimate e;
  e.n1 = n1;
  e.n2 = n2;
  e.sigma = g.sigma;
  e.a1 = detail::off_diagonal_sum(g.k11) / double(n1 * (n1 - 1));
  e.a2 = detail::off_diagonal_sum(g.k22) / double(n2 * (n2 - 1));
  e.a12 = g.k12.sum() / double(n1 * n2);
  e.mmd2 = e.a1 + e.a2 - 2.0 * e.a12;
  return e;
}

inline MmdEstimate mmd2_unbiased(const Eigen::MatrixXd& x1, const Eigen::MatrixXd& x2,
                                 const KernelConfig& cfg) {
  require(x1.rows() >= 2 && x2.rows() >= 2, ErrorCode::InsufficientSample,
          "MMD^2 U-statistic needs at least two points per sample");
  return mmd2_unbiased(kernel_gram(x1, x2, cfg));
}

inline MmdEstimate mmd2_unbiased(const EncodedSample& s1, const EncodedSample& s2,
                                 const KernelConfig& cfg) {
  return mmd2_unbiased(s1.matrix, s2.matrix, cfg);
}

struct MmdVariance {
  VarianceComponents components;
  double v = 0.0;  // clamped at 0
  double raw = 0.0;
};

inline MmdVariance mmd2_variance(const KernelGram& g) {
  const auto n1 = g.n1(), n2 = g.n2();
  require(n1 >= 3 && n2 >= 3, ErrorCode::InsufficientSample,
          "MMD^2 variance needs at least three points per sample");
  const double f1 = double(n1), f2 = double(n2);

  const double kbar11 = detail::off_diagonal_sum(g.k11) / (f1 * (f1 - 1));
  const double kbar22 = detail::off_diagonal_sum(g.k22) / (f2 * (f2 - 1));
  const double kbar12 = g.k12.sum() / (f1 * f2);

  // Per-point conditional kernel means, centred on the grand means.
  const Eigen::ArrayXd mu11 =
      (g.k11.rowwise().sum() - g.k11.diagonal()).array() / (f1 - 1) - kbar11;
  const Eigen::ArrayXd mu21 = g.k12.rowwise().sum().array() / f2 - kbar12;
  const Eigen::ArrayXd mu12 = g.k12.colwise().sum().transpose().array() / f1 - kbar12;
  const Eigen::ArrayXd mu22 =
      (g.k22.rowwise().sum() - g.k22.diagonal()).array() / (f2 - 1) - kbar22;

  MmdVariance out;
  auto& c = out.components;
  c.var_mu11 = mu11.square().sum() / (f1 - 1);
  c.var_mu21 = mu21.square().sum() / (f1 - 1);
  c.cov_1 = (mu11 * mu21).sum() / (f1 - 1);
  c.var_mu22 = mu22.square().sum() / (f2 - 1);
  c.var_mu12 = mu12.square().sum() / (f2 - 1);
  c.cov_2 = (mu22 * mu12).sum() / (f2 - 1);
  c.zeta1_dag = c.var_mu11 + c.var_mu21 - 2.0 * c.cov_1;
  c.zeta2_dag = c.var_mu22 + c.var_mu12 - 2.0 * c.cov_2;

  auto off_diag_var = [](const Eigen::MatrixXd& k, double mean, double n) {
    const double total = (k.array() - mean).square().sum();
    const double diag = (k.diagonal().array() - mean).square().sum();
    return (total - diag) / (n * (n - 1));
  };
  c.zeta1_ddag = off_diag_var(g.k11, kbar11, f1);
  c.zeta2_ddag = off_diag_var(g.k22, kbar22, f2);
  c.zeta3_ddag = (g.k12.array() - kbar12).square().sum() / (f1 * f2);

  out.raw = 4.0 * (f1 - 2) / (f1 * (f1 - 1)) * c.zeta1_dag +
            4.0 * (f2 - 2) / (f2 * (f2 - 1)) * c.zeta2_dag +
            2.0 / (f1 * (f1 - 1)) * c.zeta1_ddag + 2.0 / (f2 * (f2 - 1)) * c.zeta2_ddag +
            4.0 / (f1 * f2) * c.zeta3_ddag;
  out.v = std::max(0.0, out.raw);
  return out;
}

inline MmdVariance mmd2_variance(const EncodedSample& s1, const EncodedSample& s2,
                                 const KernelConfig& cfg) {
  require(s1.rows() >= 3 && s2.rows() >= 3, ErrorCode::InsufficientSample,
          "MMD^2 variance needs at least three points per sample");
  return mmd2_variance(kernel_gram(s1.matrix, s2.matrix, cfg));
}

/// Negative estimates clamp to 0 so the weight never exceeds 1.
inline double borrow_weight(double mmd2, const KernelConfig& k) {
  const double m = std::clamp(mmd2, 0.0, k.mmd_max);
  if (k.scale == WeightScale::Root) return 1.0 - std::sqrt(m / k.mmd_max);
  return 1.0 - m / k.mmd_max;
}

inline double borrow_weight(const MmdEstimate& est, const KernelConfig& k) {
  return borrow_weight(est.mmd2, k);
}

/// Upper alpha/2 standard normal quantile.
inline double z_upper(double alpha) {
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::InvalidAlpha, "alpha must lie in (0,1)");
  return boost::math::quantile(boost::math::complement(boost::math::normal(), alpha / 2.0));
}

/// CI for the weight, truncated to [0, 1].
inline WeightEstimate weight_ci(double w, double v, const KernelConfig& k, double alpha) {
  const double z = z_upper(alpha);
  require(w >= 0.0 && w <= 1.0, ErrorCode::InvalidWeight, "weight must lie in [0,1]");
  require(v >= 0.0 && std::isfinite(v), ErrorCode::InvalidParams,
          "variance must be finite and non-negative");
  WeightEstimate out;
  out.w = w;
  out.variance_v = v;
  out.alpha = alpha;
  const double half = z * std::sqrt(v);
  if (k.scale == WeightScale::Squared) {
    out.ci_low = std::max(0.0, w - half / k.mmd_max);
    out.ci_high = std::min(1.0, w + half / k.mmd_max);
  } else {
    // Map the MMD^2-scale interval through the monotone root transform.
    const double m = (1.0 - w) * (1.0 - w) * k.mmd_max;
    out.ci_low = borrow_weight(m + half, k);
    out.ci_high = borrow_weight(m - half, k);
  }
  return out;
}

/// Everything computed for one Phase I dose / Phase II arm comparison.
struct SimilarityResult {
  MmdEstimate mmd;
  MmdVariance variance;
  WeightEstimate weight;
  StandardizationParams standardization;
};

/// Pooled standardization, MMD^2, weight and its CI for one pair of raw
/// encoded samples. Both samples need at least three rows.
inline SimilarityResult assess_similarity(const EncodedSample& phase1,
                                          const EncodedSample& phase2,
                                          const KernelConfig& k, double alpha) {
  auto std_pair = pooled_standardize(phase1, phase2);
  const auto gram = kernel_gram(std_pair.first.matrix, std_pair.second.matrix, k);
  SimilarityResult r;
  r.mmd = mmd2_unbiased(gram);
  r.variance = mmd2_variance(gram);
  r.weight = weight_ci(borrow_weight(r.mmd, k), r.variance.v, k, alpha);
  r.standardization = std::move(std_pair.params);
  return r;
}

}  // namespace seamless

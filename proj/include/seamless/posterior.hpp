#pragma once

// Power-prior Beta posterior for the objective response rate at one dose:
//
//   Beta(n2e + w n1e + a0,  (n2 - n2e) + w (n1 - n1e) + b0)

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/tools/minima.hpp>

#include <cmath>
#include <utility>

#include "seamless/error.hpp"

namespace seamless {

struct ArmCounts {
  int n1 = 0;    // Phase I patients at this dose
  int n1_e = 0;  // Phase I responders
  int n2 = 0;
  int n2_e = 0;

  bool valid() const { return n1 >= 0 && n2 >= 0 && n1_e >= 0 && n2_e >= 0 && n1_e <= n1 && n2_e <= n2; }
};

struct BetaPrior {
  double a0 = 0.05;
  double b0 = 0.05;
};

struct BorrowingPosterior {
  double alpha_param = 0.0;
  double beta_param = 0.0;
  double w = 0.0;
  BetaPrior prior;

  double mean() const { return alpha_param / (alpha_param + beta_param); }
};

enum class IntervalKind { EqualTailed, Hpd };

struct CredibleInterval {
  double low = 0.0;
  double high = 1.0;

  double width() const { return high - low; }
};

inline BorrowingPosterior posterior(const ArmCounts& c, double w, BetaPrior prior = {}) {
  require(c.valid(), ErrorCode::InvalidCounts, "responders must lie in [0, n]");
  require(w >= 0.0 && w <= 1.0, ErrorCode::InvalidWeight, "weight must lie in [0,1]");
  require(prior.a0 > 0.0 && prior.b0 > 0.0, ErrorCode::InvalidParams,
          "prior parameters must be positive");
  BorrowingPosterior p;
  p.w = w;
  p.prior = prior;
  p.alpha_param = c.n2_e + w * c.n1_e + prior.a0;
  p.beta_param = (c.n2 - c.n2_e) + w * (c.n1 - c.n1_e) + prior.b0;
  return p;
}

/// Regularized incomplete beta I_x(a, b).
inline double beta_cdf(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return boost::math::ibeta(a, b, x);
}

inline double beta_quantile(double a, double b, double q) {
  require(a > 0.0 && b > 0.0, ErrorCode::InvalidParams, "beta parameters must be positive");
  require(q > 0.0 && q < 1.0, ErrorCode::InvalidParams, "quantile level must lie in (0,1)");
  return boost::math::ibeta_inv(a, b, q);
}

namespace detail {

// Shortest interval holding 1 - alpha mass: minimise width over the lower
// tail probability.
inline CredibleInterval beta_hpd(double a, double b, double alpha) {
  auto width = [&](double lower_tail) {
    return beta_quantile(a, b, lower_tail + 1.0 - alpha) - beta_quantile(a, b, lower_tail);
  };
  const double eps = alpha * 1e-9;
  auto [p, _] = boost::math::tools::brent_find_minima(width, eps, alpha - eps, 40);
  return {beta_quantile(a, b, p), beta_quantile(a, b, p + 1.0 - alpha)};
}

}  // namespace detail

inline CredibleInterval credible_interval(double a, double b, double alpha,
                                          IntervalKind kind = IntervalKind::EqualTailed) {
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::InvalidAlpha, "alpha must lie in (0,1)");
  if (kind == IntervalKind::Hpd) return detail::beta_hpd(a, b, alpha);
  return {beta_quantile(a, b, alpha / 2.0), beta_quantile(a, b, 1.0 - alpha / 2.0)};
}

inline CredibleInterval credible_interval(const BorrowingPosterior& p, double alpha,
                                          IntervalKind kind = IntervalKind::EqualTailed) {
  return credible_interval(p.alpha_param, p.beta_param, alpha, kind);
}

/// True iff the lower credible bound lies strictly above tau.
inline bool exceeds_threshold(const BorrowingPosterior& p, double tau, double alpha) {
  require(tau > 0.0 && tau < 1.0, ErrorCode::InvalidParams, "threshold must lie in (0,1)");
  return credible_interval(p, alpha).low > tau;
}

struct PosteriorSummary {
  double w = 0.0;
  double alpha_param = 0.0;
  double beta_param = 0.0;
  double mean = 0.0;
  CredibleInterval interval;
  bool exceeds = false;
};

inline PosteriorSummary summarize_posterior(const BorrowingPosterior& p, double tau,
                                            double alpha) {
  require(tau > 0.0 && tau < 1.0, ErrorCode::InvalidParams, "threshold must lie in (0,1)");
  PosteriorSummary s;
  s.w = p.w;
  s.alpha_param = p.alpha_param;
  s.beta_param = p.beta_param;
  s.mean = p.mean();
  s.interval = credible_interval(p, alpha);
  s.exceeds = s.interval.low > tau;
  return s;
}

}  // namespace seamless

#pragma once

// Slow, direct reference implementations used to check the optimized code.
// Nothing here calls into the library's numerics.

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <vector>

namespace oracle {

using Points = std::vector<std::vector<double>>;

inline double kernel(const std::vector<double>& x, const std::vector<double>& y, double sigma) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) d2 += (x[i] - y[i]) * (x[i] - y[i]);
  return std::exp(-d2 / (2.0 * sigma * sigma));
}

struct Mmd {
  double a1, a2, a12, mmd2;
};

// The three double sums of the U-statistic, written out term by term.
inline Mmd mmd2(const Points& x1, const Points& x2, double sigma) {
  const double n1 = double(x1.size()), n2 = double(x2.size());
  double s11 = 0, s22 = 0, s12 = 0;
  for (std::size_t a = 0; a < x1.size(); ++a)
    for (std::size_t b = 0; b < x1.size(); ++b)
      if (a != b) s11 += kernel(x1[a], x1[b], sigma);
  for (std::size_t a = 0; a < x2.size(); ++a)
    for (std::size_t b = 0; b < x2.size(); ++b)
      if (a != b) s22 += kernel(x2[a], x2[b], sigma);
  for (const auto& p : x1)
    for (const auto& q : x2) s12 += kernel(p, q, sigma);
  Mmd m;
  m.a1 = s11 / (n1 * (n1 - 1));
  m.a2 = s22 / (n2 * (n2 - 1));
  m.a12 = s12 / (n1 * n2);
  m.mmd2 = s11 / (n1 * (n1 - 1)) + s22 / (n2 * (n2 - 1)) - 2.0 * s12 / (n1 * n2);
  return m;
}

// Plug-in variance of the U-statistic, transcribed literally: conditional
// kernel means per point, their sample (co)variances with 1/(n-1), and the
// off-diagonal / cross kernel variances.
inline double mmd2_variance(const Points& x1, const Points& x2, double sigma) {
  const std::size_t n1 = x1.size(), n2 = x2.size();
  const double f1 = double(n1), f2 = double(n2);

  double k11 = 0, k22 = 0, k12 = 0;
  for (std::size_t a = 0; a < n1; ++a)
    for (std::size_t b = 0; b < n1; ++b)
      if (a != b) k11 += kernel(x1[a], x1[b], sigma);
  k11 /= f1 * (f1 - 1);
  for (std::size_t a = 0; a < n2; ++a)
    for (std::size_t b = 0; b < n2; ++b)
      if (a != b) k22 += kernel(x2[a], x2[b], sigma);
  k22 /= f2 * (f2 - 1);
  for (std::size_t a = 0; a < n1; ++a)
    for (std::size_t c = 0; c < n2; ++c) k12 += kernel(x1[a], x2[c], sigma);
  k12 /= f1 * f2;

  std::vector<double> mu11(n1, 0.0), mu21(n1, 0.0), mu12(n2, 0.0), mu22(n2, 0.0);
  for (std::size_t a = 0; a < n1; ++a) {
    for (std::size_t b = 0; b < n1; ++b)
      if (b != a) mu11[a] += kernel(x1[a], x1[b], sigma) / (f1 - 1);
    for (std::size_t c = 0; c < n2; ++c) mu21[a] += kernel(x1[a], x2[c], sigma) / f2;
  }
  for (std::size_t c = 0; c < n2; ++c) {
    for (std::size_t d = 0; d < n2; ++d)
      if (d != c) mu22[c] += kernel(x2[c], x2[d], sigma) / (f2 - 1);
    for (std::size_t a = 0; a < n1; ++a) mu12[c] += kernel(x1[a], x2[c], sigma) / f1;
  }

  double v11 = 0, v21 = 0, c1 = 0;
  for (std::size_t a = 0; a < n1; ++a) {
    v11 += (mu11[a] - k11) * (mu11[a] - k11);
    v21 += (mu21[a] - k12) * (mu21[a] - k12);
    c1 += (mu11[a] - k11) * (mu21[a] - k12);
  }
  double v22 = 0, v12 = 0, c2 = 0;
  for (std::size_t c = 0; c < n2; ++c) {
    v22 += (mu22[c] - k22) * (mu22[c] - k22);
    v12 += (mu12[c] - k12) * (mu12[c] - k12);
    c2 += (mu22[c] - k22) * (mu12[c] - k12);
  }
  const double zeta1_dag = (v11 + v21 - 2 * c1) / (f1 - 1);
  const double zeta2_dag = (v22 + v12 - 2 * c2) / (f2 - 1);

  double z11 = 0, z22 = 0, z12 = 0;
  for (std::size_t a = 0; a < n1; ++a)
    for (std::size_t b = 0; b < n1; ++b)
      if (a != b) z11 += std::pow(kernel(x1[a], x1[b], sigma) - k11, 2);
  for (std::size_t a = 0; a < n2; ++a)
    for (std::size_t b = 0; b < n2; ++b)
      if (a != b) z22 += std::pow(kernel(x2[a], x2[b], sigma) - k22, 2);
  for (std::size_t a = 0; a < n1; ++a)
    for (std::size_t c = 0; c < n2; ++c) z12 += std::pow(kernel(x1[a], x2[c], sigma) - k12, 2);
  const double zeta1_ddag = z11 / (f1 * (f1 - 1));
  const double zeta2_ddag = z22 / (f2 * (f2 - 1));
  const double zeta3_ddag = z12 / (f1 * f2);

  const double v = 4 * (f1 - 2) / (f1 * (f1 - 1)) * zeta1_dag + 4 * (f2 - 2) / (f2 * (f2 - 1)) * zeta2_dag +
                   2 / (f1 * (f1 - 1)) * zeta1_ddag + 2 / (f2 * (f2 - 1)) * zeta2_ddag +
                   4 / (f1 * f2) * zeta3_ddag;
  return v < 0 ? 0.0 : v;
}

// Regularized incomplete beta by quadrature of the density. Substituting
// t = x u^(1/a) takes out the t^(a-1) singularity at 0:
//   int_0^x t^(a-1) (1-t)^(b-1) dt = x^a / a * int_0^1 (1 - x u^(1/a))^(b-1) du
// and the upper half uses the mirror image I_x(a,b) = 1 - I_(1-x)(b,a).
inline double beta_cdf(double a, double b, double x) {
  if (x <= 0) return 0.0;
  if (x >= 1) return 1.0;
  auto lower = [](double a, double b, double x) {
    const double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    boost::math::quadrature::tanh_sinh<double> q;
    const double inner =
        q.integrate([&](double u) { return std::pow(1.0 - x * std::pow(u, 1.0 / a), b - 1.0); }, 0.0, 1.0, 1e-15);
    return std::exp(a * std::log(x) - std::log(a) - lbeta) * inner;
  };
  if (x <= 0.5) return lower(a, b, x);
  return 1.0 - lower(b, a, 1.0 - x);
}

}  // namespace oracle

#ifndef PSTRAT_GAUSS_HPP
#define PSTRAT_GAUSS_HPP

#include <cmath>
#include <limits>

namespace pstrat {

inline constexpr double kLog2Pi = 1.8378770664093454836;

/// Standard normal CDF, accurate in both tails (erfc-based).
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

/// Upper tail P(X > x).
inline double norm_sf(double x) { return 0.5 * std::erfc(x * M_SQRT1_2); }

inline double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

inline double log_norm_pdf(double y, double mean, double var) {
  const double d = y - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

/// Standard normal quantile, Wichura's algorithm AS 241 (PPND16).
/// Accurate to ~1e-16 over the full open interval; throws outside (0,1).
double norm_quantile(double p);

/// log(sum(exp(a), exp(b))) without overflow.
inline double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = a > b ? a : b;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace pstrat

#endif

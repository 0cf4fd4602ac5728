#include "pstrat/samplers.hpp"

#include <cmath>
#include <stdexcept>

#include "pstrat/gauss.hpp"

namespace pstrat {

double sample_normal(double mean, double var, RngStream& rng) {
  if (!(var > 0.0)) throw std::invalid_argument("sample_normal: variance must be positive");
  return mean + std::sqrt(var) * norm_quantile(rng.uniform());
}

Vector sample_mvn(const Vector& mu, const Matrix& sigma, RngStream& rng) {
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("sample_mvn: covariance not positive definite");
  Vector z(mu.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = norm_quantile(rng.uniform());
  return mu + llt.matrixL() * z;
}

namespace {

// Robert's translated-exponential rejection sampler for a standard normal
// conditioned on (a, inf), efficient for a >= 0.
double std_normal_tail(double a, RngStream& rng) {
  const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double x = a - std::log(rng.uniform()) / alpha;
    const double d = x - alpha;
    if (std::log(rng.uniform()) <= -0.5 * d * d) return x;
  }
}

// Standardized truncated draw on (a, b).
double std_truncated(double a, double b, RngStream& rng) {
  constexpr double kTail = 6.0;
  const bool lo_inf = std::isinf(a) && a < 0.0;
  const bool hi_inf = std::isinf(b) && b > 0.0;
  if (lo_inf && hi_inf) return norm_quantile(rng.uniform());

  if (a >= kTail) {
    if (hi_inf) return std_normal_tail(a, rng);
    // Far right tail with a finite cap: invert in the complementary tail,
    // where the survival function keeps full precision.
    const double pa = norm_sf(a), pb = norm_sf(b);
    const double p = pb + rng.uniform() * (pa - pb);
    if (!(p > 0.0)) return a;
    return -norm_quantile(p);
  }
  if (b <= -kTail) {
    // Mirror image of the right-tail case.
    if (lo_inf) return -std_normal_tail(-b, rng);
    const double pa = norm_cdf(b), pc = norm_cdf(a);
    const double p = pc + rng.uniform() * (pa - pc);
    if (!(p > 0.0)) return b;
    return norm_quantile(p);
  }

  const double fa = lo_inf ? 0.0 : norm_cdf(a);
  const double fb = hi_inf ? 1.0 : norm_cdf(b);
  double p = fa + rng.uniform() * (fb - fa);
  if (!(p > 0.0 && p < 1.0)) return 0.5 * (std::max(a, -37.0) + std::min(b, 37.0));
  return norm_quantile(p);
}

}  // namespace

double sample_truncated_normal(double mean, double var, double lo, double hi, RngStream& rng) {
  if (!(var > 0.0)) throw std::invalid_argument("sample_truncated_normal: variance must be positive");
  if (!(lo < hi)) throw std::invalid_argument("sample_truncated_normal: requires lo < hi");
  const double sd = std::sqrt(var);
  const double a = (lo - mean) / sd;
  const double b = (hi - mean) / sd;
  double x = mean + sd * std_truncated(a, b, rng);
  // Guard against inverse-CDF round-trip landing a hair outside a narrow interval.
  if (x < lo) x = lo;
  if (x > hi) x = hi;
  return x;
}

double sample_gamma(double shape, double rate, RngStream& rng) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw std::invalid_argument("sample_gamma: shape and rate must be positive");
  if (shape < 1.0) {
    // Boost to shape+1 and scale back (Marsaglia-Tsang small-shape trick).
    const double u = rng.uniform();
    return sample_gamma(shape + 1.0, rate, rng) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double z = norm_quantile(rng.uniform());
    const double t = 1.0 + c * z;
    if (t <= 0.0) continue;
    const double v = t * t * t;
    const double u = rng.uniform();
    if (std::log(u) < 0.5 * z * z + d - d * v + d * std::log(v)) return d * v / rate;
  }
}

double sample_inverse_gamma(double shape, double rate, RngStream& rng) {
  return 1.0 / sample_gamma(shape, rate, rng);
}

double sample_beta(double a, double b, RngStream& rng) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("sample_beta: parameters must be positive");
  const double x = sample_gamma(a, 1.0, rng);
  const double y = sample_gamma(b, 1.0, rng);
  return x / (x + y);
}

Matrix sample_inverse_wishart(double df, const Matrix& scale, RngStream& rng) {
  const Eigen::Index p = scale.rows();
  if (scale.cols() != p) throw std::invalid_argument("sample_inverse_wishart: scale must be square");
  if (!(df > static_cast<double>(p) - 1.0))
    throw std::invalid_argument("sample_inverse_wishart: df must exceed p - 1");
  Eigen::LLT<Matrix> llt_scale(scale);
  if (llt_scale.info() != Eigen::Success)
    throw std::invalid_argument("sample_inverse_wishart: scale not positive definite");

  // Precision ~ Wishart(scale^{-1}, df) by Bartlett decomposition.
  const Matrix scale_inv = llt_scale.solve(Matrix::Identity(p, p));
  Eigen::LLT<Matrix> llt_prec(scale_inv);
  Matrix A = Matrix::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) A(i, j) = norm_quantile(rng.uniform());
    A(i, i) = std::sqrt(2.0 * sample_gamma(0.5 * (df - static_cast<double>(i)), 1.0, rng));
  }
  const Matrix L = llt_prec.matrixL() * A;
  const Matrix W = L * L.transpose();
  Eigen::LLT<Matrix> llt_w(W);
  Matrix X = llt_w.solve(Matrix::Identity(p, p));
  // column-wise solves are not bitwise symmetric; the cell invariant is
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = i + 1; j < p; ++j) X(j, i) = X(i, j);
  return X;
}

MhCovResult mh_step_constrained_cov(const Eigen::Vector2d& current,
                                    const std::function<double(const Eigen::Vector2d&)>& log_target,
                                    const Eigen::Vector2d& step_scales, RngStream& rng) {
  Eigen::Vector2d prop = current;
  prop[0] += step_scales[0] * norm_quantile(rng.uniform());
  prop[1] += step_scales[1] * norm_quantile(rng.uniform());
  if (!ConstrainedCovPrior::in_region(prop)) return {current, false};
  const double log_ratio = log_target(prop) - log_target(current);
  if (std::log(rng.uniform()) < log_ratio) return {prop, true};
  return {current, false};
}

}  // namespace pstrat

#ifndef PSTRAT_SAMPLERS_HPP
#define PSTRAT_SAMPLERS_HPP

#include <Eigen/Dense>

#include <functional>

#include "pstrat/rng.hpp"
#include "pstrat/types.hpp"

namespace pstrat {

// Random-variate primitives used by the Gibbs engine. All transforms are
// fixed algorithms on top of RngStream's uniform draws (normals via the
// AS 241 inverse CDF, gammas via Marsaglia-Tsang), so draws are
// reproducible bit for bit given (arguments, seed, call order). None of
// the std::<distribution> adapters are used; their output is
// implementation-defined.

double sample_normal(double mean, double var, RngStream& rng);

Vector sample_mvn(const Vector& mu, const Matrix& sigma, RngStream& rng);

/// Draw from N(mean, var) conditioned on (lo, hi). Inverse-CDF in the bulk;
/// beyond ~6 standard deviations one-sided intervals switch to an
/// exponential-proposal rejection sampler and two-sided intervals are
/// inverted in the complementary tail, which stays accurate where
/// Phi(a) and Phi(b) are both rounded to 1.
double sample_truncated_normal(double mean, double var, double lo, double hi, RngStream& rng);

double sample_gamma(double shape, double rate, RngStream& rng);

/// Inverse gamma with density ~ x^{-shape-1} exp(-rate/x); mean rate/(shape-1).
double sample_inverse_gamma(double shape, double rate, RngStream& rng);

double sample_beta(double a, double b, RngStream& rng);

/// Inverse Wishart with mean scale/(df - p - 1), via a Bartlett draw of the
/// Wishart(scale^{-1}, df) precision.
Matrix sample_inverse_wishart(double df, const Matrix& scale, RngStream& rng);

struct MhCovResult {
  Eigen::Vector2d state;
  bool accepted = false;
};

/// One random-walk Metropolis step on the constrained covariance block
/// (sigma11, sigma12), sigma22 = 1. Proposals are independent Gaussian
/// perturbations with per-coordinate step scales; anything outside the
/// positive-definite region A = {sigma11 > sigma12^2, sigma11 > 0} is
/// rejected outright (the target is zero there).
MhCovResult mh_step_constrained_cov(const Eigen::Vector2d& current,
                                    const std::function<double(const Eigen::Vector2d&)>& log_target,
                                    const Eigen::Vector2d& step_scales, RngStream& rng);

}  // namespace pstrat

#endif

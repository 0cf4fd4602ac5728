#include "pstrat/model.hpp"

#include <cmath>
#include <sstream>

#include "pstrat/gauss.hpp"

namespace pstrat {

namespace {

double log_bvn(double y1, double y2, const CellParams& cell) {
  const double s11 = cell.sigma(0, 0), s12 = cell.sigma(0, 1), s22 = cell.sigma(1, 1);
  const double det = s11 * s22 - s12 * s12;
  if (!(det > 0.0) || !(s11 > 0.0))
    throw std::invalid_argument("cell_log_density: covariance not positive definite");
  const double d1 = y1 - cell.mu[0];
  const double d2 = y2 - cell.mu[1];
  const double quad = (s22 * d1 * d1 - 2.0 * s12 * d1 * d2 + s11 * d2 * d2) / det;
  return -kLog2Pi - 0.5 * std::log(det) - 0.5 * quad;
}

double log_probit_margin(const ObservedUnit& u, const CellParams& cell) {
  const double s11 = cell.sigma(0, 0), s12 = cell.sigma(0, 1);
  const double cond_var = 1.0 - s12 * s12 / s11;
  if (!(cond_var > 0.0) || !(s11 > 0.0))
    throw std::invalid_argument("cell_log_density: covariance outside the sigma22=1 region");
  const double m = (cell.mu[1] + (s12 / s11) * (u.y1 - cell.mu[0])) / std::sqrt(cond_var);
  // log Phi(m) / log(1 - Phi(m)) through the survival function, tail-safe.
  const double p = u.y2 > 0.5 ? norm_sf(-m) : norm_sf(m);
  if (p > 0.0) return std::log(p);
  const double t = u.y2 > 0.5 ? -m : m;  // p underflowed; use the asymptotic tail expansion
  return -0.5 * t * t - 0.5 * kLog2Pi - std::log(t);
}

bool is_binary(double v) { return v == 0.0 || v == 1.0; }

}  // namespace

const ObservedDataset& validate_dataset(const ObservedDataset& data, const ModelSpec& spec) {
  if (data.n() < 1) throw ValidationError("dataset is empty");
  int n0 = 0, n1 = 0;
  for (int i = 0; i < data.n(); ++i) {
    const auto& u = data.units[i];
    std::ostringstream at;
    at << "unit " << i << ": ";
    if (u.z != 0 && u.z != 1) throw ValidationError(at.str() + "z must be 0 or 1");
    if (u.d != 0 && u.d != 1) throw ValidationError(at.str() + "d must be 0 or 1");
    if (u.z == 0 && u.d == 1)
      throw ValidationError(at.str() + "one-sided noncompliance violated (z=0 with d=1)");
    if (!std::isfinite(u.y1)) throw ValidationError(at.str() + "y1 is not finite");
    switch (spec.family) {
      case Family::Univariate:
        break;  // y2, if present, is ignored
      case Family::ContinuousBinary:
        if (!u.has_y2() || !is_binary(u.y2))
          throw ValidationError(at.str() + "y2 must be 0 or 1 for the probit family");
        break;
      case Family::ContinuousContinuous:
        if (!u.has_y2() || !std::isfinite(u.y2))
          throw ValidationError(at.str() + "y2 must be a finite real");
        break;
    }
    (u.z == 0 ? n0 : n1)++;
  }
  if (n0 == 0 || n1 == 0) throw ValidationError("both assignment arms must be non-empty");
  return data;
}

double cell_log_density(const ObservedUnit& u, const CellParams& cell, Family family) {
  switch (family) {
    case Family::Univariate: {
      const double var = cell.sigma(0, 0);
      if (!(var > 0.0)) throw std::invalid_argument("cell_log_density: variance must be positive");
      return log_norm_pdf(u.y1, cell.mu[0], var);
    }
    case Family::ContinuousContinuous:
      return log_bvn(u.y1, u.y2, cell);
    case Family::ContinuousBinary:
      return log_norm_pdf(u.y1, cell.mu[0], cell.sigma(0, 0)) + log_probit_margin(u, cell);
  }
  throw std::logic_error("cell_log_density: unknown family");
}

double log_prior(const Theta& theta, const ModelSpec& spec) {
  const Priors& pr = spec.priors;
  double lp = 0.0;

  // Beta prior on pi_c (log kernel plus normalizer).
  lp += (pr.pi_a - 1.0) * std::log(theta.pi_c) + (pr.pi_b - 1.0) * std::log(1.0 - theta.pi_c);
  lp += std::lgamma(pr.pi_a + pr.pi_b) - std::lgamma(pr.pi_a) - std::lgamma(pr.pi_b);

  const bool er = spec.restriction == Restriction::ER;
  const bool per = spec.restriction == Restriction::PER;
  for (int idx = 0; idx < 4; ++idx) {
    const bool tied_cell = cell_stratum(idx) == Stratum::NeverTaker && cell_arm(idx) == 1;
    if (er && tied_cell) continue;  // whole cell duplicates (n,0)
    const CellParams& cell = theta.cells[idx];
    for (int r = 0; r < cell.dim(); ++r) {
      if (per && tied_cell && r == 1) continue;  // mu2 duplicates (n,0)
      lp += log_norm_pdf(cell.mu[r], 0.0, pr.mean_variance);
    }
    switch (spec.family) {
      case Family::Univariate: {
        if (spec.fixed_variances) break;
        const double v = cell.sigma(0, 0);
        lp += pr.var_shape * std::log(pr.var_rate) - std::lgamma(pr.var_shape) -
              (pr.var_shape + 1.0) * std::log(v) - pr.var_rate / v;
        break;
      }
      case Family::ContinuousContinuous: {
        const double df = pr.wishart_df;
        const Eigen::Matrix2d psi = pr.wishart_scale;
        Eigen::Matrix2d sig = cell.sigma;
        const double det_sig = sig.determinant();
        const double det_psi = psi.determinant();
        if (!(det_sig > 0.0)) return -std::numeric_limits<double>::infinity();
        const Eigen::Matrix2d sig_inv = sig.inverse();
        // Inverse-Wishart log density, p = 2.
        lp += 0.5 * df * std::log(det_psi) - df * std::log(2.0) -
              (std::lgamma(0.5 * df) + std::lgamma(0.5 * (df - 1.0)) + 0.5 * std::log(M_PI)) -
              0.5 * (df + 3.0) * std::log(det_sig) - 0.5 * (psi * sig_inv).trace();
        break;
      }
      case Family::ContinuousBinary: {
        const Eigen::Vector2d s(cell.sigma(0, 0), cell.sigma(0, 1));
        if (!ConstrainedCovPrior::in_region(s)) return -std::numeric_limits<double>::infinity();
        const Eigen::Vector2d d = s - pr.cov.sigma0;
        const Eigen::Matrix2d S0 = pr.cov.Sigma0;
        const double det0 = S0.determinant();
        const double quad = d.dot(S0.inverse() * d);
        lp += -kLog2Pi - 0.5 * std::log(det0) - 0.5 * quad;
        break;
      }
    }
  }
  return lp;
}

double observed_data_log_likelihood(const Theta& theta, const ObservedDataset& data,
                                    const ModelSpec& spec) {
  const double log_pi_c = std::log(theta.pi_c);
  const double log_pi_n = std::log(1.0 - theta.pi_c);
  double ll = 0.0;
  for (const auto& u : data.units) {
    if (u.z == 1) {
      const Stratum s = u.d == 1 ? Stratum::Complier : Stratum::NeverTaker;
      ll += (u.d == 1 ? log_pi_c : log_pi_n) + cell_log_density(u, theta.cell(s, 1), spec.family);
    } else {
      const double lc = log_pi_c + cell_log_density(u, theta.cell(Stratum::Complier, 0), spec.family);
      const double ln = log_pi_n + cell_log_density(u, theta.cell(Stratum::NeverTaker, 0), spec.family);
      ll += log_add_exp(lc, ln);
    }
  }
  return ll;
}

double complete_data_log_posterior(const Theta& theta, const ObservedDataset& data,
                                   const AugmentedState& aug, const ModelSpec& spec) {
  if (static_cast<int>(aug.s.size()) != data.n())
    throw std::invalid_argument("complete_data_log_posterior: label count mismatch");
  const double log_pi_c = std::log(theta.pi_c);
  const double log_pi_n = std::log(1.0 - theta.pi_c);
  double lp = log_prior(theta, spec);
  for (int i = 0; i < data.n(); ++i) {
    const auto& u = data.units[i];
    const Stratum s = aug.s[i];
    if (u.z == 1 && s != (u.d == 1 ? Stratum::Complier : Stratum::NeverTaker))
      throw std::invalid_argument("complete_data_log_posterior: augmentation inconsistent with z=1 take-up");
    lp += (s == Stratum::Complier ? log_pi_c : log_pi_n) +
          cell_log_density(u, theta.cell(s, u.z), spec.family);
  }
  return lp;
}

Theta apply_restriction(Theta theta, const ModelSpec& spec) {
  switch (spec.restriction) {
    case Restriction::None:
      return theta;
    case Restriction::ER:
      theta.cell(Stratum::NeverTaker, 1) = theta.cell(Stratum::NeverTaker, 0);
      return theta;
    case Restriction::PER:
      if (theta.family == Family::Univariate)
        throw std::invalid_argument("apply_restriction: PER requires a bivariate family");
      theta.cell(Stratum::NeverTaker, 1).mu[1] = theta.cell(Stratum::NeverTaker, 0).mu[1];
      return theta;
  }
  throw std::logic_error("apply_restriction: unknown restriction");
}

double complier_posterior_prob(const Theta& theta, const ObservedUnit& u) {
  if (u.z == 1) return u.d == 1 ? 1.0 : 0.0;
  const double lc = std::log(theta.pi_c) +
                    cell_log_density(u, theta.cell(Stratum::Complier, 0), theta.family);
  const double ln = std::log(1.0 - theta.pi_c) +
                    cell_log_density(u, theta.cell(Stratum::NeverTaker, 0), theta.family);
  if (std::isinf(lc) && std::isinf(ln))
    throw std::runtime_error("complier_posterior_prob: both component densities vanished");
  // 1 / (1 + exp(ln - lc)) evaluated stably.
  const double diff = ln - lc;
  if (diff > 0.0) {
    const double e = std::exp(-diff);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(diff));
}

const char* theta_violation(const Theta& theta) {
  if (!(theta.pi_c > 0.0 && theta.pi_c < 1.0)) return "pi_c outside (0,1)";
  for (const auto& cell : theta.cells) {
    for (int r = 0; r < cell.dim(); ++r)
      if (!std::isfinite(cell.mu[r])) return "non-finite cell mean";
    if (!cell.sigma.allFinite()) return "non-finite cell covariance";
    if (cell.dim() == 1) {
      if (!(cell.sigma(0, 0) > 0.0)) return "non-positive variance";
    } else {
      const double det = cell.sigma(0, 0) * cell.sigma(1, 1) - cell.sigma(0, 1) * cell.sigma(1, 0);
      if (!(cell.sigma(0, 0) > 0.0 && det > 0.0)) return "covariance not positive definite";
      if (theta.family == Family::ContinuousBinary && cell.sigma(1, 1) != 1.0)
        return "sigma22 != 1 in the probit family";
    }
  }
  return nullptr;
}

}  // namespace pstrat

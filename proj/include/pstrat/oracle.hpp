#ifndef PSTRAT_ORACLE_HPP
#define PSTRAT_ORACLE_HPP

#include <array>
#include <cstddef>

#include "pstrat/types.hpp"

namespace pstrat {

struct GridAxis {
  double lo = 0.0;
  double hi = 1.0;
  int points = 3;
};

/// Quadrature grid over (pi_c, mu1_c0, mu1_n0, mu1_c1, mu1_n1) for the
/// univariate family with the four variances held at known values.
struct GridSpec {
  GridAxis pi_c;
  GridAxis mu_c0;
  GridAxis mu_n0;
  GridAxis mu_c1;
  GridAxis mu_n1;

  std::size_t total_nodes() const;
};

/// Data-driven default bounds: each mean axis spans its informative group's
/// range plus three sample standard deviations; pi_c spans (0.02, 0.98).
GridSpec default_grid(const ObservedDataset& data, int points_pi = 25, int points_mu = 15);

struct GridPosterior {
  double mean_pi_c = 0.0;
  double mean_tau_c = 0.0;
  double mean_tau_n = 0.0;
  double log_normalizer = 0.0;
  bool boundary_mass_warning = false;
  std::size_t n_nodes = 0;
  std::vector<double> probabilities;  // normalized node table, when requested
};

/// Brute-force posterior for tiny univariate problems: evaluates
/// prior x observed-data likelihood at every grid node in log space,
/// normalizes by log-sum-exp (compensated summation) and returns posterior
/// means of pi_c and the two principal effects. Validation instrument for
/// the Gibbs engine, not a user-facing fit. `keep_table` additionally
/// stores the normalized node probabilities (node order: pi_c outermost,
/// then mu_c0, mu_n0, mu_c1, mu_n1).
GridPosterior grid_posterior(const ObservedDataset& data, const Priors& priors,
                             const std::array<double, 4>& fixed_variances, const GridSpec& grid,
                             bool keep_table = false);

}  // namespace pstrat

#endif

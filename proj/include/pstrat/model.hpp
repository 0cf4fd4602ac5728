#ifndef PSTRAT_MODEL_HPP
#define PSTRAT_MODEL_HPP

#include "pstrat/types.hpp"

namespace pstrat {

/// Checks every dataset invariant for the given model spec and returns the
/// dataset unchanged. Violations name the first offending unit (0-based)
/// and the rule. One-sided noncompliance means no unit may have z=0, d=1.
const ObservedDataset& validate_dataset(const ObservedDataset& data, const ModelSpec& spec);

/// Log outcome density of one unit's observation under a (stratum, arm)
/// cell. Univariate: normal in y1. ContinuousContinuous: bivariate normal.
/// ContinuousBinary: normal in y1 times the probit margin of y2 given y1
/// (the latent utility integrated out; sigma22 = 1).
double cell_log_density(const ObservedUnit& u, const CellParams& cell, Family family);

/// Log prior density of theta (up to the constant truncation mass of the
/// constrained covariance prior). Parameters tied by the active restriction
/// are counted once.
double log_prior(const Theta& theta, const ModelSpec& spec);

/// The observed-data log likelihood: z=1 units contribute their known-cell
/// density weighted by the stratum probability; each z=0 unit contributes a
/// two-component mixture term, evaluated in log space.
double observed_data_log_likelihood(const Theta& theta, const ObservedDataset& data,
                                    const ModelSpec& spec);

/// Log posterior given a full augmentation (labels, and latent utilities
/// for the probit family): log prior plus per-unit complete-data terms,
/// with no mixture sums left. Latent utilities enter through the exact
/// probit margin, so marginalizing the labels recovers the observed-data
/// likelihood.
double complete_data_log_posterior(const Theta& theta, const ObservedDataset& data,
                                   const AugmentedState& aug, const ModelSpec& spec);

/// Enforces the active restriction by copying the control-arm never-taker
/// parameters into the treated-arm cell (all of them under ER, the mu2
/// coordinate under PER). Identity when no restriction is active.
Theta apply_restriction(Theta theta, const ModelSpec& spec);

/// P(S = Complier | y, z, theta) for a single unit. Deterministic for z=1
/// units; Bayes rule on the two z=0 component densities otherwise.
double complier_posterior_prob(const Theta& theta, const ObservedUnit& u);

/// Theta sanity: pi_c in (0,1), finite cells, positive-definite covariances,
/// sigma22 = 1 and sigma11 > sigma12^2 for the probit family. Returns the
/// name of the first violated rule, or nullptr.
const char* theta_violation(const Theta& theta);

}  // namespace pstrat

#endif

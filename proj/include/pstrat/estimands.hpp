#ifndef PSTRAT_ESTIMANDS_HPP
#define PSTRAT_ESTIMANDS_HPP

#include <optional>
#include <vector>

#include "pstrat/types.hpp"

namespace pstrat {

/// Principal causal effect on the primary outcome within stratum s:
/// mu1(s, z=1) - mu1(s, z=0).
double tau(const Theta& theta, Stratum s);

/// Effect of assignment on the secondary outcome within stratum s. Probit
/// family: Phi(mu2(s,1)) - Phi(mu2(s,0)); continuous family: difference of
/// the mu2 coordinates. Rejects the univariate family.
double secondary_effect(const Theta& theta, Stratum s);

struct PosteriorSummary {
  double median = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  double width = 0.0;
  double prob_negative = 0.0;
  double mean = 0.0;
};

/// Type-7 quantile (linear interpolation of the empirical CDF) of a sorted
/// sample.
double quantile_sorted(const std::vector<double>& sorted, double p);

/// Equal-tailed empirical summary of a scalar draw sequence (>= 2 draws).
PosteriorSummary summarize(const std::vector<double>& draws);

/// Potential scale-reduction factor of Gelman & Rubin (1992), unsplit
/// chains: sqrt(((n-1)/n * W + B/n) / W), floored at 1. W = 0 with
/// between-chain spread reports +inf; fully degenerate input reports 1.
double gelman_rubin(const std::vector<std::vector<double>>& chains);

struct KdeGrid {
  std::vector<double> x;
  std::vector<double> density;
  double bandwidth = 0.0;
};

/// Gaussian kernel density on a 512-point grid spanning the data plus
/// three bandwidths. Default bandwidth is Silverman's rule
/// 0.9 * min(sd, IQR/1.34) * n^(-1/5).
KdeGrid kde(const std::vector<double>& draws, std::optional<double> bandwidth = std::nullopt);

/// Correlation ratio of the secondary outcome within arm z: the share of
/// its total variance explained by the stratum split.
double correlation_ratio(double pi_c, const std::array<CellParams, 4>& cells, int z);
double correlation_ratio(const Theta& theta, int z);

}  // namespace pstrat

#endif

#ifndef PSTRAT_PPC_HPP
#define PSTRAT_PPC_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pstrat/gibbs.hpp"
#include "pstrat/types.hpp"

namespace pstrat {

enum class MeasureKind { Signal, Noise, SignalToNoise, Chi2, KS };

struct MeasureId {
  MeasureKind kind;
  int outcome = 1;    // 1 or 2
  int stratum = -1;   // 0 = complier, 1 = never-taker; -1 when not applicable

  bool operator==(const MeasureId&) const = default;
};

/// Report order of the discrepancy measures for a family: per outcome the
/// signal/noise/signal-to-noise pairs by stratum, then the chi-square; the
/// Kolmogorov-Smirnov statistic (primary outcome only) closes the first
/// block.
std::vector<MeasureId> measure_list(Family family);
std::string measure_name(const MeasureId& m);

/// Discrepancy values for one study (observed-with-imputed-labels or
/// replicated), aligned with measure_list. A missing value marks an
/// undefined discrepancy (a group too small for a variance).
using Discrepancies = std::vector<std::optional<double>>;

struct SiNoSn {
  double si = 0.0;
  double no = 0.0;
  double sn = 0.0;
};

/// Signal |mean difference|, noise (standard error of the difference) and
/// their ratio for outcome m within stratum s, comparing arms. Undefined
/// unless both groups have >= 2 units.
std::optional<SiNoSn> discrepancy_si_no_sn(const ObservedDataset& data,
                                           const std::vector<Stratum>& labels, int outcome,
                                           Stratum s);

/// Sum of squared standardized residuals against the cell moments
/// (marginal moments for y1; probit success probability for a binary y2).
/// outcome = 0 sums over all modeled outcomes. Units whose probit
/// probability degenerates to 0 or 1 are excluded and counted.
double chi2_discrepancy(const ObservedDataset& data, const std::vector<Stratum>& labels,
                        const Theta& theta, int outcome = 0, int* n_excluded = nullptr);

/// Max over arms of the Kolmogorov-Smirnov distance between the empirical
/// y1 distribution and the model-implied two-component mixture CDF.
double ks_discrepancy(const ObservedDataset& data, const Theta& theta);

Discrepancies compute_discrepancies(const ObservedDataset& data, const std::vector<Stratum>& labels,
                                    const Theta& theta);

struct Replicate {
  ObservedDataset data;
  std::vector<Stratum> labels;
};

/// Posterior-predictive replicate on the observed design: z is kept,
/// strata are redrawn from pi_c, take-up follows the stratum, and outcomes
/// come from the (stratum, arm) cells (binary y2 through the latent
/// utility).
Replicate replicate_dataset(const Theta& theta, const ObservedDataset& data_template,
                            RngStream& rng);

struct PValueReport {
  std::string method;
  std::vector<MeasureId> measures;
  std::vector<std::optional<double>> p;  // aligned with `measures`
  std::vector<int> n_valid;
  std::vector<int> n_undefined;
  int K = 0;
  int J = 0;
  std::uint64_t seed = 0;

  std::optional<double> p_of(const MeasureId& m) const;
};

/// Tail fraction over realized/replicated pairs: (#{rep > obs} + ties/2) /
/// #valid. Pairs with either side undefined are skipped; throws when no
/// pair is valid.
double pppv_from_pairs(const std::vector<std::pair<std::optional<double>, std::optional<double>>>& pairs);

/// Posterior predictive p-values over every stored draw: per draw, labels
/// for the observed data are imputed at that draw (the realized
/// discrepancy), one replicate is generated, and the tail fraction is
/// accumulated per measure.
PValueReport pppv(const DrawStore& draws, const ObservedDataset& data, std::uint64_t seed,
                  int threads = 1);

/// Single-measure convenience wrapper.
double pppv_measure(const DrawStore& draws, const ObservedDataset& data, const MeasureId& m,
                    std::uint64_t seed);

/// Sampled posterior p-value at a single parameter draw: K replicates, tie
/// mass split by a uniform epsilon, one draw from Beta(a+1, b+1) per
/// measure.
PValueReport sppv(const Theta& theta_star, const ObservedDataset& data, int K, std::uint64_t seed);

/// Quantile-combined sampled posterior p-value: u ~ U(0,1), J parameter
/// draws, J per-measure SPPVs, combined by the empirical u-quantile.
PValueReport modified_sppv(const DrawStore& draws, const ObservedDataset& data, int J, int K,
                           std::uint64_t seed, int threads = 1);

}  // namespace pstrat

#endif

#ifndef PSTRAT_SIMLAB_HPP
#define PSTRAT_SIMLAB_HPP

#include <map>
#include <string>

#include "pstrat/estimands.hpp"
#include "pstrat/fit.hpp"
#include "pstrat/gibbs.hpp"
#include "pstrat/types.hpp"

namespace pstrat {

/// One of the seven simulation designs: a ContinuousContinuous truth with
/// fixed complier cells, scenario-specific never-taker cells, n = 600 and
/// complier probability 0.7.
struct Scenario {
  int id = 1;  // 1..7
  Theta truth;
  int n = 600;
  double pi_c = 0.7;
};

Scenario scenario_params(int id);
int scenario_from_roman(const std::string& roman);
std::string scenario_roman(int id);

/// A generated dataset with its ground-truth stratum labels held apart from
/// the observable records; fitting code only ever receives `data`.
struct SimulatedDataset {
  ObservedDataset data;
  std::vector<Stratum> truth_labels;
};

/// Draws strata iid Bernoulli(pi_c), assigns exactly n/2 units to treatment
/// by random permutation, sets d = z * 1{complier}, and samples outcomes
/// from the true cells.
SimulatedDataset generate_dataset(const Scenario& scenario, std::uint64_t seed);

struct ComparisonResult {
  int scenario_id = 0;
  std::uint64_t seed = 0;
  std::vector<FitResult> fits;

  const FitResult& fit(Variant v) const;
};

/// Fits each variant to one dataset generated from the scenario.
ComparisonResult run_comparison(const Scenario& scenario, const std::vector<Variant>& variants,
                                const ChainConfig& config, std::uint64_t seed);

/// Point estimate and interval for one estimand in one replication.
struct ReplicateEstimate {
  double point = 0.0;  // posterior median
  double lo = 0.0;
  double hi = 0.0;
};

struct EstimandRecovery {
  double truth = 0.0;
  double bias = 0.0;
  double percent_bias = 0.0;  // 100 * bias / |truth|
  double mse = 0.0;
  double coverage = 0.0;
  double mean_width = 0.0;
  int n_reps = 0;
};

EstimandRecovery aggregate_recovery(const std::vector<ReplicateEstimate>& estimates, double truth);

struct RecoveryReport {
  int scenario_id = 0;
  int replications = 0;
  // keyed by (variant name, estimand name)
  std::map<std::pair<std::string, std::string>, EstimandRecovery> metrics;
};

/// Repeated-sampling study: R independent datasets (seeds derived from
/// config.seed and the replicate index), per-variant fits, and
/// bias / percent bias / MSE / coverage / width aggregation with the
/// posterior median as point estimate.
RecoveryReport repeated_sampling_study(const Scenario& scenario, int replications,
                                       const std::vector<Variant>& variants,
                                       const ChainConfig& config);

}  // namespace pstrat

#endif

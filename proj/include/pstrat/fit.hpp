#ifndef PSTRAT_FIT_HPP
#define PSTRAT_FIT_HPP

#include <string>
#include <vector>

#include "pstrat/estimands.hpp"
#include "pstrat/gibbs.hpp"
#include "pstrat/types.hpp"

namespace pstrat {

/// Scalar estimands reported for a fitted variant, in output order.
/// tau_n is omitted under ER (identically zero by the tie); the secondary
/// effects appear for bivariate families only.
std::vector<std::string> variant_estimands(const ModelSpec& spec);

double estimand_value(const std::string& name, const Theta& theta);

struct FitResult {
  Variant variant = Variant::Bivariate;
  ModelSpec spec;
  DrawStore draws;
  std::vector<std::string> estimands;
  std::vector<PosteriorSummary> summaries;          // aligned with `estimands`
  std::vector<double> psrf;                         // NaN when a single chain
  bool converged = true;                            // all PSRF < 1.1

  const PosteriorSummary& summary(const std::string& estimand) const;
  double psrf_of(const std::string& estimand) const;
};

/// Fits one variant: builds the variant's spec, projects y2 away for
/// univariate variants, runs the chains and summarizes the estimand draws.
/// Chain seeds derive from (seed, variant index, chain).
FitResult fit_variant(const ObservedDataset& data, Variant v, Family declared_family,
                      const Priors& priors, const ChainConfig& config, std::uint64_t seed);

/// Drops the secondary outcome (univariate ingestion projection).
ObservedDataset project_univariate(const ObservedDataset& data);

}  // namespace pstrat

#endif

#include "pstrat/fit.hpp"

#include <algorithm>
#include <cmath>

#include "pstrat/model.hpp"

namespace pstrat {

std::vector<std::string> variant_estimands(const ModelSpec& spec) {
  std::vector<std::string> names{"tau_c"};
  if (spec.restriction != Restriction::ER) names.push_back("tau_n");
  names.push_back("pi_c");
  if (spec.family != Family::Univariate) {
    names.push_back("y2_effect_c");
    if (spec.restriction != Restriction::ER && spec.restriction != Restriction::PER)
      names.push_back("y2_effect_n");
  }
  return names;
}

double estimand_value(const std::string& name, const Theta& theta) {
  if (name == "tau_c") return tau(theta, Stratum::Complier);
  if (name == "tau_n") return tau(theta, Stratum::NeverTaker);
  if (name == "pi_c") return theta.pi_c;
  if (name == "y2_effect_c") return secondary_effect(theta, Stratum::Complier);
  if (name == "y2_effect_n") return secondary_effect(theta, Stratum::NeverTaker);
  throw std::invalid_argument("unknown estimand: " + name);
}

const PosteriorSummary& FitResult::summary(const std::string& estimand) const {
  for (std::size_t i = 0; i < estimands.size(); ++i)
    if (estimands[i] == estimand) return summaries[i];
  throw std::out_of_range("FitResult: no summary for " + estimand);
}

double FitResult::psrf_of(const std::string& estimand) const {
  for (std::size_t i = 0; i < estimands.size(); ++i)
    if (estimands[i] == estimand) return psrf[i];
  throw std::out_of_range("FitResult: no PSRF for " + estimand);
}

ObservedDataset project_univariate(const ObservedDataset& data) {
  ObservedDataset out = data;
  for (auto& u : out.units) u.y2 = std::numeric_limits<double>::quiet_NaN();
  return out;
}

FitResult fit_variant(const ObservedDataset& data, Variant v, Family declared_family,
                      const Priors& priors, const ChainConfig& config, std::uint64_t seed) {
  FitResult res;
  res.variant = v;
  res.spec = make_variant_spec(v, declared_family, priors);
  const bool univariate = res.spec.family == Family::Univariate;
  const ObservedDataset fitted = univariate ? project_univariate(data) : data;
  validate_dataset(fitted, res.spec);

  ChainConfig chain_config = config;
  std::vector<std::uint64_t> chain_seeds;
  chain_seeds.reserve(config.n_chains);
  for (int c = 0; c < config.n_chains; ++c)
    chain_seeds.push_back(RngStream::derive(seed, {0xF17u, static_cast<std::uint64_t>(v),
                                                   static_cast<std::uint64_t>(c)})
                              .seed());
  res.draws = run_chains(fitted, res.spec, chain_config, chain_seeds);

  res.estimands = variant_estimands(res.spec);
  for (const auto& name : res.estimands) {
    auto extract = [&name](const Theta& t) { return estimand_value(name, t); };
    res.summaries.push_back(summarize(res.draws.flat(extract)));
    double r = std::numeric_limits<double>::quiet_NaN();
    if (config.n_chains >= 2) r = gelman_rubin(res.draws.per_chain(extract));
    res.psrf.push_back(r);
    if (std::isfinite(r) && r > 1.1) res.converged = false;
    if (std::isinf(r)) res.converged = false;
  }
  return res;
}

}  // namespace pstrat

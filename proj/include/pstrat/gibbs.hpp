#ifndef PSTRAT_GIBBS_HPP
#define PSTRAT_GIBBS_HPP

#include <functional>

#include "pstrat/model.hpp"
#include "pstrat/rng.hpp"
#include "pstrat/samplers.hpp"
#include "pstrat/types.hpp"

namespace pstrat {

struct ChainConfig {
  int n_iter = 15000;
  int n_burnin = 5000;
  int thin = 1;
  int n_chains = 3;
  std::uint64_t seed = 0;
  InitStrategy init = InitStrategy::MomentPerturb;
  int threads = 0;  // worker cap for multi-chain runs; 0 = hardware
};

void validate_config(const ChainConfig& config);

/// Post-burn-in, thinned draws, one sequence per chain, plus the metadata
/// needed to reproduce the run.
struct DrawStore {
  ModelSpec spec;
  ChainConfig config;
  std::vector<std::uint64_t> chain_seeds;
  std::vector<std::vector<Theta>> chains;

  std::size_t total_draws() const {
    std::size_t n = 0;
    for (const auto& c : chains) n += c.size();
    return n;
  }
  const Theta& draw(std::size_t flat) const {
    for (const auto& c : chains) {
      if (flat < c.size()) return c[flat];
      flat -= c.size();
    }
    throw std::out_of_range("DrawStore::draw");
  }
  std::vector<std::vector<double>> per_chain(const std::function<double(const Theta&)>& f) const {
    std::vector<std::vector<double>> out;
    out.reserve(chains.size());
    for (const auto& c : chains) {
      std::vector<double> v;
      v.reserve(c.size());
      for (const auto& t : c) v.push_back(f(t));
      out.push_back(std::move(v));
    }
    return out;
  }
  std::vector<double> flat(const std::function<double(const Theta&)>& f) const {
    std::vector<double> v;
    v.reserve(total_draws());
    for (const auto& c : chains)
      for (const auto& t : c) v.push_back(f(t));
    return v;
  }
};

/// Per-cell sufficient statistics of the currently assigned units:
/// count, sum of outcomes, sum of outer products. The univariate family
/// uses only the (0) and (0,0) slots; the probit family accumulates the
/// latent utilities in place of y2.
struct CellStats {
  double n = 0.0;
  Eigen::Vector2d s = Eigen::Vector2d::Zero();
  Eigen::Matrix2d s2 = Eigen::Matrix2d::Zero();
};

std::array<CellStats, 4> accumulate_cell_stats(const ObservedDataset& data,
                                               const AugmentedState& aug, Family family);

/// Random-walk step scales for the constrained covariance blocks, adapted
/// toward ~30% acceptance during burn-in and frozen afterwards.
struct MhAdaptState {
  std::array<Eigen::Vector2d, 4> scales{Eigen::Vector2d(0.2, 0.2), Eigen::Vector2d(0.2, 0.2),
                                        Eigen::Vector2d(0.2, 0.2), Eigen::Vector2d(0.2, 0.2)};
  std::array<int, 4> attempts{};
  std::array<int, 4> accepts{};

  void record(int cell, bool accepted);
  void maybe_adapt(int cell);
};

/// One label-imputation pass: z=1 units are deterministic from take-up,
/// each (z=0, d=0) unit is a Bernoulli draw from the Bayes-rule complier
/// probability at the current theta.
std::vector<Stratum> impute_strata(const Theta& theta, const ObservedDataset& data, RngStream& rng);

/// Probit-family utility imputation: each unit's y2* is drawn from its
/// normal conditional on y1 in the assigned cell, truncated to the side
/// implied by the observed y2.
std::vector<double> impute_latent_utilities(const Theta& theta, const ObservedDataset& data,
                                            const std::vector<Stratum>& labels, RngStream& rng);

/// Conjugate Beta update of pi_c from the current label counts.
double update_pi(const std::vector<Stratum>& labels, double prior_a, double prior_b, RngStream& rng);

/// Complete-data parameter update for all four cells. Restriction ties are
/// honored by pooling the tied cells' sufficient statistics into a single
/// shared draw, so tie equalities hold bitwise in the output. `adapting`
/// enables burn-in step-scale adaptation of the constrained-covariance
/// Metropolis blocks.
void update_cells(Theta& theta, const ObservedDataset& data, const AugmentedState& aug,
                  const ModelSpec& spec, MhAdaptState& mh, bool adapting, RngStream& rng);

Theta initial_theta(const ObservedDataset& data, const ModelSpec& spec, InitStrategy init,
                    int chain_index, RngStream& rng);

/// Runs one chain. Sweep order per iteration: impute_strata ->
/// impute_latent_utilities (probit family) -> update_pi -> update_cells ->
/// restriction enforcement. Throws with the iteration index and offending
/// block if the parameter state degenerates.
std::vector<Theta> run_chain(const ObservedDataset& data, const ModelSpec& spec,
                             const ChainConfig& config, std::uint64_t chain_seed,
                             int chain_index = 0, const Theta* init_override = nullptr);

/// Runs config.n_chains chains (concurrently when threads allow) with
/// seeds derived from config.seed; output order is by chain index.
DrawStore run_chains(const ObservedDataset& data, const ModelSpec& spec, const ChainConfig& config);

/// Same, with explicit per-chain seeds.
DrawStore run_chains(const ObservedDataset& data, const ModelSpec& spec, const ChainConfig& config,
                     const std::vector<std::uint64_t>& chain_seeds);

}  // namespace pstrat

#endif

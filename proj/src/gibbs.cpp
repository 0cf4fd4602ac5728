#include "pstrat/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pstrat/gauss.hpp"
#include "pstrat/parallel.hpp"

namespace pstrat {

void validate_config(const ChainConfig& config) {
  if (config.n_iter < 1) throw ValidationError("n_iter must be >= 1");
  if (config.n_burnin < 0 || config.n_burnin >= config.n_iter)
    throw ValidationError("n_burnin must satisfy 0 <= n_burnin < n_iter");
  if (config.thin < 1) throw ValidationError("thin must be >= 1");
  if (config.n_chains < 1) throw ValidationError("n_chains must be >= 1");
}

std::vector<Stratum> impute_strata(const Theta& theta, const ObservedDataset& data, RngStream& rng) {
  std::vector<Stratum> labels(data.units.size());
  for (std::size_t i = 0; i < data.units.size(); ++i) {
    const auto& u = data.units[i];
    if (u.z == 1) {
      labels[i] = u.d == 1 ? Stratum::Complier : Stratum::NeverTaker;
    } else {
      const double p = complier_posterior_prob(theta, u);
      labels[i] = rng.uniform() < p ? Stratum::Complier : Stratum::NeverTaker;
    }
  }
  return labels;
}

std::vector<double> impute_latent_utilities(const Theta& theta, const ObservedDataset& data,
                                            const std::vector<Stratum>& labels, RngStream& rng) {
  if (theta.family != Family::ContinuousBinary)
    throw std::invalid_argument("impute_latent_utilities: probit family only");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> ystar(data.units.size());
  for (std::size_t i = 0; i < data.units.size(); ++i) {
    const auto& u = data.units[i];
    const CellParams& cell = theta.cell(labels[i], u.z);
    const double s11 = cell.sigma(0, 0), s12 = cell.sigma(0, 1);
    const double cond_mean = cell.mu[1] + (s12 / s11) * (u.y1 - cell.mu[0]);
    const double cond_var = 1.0 - s12 * s12 / s11;
    ystar[i] = u.y2 > 0.5 ? sample_truncated_normal(cond_mean, cond_var, 0.0, inf, rng)
                          : sample_truncated_normal(cond_mean, cond_var, -inf, 0.0, rng);
  }
  return ystar;
}

double update_pi(const std::vector<Stratum>& labels, double prior_a, double prior_b, RngStream& rng) {
  double nc = 0.0;
  for (Stratum s : labels) nc += (s == Stratum::Complier);
  const double draw = sample_beta(prior_a + nc, prior_b + (static_cast<double>(labels.size()) - nc), rng);
  return std::clamp(draw, 1e-15, 1.0 - 1e-15);
}

std::array<CellStats, 4> accumulate_cell_stats(const ObservedDataset& data,
                                               const AugmentedState& aug, Family family) {
  std::array<CellStats, 4> stats;
  const bool probit = family == Family::ContinuousBinary;
  const bool bivariate = family != Family::Univariate;
  for (std::size_t i = 0; i < data.units.size(); ++i) {
    const auto& u = data.units[i];
    const int idx = cell_index(aug.s[i], u.z);
    CellStats& st = stats[idx];
    const double y2 = bivariate ? (probit ? aug.y2_star[i] : u.y2) : 0.0;
    st.n += 1.0;
    st.s[0] += u.y1;
    st.s[1] += y2;
    st.s2(0, 0) += u.y1 * u.y1;
    st.s2(0, 1) += u.y1 * y2;
    st.s2(1, 1) += y2 * y2;
  }
  for (auto& st : stats) st.s2(1, 0) = st.s2(0, 1);
  return stats;
}

void MhAdaptState::record(int cell, bool accepted) {
  attempts[cell] += 1;
  accepts[cell] += accepted ? 1 : 0;
}

void MhAdaptState::maybe_adapt(int cell) {
  constexpr int kBatch = 50;
  constexpr double kTargetRate = 0.30;
  if (attempts[cell] < kBatch) return;
  const double rate = static_cast<double>(accepts[cell]) / attempts[cell];
  const double factor = std::clamp(std::exp(rate - kTargetRate), 0.5, 2.0);
  scales[cell] *= factor;
  scales[cell] = scales[cell].cwiseMax(1e-6).cwiseMin(1e4);
  attempts[cell] = 0;
  accepts[cell] = 0;
}

namespace {

// Mean-tie structure of one update group. `coord_map[k][r]` gives, for
// member cell k and outcome coordinate r, the index of the distinct mean
// coordinate it reads.
struct TieGroup {
  std::vector<int> cells;
  std::vector<std::array<int, 2>> coord_map;
  int n_distinct = 0;
  bool shared_cov = false;
};

std::vector<TieGroup> tie_groups(const ModelSpec& spec, int dim) {
  auto singleton = [&](int idx) {
    TieGroup g;
    g.cells = {idx};
    g.coord_map = {{0, 1}};
    g.n_distinct = dim;
    return g;
  };
  const int n0 = cell_index(Stratum::NeverTaker, 0);
  const int n1 = cell_index(Stratum::NeverTaker, 1);
  std::vector<TieGroup> groups{singleton(cell_index(Stratum::Complier, 0)),
                               singleton(cell_index(Stratum::Complier, 1))};
  switch (spec.restriction) {
    case Restriction::None:
      groups.push_back(singleton(n0));
      groups.push_back(singleton(n1));
      break;
    case Restriction::ER: {
      TieGroup g;
      g.cells = {n0, n1};
      g.coord_map = {{0, 1}, {0, 1}};
      g.n_distinct = dim;
      g.shared_cov = true;
      groups.push_back(g);
      break;
    }
    case Restriction::PER: {
      // mu1 free per arm, mu2 shared; covariances free.
      TieGroup g;
      g.cells = {n0, n1};
      g.coord_map = {{0, 2}, {1, 2}};
      g.n_distinct = 3;
      groups.push_back(g);
      break;
    }
  }
  return groups;
}

Matrix cell_precision(const CellParams& cell, int dim) {
  if (dim == 1) {
    Matrix m(1, 1);
    m(0, 0) = 1.0 / cell.sigma(0, 0);
    return m;
  }
  return cell.sigma.inverse();
}

// Scatter matrix about mu: sum (y - mu)(y - mu)' from moment statistics.
Eigen::Matrix2d scatter_about(const CellStats& st, const Eigen::Vector2d& mu) {
  return st.s2 - st.s * mu.transpose() - mu * st.s.transpose() + st.n * mu * mu.transpose();
}

// Joint conjugate draw of the group's distinct mean coordinates given the
// current covariances: Gaussian with precision (I/v_a + sum_c n_c A' O A).
void update_group_means(Theta& theta, const TieGroup& g, const std::array<CellStats, 4>& stats,
                        const Priors& priors, int dim, RngStream& rng) {
  const int D = g.n_distinct;
  Matrix lambda = Matrix::Identity(D, D) / priors.mean_variance;
  Vector b = Vector::Zero(D);
  for (std::size_t k = 0; k < g.cells.size(); ++k) {
    const CellParams& cell = theta.cells[g.cells[k]];
    const CellStats& st = stats[g.cells[k]];
    if (st.n == 0.0) continue;
    const Matrix omega = cell_precision(cell, dim);
    for (int r = 0; r < dim; ++r) {
      const int dr = g.coord_map[k][r];
      for (int q = 0; q < dim; ++q) {
        lambda(dr, g.coord_map[k][q]) += st.n * omega(r, q);
        b[dr] += omega(r, q) * st.s[q];
      }
    }
  }
  Eigen::LLT<Matrix> llt(lambda);
  const Matrix post_cov = llt.solve(Matrix::Identity(D, D));
  const Vector post_mean = llt.solve(b);
  const Vector draw = sample_mvn(post_mean, post_cov, rng);
  for (std::size_t k = 0; k < g.cells.size(); ++k)
    for (int r = 0; r < dim; ++r) theta.cells[g.cells[k]].mu[r] = draw[g.coord_map[k][r]];
}

// Log target of the constrained covariance block (sigma11, sigma12) for one
// or two pooled cells with fixed means: truncated-normal prior plus the
// bivariate normal likelihood written with sigma22 = 1.
double constrained_cov_log_target(const Eigen::Vector2d& sig,
                                  const std::vector<const CellStats*>& stats,
                                  const std::vector<Eigen::Vector2d>& mus, const Priors& priors) {
  const double s11 = sig[0], s12 = sig[1];
  const double det = s11 - s12 * s12;
  const Eigen::Vector2d d = sig - priors.cov.sigma0;
  double lp = -0.5 * d.dot(priors.cov.Sigma0.inverse() * d);
  for (std::size_t k = 0; k < stats.size(); ++k) {
    const CellStats& st = *stats[k];
    if (st.n == 0.0) continue;
    const Eigen::Matrix2d m = scatter_about(st, mus[k]);
    const double tr = (m(0, 0) - 2.0 * s12 * m(0, 1) + s11 * m(1, 1)) / det;
    lp += -st.n * kLog2Pi - 0.5 * st.n * std::log(det) - 0.5 * tr;
  }
  return lp;
}

// Gibbs scan on the truncated covariance prior, used when no units inform
// the block: each conditional of the N(sigma0, Sigma0) prior truncated to
// the region A is a univariate truncated normal. Leaves the block's full
// conditional (the prior itself) invariant.
Eigen::Vector2d prior_cov_scan(Eigen::Vector2d sig, const ConstrainedCovPrior& prior, RngStream& rng) {
  const double m1 = prior.sigma0[0], m2 = prior.sigma0[1];
  const double v1 = prior.Sigma0(0, 0), v2 = prior.Sigma0(1, 1), c12 = prior.Sigma0(0, 1);
  const double inf = std::numeric_limits<double>::infinity();
  // sigma11 | sigma12 on (sigma12^2, inf)
  {
    const double cm = m1 + c12 / v2 * (sig[1] - m2);
    const double cv = v1 - c12 * c12 / v2;
    sig[0] = sample_truncated_normal(cm, cv, sig[1] * sig[1], inf, rng);
  }
  // sigma12 | sigma11 on (-sqrt(sigma11), sqrt(sigma11))
  {
    const double cm = m2 + c12 / v1 * (sig[0] - m1);
    const double cv = v2 - c12 * c12 / v1;
    const double bound = std::sqrt(sig[0]);
    sig[1] = sample_truncated_normal(cm, cv, -bound, bound, rng);
  }
  return sig;
}

void set_cb_sigma(CellParams& cell, const Eigen::Vector2d& sig) {
  cell.sigma(0, 0) = sig[0];
  cell.sigma(0, 1) = sig[1];
  cell.sigma(1, 0) = sig[1];
  cell.sigma(1, 1) = 1.0;
}

void update_group_covariance(Theta& theta, const TieGroup& g, const std::array<CellStats, 4>& stats,
                             const ModelSpec& spec, MhAdaptState& mh, bool adapting, RngStream& rng) {
  const Priors& pr = spec.priors;
  // Pool member cells when the covariance is shared; otherwise update each on its own.
  std::vector<std::vector<int>> blocks;
  if (g.shared_cov) {
    blocks.push_back(g.cells);
  } else {
    for (int c : g.cells) blocks.push_back({c});
  }
  for (const auto& block : blocks) {
    const int slot = block.front();
    switch (spec.family) {
      case Family::Univariate: {
        if (spec.fixed_variances) {
          for (int c : block) theta.cells[c].sigma(0, 0) = (*spec.fixed_variances)[c];
          break;
        }
        double n = 0.0, rss = 0.0;
        for (int c : block) {
          const CellStats& st = stats[c];
          const double mu = theta.cells[c].mu[0];
          n += st.n;
          rss += st.s2(0, 0) - 2.0 * mu * st.s[0] + st.n * mu * mu;
        }
        const double draw = sample_inverse_gamma(pr.var_shape + 0.5 * n, pr.var_rate + 0.5 * rss, rng);
        for (int c : block) theta.cells[c].sigma(0, 0) = draw;
        break;
      }
      case Family::ContinuousContinuous: {
        double n = 0.0;
        Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
        for (int c : block) {
          const CellStats& st = stats[c];
          n += st.n;
          scatter += scatter_about(st, theta.cells[c].mu.head<2>());
        }
        const Matrix draw = sample_inverse_wishart(pr.wishart_df + n, pr.wishart_scale + scatter, rng);
        for (int c : block) theta.cells[c].sigma = draw;
        break;
      }
      case Family::ContinuousBinary: {
        double n = 0.0;
        std::vector<const CellStats*> block_stats;
        std::vector<Eigen::Vector2d> block_mus;
        for (int c : block) {
          n += stats[c].n;
          block_stats.push_back(&stats[c]);
          block_mus.push_back(theta.cells[c].mu.head<2>());
        }
        Eigen::Vector2d sig(theta.cells[slot].sigma(0, 0), theta.cells[slot].sigma(0, 1));
        if (n == 0.0) {
          sig = prior_cov_scan(sig, pr.cov, rng);
        } else {
          auto target = [&](const Eigen::Vector2d& s) {
            return constrained_cov_log_target(s, block_stats, block_mus, pr);
          };
          const MhCovResult res = mh_step_constrained_cov(sig, target, mh.scales[slot], rng);
          sig = res.state;
          if (adapting) {
            mh.record(slot, res.accepted);
            mh.maybe_adapt(slot);
          }
        }
        for (int c : block) set_cb_sigma(theta.cells[c], sig);
        break;
      }
    }
  }
}

struct GroupMoments {
  double n = 0.0;
  double mean1 = 0.0, var1 = 1.0;
  double mean2 = 0.0, var2 = 1.0, cov12 = 0.0;
  double frac2 = 0.5;  // mean of a binary y2
};

GroupMoments group_moments(const ObservedDataset& data, const std::function<bool(const ObservedUnit&)>& in) {
  GroupMoments m;
  double s1 = 0, s2 = 0, s11 = 0, s22 = 0, s12 = 0;
  for (const auto& u : data.units) {
    if (!in(u)) continue;
    m.n += 1.0;
    s1 += u.y1;
    s11 += u.y1 * u.y1;
    if (u.has_y2()) {
      s2 += u.y2;
      s22 += u.y2 * u.y2;
      s12 += u.y1 * u.y2;
    }
  }
  if (m.n == 0.0) return m;
  m.mean1 = s1 / m.n;
  m.var1 = std::max(s11 / m.n - m.mean1 * m.mean1, 1e-4);
  m.mean2 = s2 / m.n;
  m.var2 = std::max(s22 / m.n - m.mean2 * m.mean2, 1e-4);
  m.cov12 = s12 / m.n - m.mean1 * m.mean2;
  m.frac2 = std::clamp(m.mean2, 1.0 / (m.n + 2.0), 1.0 - 1.0 / (m.n + 2.0));
  return m;
}

CellParams cell_from_moments(const GroupMoments& m, const ModelSpec& spec, int cell_idx) {
  const int dim = outcome_dim(spec.family);
  CellParams cell = CellParams::make(dim);
  cell.mu[0] = m.mean1;
  switch (spec.family) {
    case Family::Univariate:
      cell.sigma(0, 0) = spec.fixed_variances ? (*spec.fixed_variances)[cell_idx] : m.var1;
      break;
    case Family::ContinuousContinuous: {
      cell.mu[1] = m.mean2;
      double c12 = m.cov12;
      const double cap = 0.9 * std::sqrt(m.var1 * m.var2);
      c12 = std::clamp(c12, -cap, cap);
      cell.sigma << m.var1, c12, c12, m.var2;
      break;
    }
    case Family::ContinuousBinary:
      cell.mu[1] = norm_quantile(m.frac2);
      cell.sigma << m.var1, 0.0, 0.0, 1.0;
      break;
  }
  return cell;
}

}  // namespace

void update_cells(Theta& theta, const ObservedDataset& data, const AugmentedState& aug,
                  const ModelSpec& spec, MhAdaptState& mh, bool adapting, RngStream& rng) {
  const int dim = outcome_dim(spec.family);
  const auto stats = accumulate_cell_stats(data, aug, spec.family);
  // Fixed sweep order: complier cells by arm, then the never-taker group(s);
  // within each group the mean draw precedes the covariance draw.
  for (const TieGroup& g : tie_groups(spec, dim)) {
    update_group_means(theta, g, stats, spec.priors, dim, rng);
    update_group_covariance(theta, g, stats, spec, mh, adapting, rng);
  }
}

Theta initial_theta(const ObservedDataset& data, const ModelSpec& spec, InitStrategy init,
                    int chain_index, RngStream& rng) {
  Theta theta = Theta::make(spec.family);
  const Priors& pr = spec.priors;

  if (init == InitStrategy::PriorDraw) {
    theta.pi_c = std::clamp(sample_beta(pr.pi_a, pr.pi_b, rng), 1e-3, 1.0 - 1e-3);
    for (int idx = 0; idx < 4; ++idx) {
      CellParams& cell = theta.cells[idx];
      for (int r = 0; r < cell.dim(); ++r) cell.mu[r] = sample_normal(0.0, pr.mean_variance, rng);
      switch (spec.family) {
        case Family::Univariate:
          cell.sigma(0, 0) = spec.fixed_variances
                                 ? (*spec.fixed_variances)[idx]
                                 : std::clamp(sample_inverse_gamma(pr.var_shape, pr.var_rate, rng),
                                              1e-6, 1e12);
          break;
        case Family::ContinuousContinuous:
          cell.sigma = sample_inverse_wishart(pr.wishart_df, pr.wishart_scale, rng);
          break;
        case Family::ContinuousBinary: {
          Eigen::Vector2d sig(std::max(pr.cov.sigma0[0], 1.0), pr.cov.sigma0[1]);
          sig = prior_cov_scan(sig, pr.cov, rng);
          set_cb_sigma(cell, sig);
          break;
        }
      }
    }
    return apply_restriction(std::move(theta), spec);
  }

  // MomentPerturb: method-of-moments per observed (z, d) group; both z=0
  // cells start from the pooled control-arm moments. Chain-indexed offsets
  // of {0, +1, -1} prior standard deviations disperse the starting means
  // (and pi_c on its Beta scale).
  const auto anyone = [](const ObservedUnit&) { return true; };
  const GroupMoments all = group_moments(data, anyone);
  auto moments_or_all = [&](const std::function<bool(const ObservedUnit&)>& in) {
    GroupMoments m = group_moments(data, in);
    return m.n > 0.0 ? m : all;
  };
  const GroupMoments m11 = moments_or_all([](const ObservedUnit& u) { return u.z == 1 && u.d == 1; });
  const GroupMoments m10 = moments_or_all([](const ObservedUnit& u) { return u.z == 1 && u.d == 0; });
  const GroupMoments m0 = moments_or_all([](const ObservedUnit& u) { return u.z == 0; });

  theta.cell(Stratum::Complier, 1) = cell_from_moments(m11, spec, cell_index(Stratum::Complier, 1));
  theta.cell(Stratum::NeverTaker, 1) = cell_from_moments(m10, spec, cell_index(Stratum::NeverTaker, 1));
  theta.cell(Stratum::Complier, 0) = cell_from_moments(m0, spec, cell_index(Stratum::Complier, 0));
  theta.cell(Stratum::NeverTaker, 0) = cell_from_moments(m0, spec, cell_index(Stratum::NeverTaker, 0));

  const int n1 = data.count(1);
  theta.pi_c = n1 > 0 ? std::clamp(static_cast<double>(data.count(1, 1)) / n1, 0.05, 0.95) : 0.5;

  static const double kOffsets[3] = {0.0, 1.0, -1.0};
  const double offset = kOffsets[chain_index % 3];
  if (offset != 0.0) {
    const double mean_sd = std::sqrt(pr.mean_variance);
    for (auto& cell : theta.cells)
      for (int r = 0; r < cell.dim(); ++r) cell.mu[r] += offset * mean_sd;
    const double ab = pr.pi_a + pr.pi_b;
    const double beta_sd = std::sqrt(pr.pi_a * pr.pi_b / (ab * ab * (ab + 1.0)));
    theta.pi_c = std::clamp(theta.pi_c + offset * beta_sd, 0.05, 0.95);
  }
  return apply_restriction(std::move(theta), spec);
}

std::vector<Theta> run_chain(const ObservedDataset& data, const ModelSpec& spec,
                             const ChainConfig& config, std::uint64_t chain_seed, int chain_index,
                             const Theta* init_override) {
  validate_config(config);
  RngStream rng(chain_seed);
  Theta theta = init_override ? *init_override
                              : initial_theta(data, spec, config.init, chain_index, rng);
  theta = apply_restriction(std::move(theta), spec);
  if (const char* v = theta_violation(theta))
    throw std::runtime_error(std::string("run_chain: invalid initial state: ") + v);

  MhAdaptState mh;
  std::vector<Theta> draws;
  draws.reserve(static_cast<std::size_t>((config.n_iter - config.n_burnin) / config.thin));
  AugmentedState aug;
  for (int t = 1; t <= config.n_iter; ++t) {
    const char* block = "impute_strata";
    try {
      aug.s = impute_strata(theta, data, rng);
      if (spec.family == Family::ContinuousBinary) {
        block = "impute_latent_utilities";
        aug.y2_star = impute_latent_utilities(theta, data, aug.s, rng);
      }
      block = "update_pi";
      theta.pi_c = update_pi(aug.s, spec.priors.pi_a, spec.priors.pi_b, rng);
      block = "update_cells";
      update_cells(theta, data, aug, spec, mh, t <= config.n_burnin, rng);
      theta = apply_restriction(std::move(theta), spec);
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "run_chain: aborted at iteration " << t << " in " << block << ": " << e.what();
      throw std::runtime_error(msg.str());
    }
    if (const char* v = theta_violation(theta)) {
      std::ostringstream msg;
      msg << "run_chain: non-finite state at iteration " << t << " (" << v << ")";
      throw std::runtime_error(msg.str());
    }
    if (t > config.n_burnin && (t - config.n_burnin) % config.thin == 0) draws.push_back(theta);
  }
  return draws;
}

DrawStore run_chains(const ObservedDataset& data, const ModelSpec& spec, const ChainConfig& config) {
  std::vector<std::uint64_t> seeds;
  seeds.reserve(config.n_chains);
  for (int c = 0; c < config.n_chains; ++c)
    seeds.push_back(RngStream::derive(config.seed, {0xC7A1u, static_cast<std::uint64_t>(c)}).seed());
  return run_chains(data, spec, config, seeds);
}

DrawStore run_chains(const ObservedDataset& data, const ModelSpec& spec, const ChainConfig& config,
                     const std::vector<std::uint64_t>& chain_seeds) {
  validate_config(config);
  if (static_cast<int>(chain_seeds.size()) != config.n_chains)
    throw ValidationError("run_chains: one seed per chain required");
  DrawStore store;
  store.spec = spec;
  store.config = config;
  store.chain_seeds = chain_seeds;
  store.chains.resize(config.n_chains);
  parallel_for(config.n_chains, config.threads, [&](int c) {
    try {
      store.chains[c] = run_chain(data, spec, config, chain_seeds[c], c);
    } catch (const std::exception& e) {
      throw std::runtime_error("chain " + std::to_string(c) + ": " + e.what());
    }
  });
  return store;
}

}  // namespace pstrat

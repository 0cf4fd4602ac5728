#include "pstrat/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "pstrat/gauss.hpp"
#include "pstrat/model.hpp"

namespace pstrat {

namespace {

std::vector<double> axis_values(const GridAxis& ax) {
  if (ax.points < 1) throw ValidationError("grid axis needs >= 1 point");
  std::vector<double> v(ax.points);
  if (ax.points == 1) {
    v[0] = 0.5 * (ax.lo + ax.hi);
    return v;
  }
  const double step = (ax.hi - ax.lo) / (ax.points - 1);
  for (int i = 0; i < ax.points; ++i) v[i] = ax.lo + step * i;
  return v;
}

struct GroupRange {
  double lo = 0.0, hi = 0.0, sd = 1.0;
  bool any = false;
};

GroupRange range_of(const ObservedDataset& data, int z, int d, bool require_d) {
  GroupRange r;
  double n = 0.0, s = 0.0, ss = 0.0;
  for (const auto& u : data.units) {
    if (u.z != z) continue;
    if (require_d && u.d != d) continue;
    if (!r.any) {
      r.lo = r.hi = u.y1;
      r.any = true;
    }
    r.lo = std::min(r.lo, u.y1);
    r.hi = std::max(r.hi, u.y1);
    n += 1.0;
    s += u.y1;
    ss += u.y1 * u.y1;
  }
  if (n >= 2.0) {
    const double mean = s / n;
    r.sd = std::sqrt(std::max((ss - n * mean * mean) / (n - 1.0), 1e-12));
  }
  if (!(r.sd > 0.0)) r.sd = 1.0;
  return r;
}

// Kahan-compensated accumulator for the normalizing sum and expectations.
struct Compensated {
  double sum = 0.0, c = 0.0;
  void add(double x) {
    const double y = x - c;
    const double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
};

}  // namespace

std::size_t GridSpec::total_nodes() const {
  return static_cast<std::size_t>(pi_c.points) * mu_c0.points * mu_n0.points * mu_c1.points *
         mu_n1.points;
}

GridSpec default_grid(const ObservedDataset& data, int points_pi, int points_mu) {
  GridSpec g;
  g.pi_c = {0.02, 0.98, points_pi};
  const GroupRange g0 = range_of(data, 0, 0, false);
  const GroupRange g11 = range_of(data, 1, 1, true);
  const GroupRange g10 = range_of(data, 1, 0, true);
  auto axis = [&](const GroupRange& r, int points) {
    const GroupRange& use = r.any ? r : g0;
    return GridAxis{use.lo - 3.0 * use.sd, use.hi + 3.0 * use.sd, points};
  };
  // The z=1 means are informed by clean groups; the control-arm means face
  // the latent mixture and carry much tighter posterior structure than the
  // pooled range suggests, so they get the remaining node budget.
  const double budget = 8e6;
  const double per_mix = budget / (static_cast<double>(points_pi) * points_mu * points_mu);
  const int points_mix = std::clamp(static_cast<int>(std::sqrt(per_mix)), points_mu, 71);
  g.mu_c0 = axis(g0, points_mix);
  g.mu_n0 = axis(g0, points_mix);
  g.mu_c1 = axis(g11, points_mu);
  g.mu_n1 = axis(g10, points_mu);
  return g;
}

GridPosterior grid_posterior(const ObservedDataset& data, const Priors& priors,
                             const std::array<double, 4>& fixed_variances, const GridSpec& grid,
                             bool keep_table) {
  if (data.n() > 30) throw ValidationError("grid_posterior: limited to n <= 30");
  if (grid.total_nodes() > 10'000'000) throw ValidationError("grid_posterior: grid too large (> 1e7 nodes)");
  for (double v : fixed_variances)
    if (!(v > 0.0)) throw ValidationError("grid_posterior: variances must be positive");

  const auto pis = axis_values(grid.pi_c);
  const auto mc0 = axis_values(grid.mu_c0);
  const auto mn0 = axis_values(grid.mu_n0);
  const auto mc1 = axis_values(grid.mu_c1);
  const auto mn1 = axis_values(grid.mu_n1);

  // Collapse the data per observed group once.
  std::vector<double> y0, y11, y10;
  for (const auto& u : data.units) {
    if (u.z == 0) y0.push_back(u.y1);
    else if (u.d == 1) y11.push_back(u.y1);
    else y10.push_back(u.y1);
  }
  const double v_c0 = fixed_variances[cell_index(Stratum::Complier, 0)];
  const double v_n0 = fixed_variances[cell_index(Stratum::NeverTaker, 0)];
  const double v_c1 = fixed_variances[cell_index(Stratum::Complier, 1)];
  const double v_n1 = fixed_variances[cell_index(Stratum::NeverTaker, 1)];

  // Per-axis log-density caches: group sums for the z=1 cells, per-unit
  // values for the z=0 mixture.
  auto sum_logpdf = [](const std::vector<double>& ys, const std::vector<double>& mus, double var) {
    std::vector<double> out(mus.size(), 0.0);
    for (std::size_t k = 0; k < mus.size(); ++k)
      for (double y : ys) out[k] += log_norm_pdf(y, mus[k], var);
    return out;
  };
  const std::vector<double> ll_c1 = sum_logpdf(y11, mc1, v_c1);
  const std::vector<double> ll_n1 = sum_logpdf(y10, mn1, v_n1);

  auto unit_logpdf = [](const std::vector<double>& ys, const std::vector<double>& mus, double var) {
    std::vector<std::vector<double>> out(mus.size(), std::vector<double>(ys.size()));
    for (std::size_t k = 0; k < mus.size(); ++k)
      for (std::size_t i = 0; i < ys.size(); ++i) out[k][i] = log_norm_pdf(ys[i], mus[k], var);
    return out;
  };
  const auto l0c = unit_logpdf(y0, mc0, v_c0);
  const auto l0n = unit_logpdf(y0, mn0, v_n0);

  const double n11 = static_cast<double>(y11.size());
  const double n10 = static_cast<double>(y10.size());

  // Log prior per axis value.
  auto mu_prior = [&](const std::vector<double>& mus) {
    std::vector<double> out(mus.size());
    for (std::size_t k = 0; k < mus.size(); ++k) out[k] = log_norm_pdf(mus[k], 0.0, priors.mean_variance);
    return out;
  };
  const auto pr_c0 = mu_prior(mc0), pr_n0 = mu_prior(mn0), pr_c1 = mu_prior(mc1), pr_n1 = mu_prior(mn1);
  std::vector<double> pr_pi(pis.size());
  for (std::size_t k = 0; k < pis.size(); ++k)
    pr_pi[k] = (priors.pi_a - 1.0) * std::log(pis[k]) + (priors.pi_b - 1.0) * std::log(1.0 - pis[k]);

  // z=0 mixture block depends on (pi, mu_c0, mu_n0) only.
  const std::size_t n_pi = pis.size(), n_c0 = mc0.size(), n_n0 = mn0.size();
  std::vector<double> mix(n_pi * n_c0 * n_n0, 0.0);
  for (std::size_t a = 0; a < n_pi; ++a) {
    const double lpc = std::log(pis[a]);
    const double lpn = std::log(1.0 - pis[a]);
    for (std::size_t b = 0; b < n_c0; ++b) {
      for (std::size_t c = 0; c < n_n0; ++c) {
        double acc = n11 * lpc + n10 * lpn;
        for (std::size_t i = 0; i < y0.size(); ++i)
          acc += log_add_exp(lpc + l0c[b][i], lpn + l0n[c][i]);
        mix[(a * n_c0 + b) * n_n0 + c] = acc + pr_pi[a] + pr_c0[b] + pr_n0[c];
      }
    }
  }

  // Full joint scan with a streaming log-sum-exp: first pass finds the max,
  // second accumulates normalized weights and expectations.
  double log_max = -std::numeric_limits<double>::infinity();
  for (std::size_t abc = 0; abc < mix.size(); ++abc)
    for (std::size_t dd = 0; dd < mc1.size(); ++dd)
      for (std::size_t ee = 0; ee < mn1.size(); ++ee) {
        const double lp = mix[abc] + ll_c1[dd] + pr_c1[dd] + ll_n1[ee] + pr_n1[ee];
        log_max = std::max(log_max, lp);
      }
  if (!std::isfinite(log_max)) throw std::runtime_error("grid_posterior: all nodes have zero mass");

  Compensated norm, e_pi, e_tau_c, e_tau_n, edge_mass;
  for (std::size_t a = 0; a < n_pi; ++a)
    for (std::size_t b = 0; b < n_c0; ++b)
      for (std::size_t c = 0; c < n_n0; ++c) {
        const double base = mix[(a * n_c0 + b) * n_n0 + c];
        for (std::size_t dd = 0; dd < mc1.size(); ++dd)
          for (std::size_t ee = 0; ee < mn1.size(); ++ee) {
            const double w = std::exp(base + ll_c1[dd] + pr_c1[dd] + ll_n1[ee] + pr_n1[ee] - log_max);
            norm.add(w);
            e_pi.add(w * pis[a]);
            e_tau_c.add(w * (mc1[dd] - mc0[b]));
            e_tau_n.add(w * (mn1[ee] - mn0[c]));
            const bool on_edge = b == 0 || b + 1 == n_c0 || c == 0 || c + 1 == n_n0 ||
                                 dd == 0 || dd + 1 == mc1.size() || ee == 0 || ee + 1 == mn1.size();
            if (on_edge) edge_mass.add(w);
          }
      }

  GridPosterior post;
  post.n_nodes = grid.total_nodes();
  post.log_normalizer = log_max + std::log(norm.sum);
  post.mean_pi_c = e_pi.sum / norm.sum;
  post.mean_tau_c = e_tau_c.sum / norm.sum;
  post.mean_tau_n = e_tau_n.sum / norm.sum;
  post.boundary_mass_warning = edge_mass.sum / norm.sum > 1e-3;
  if (keep_table) {
    post.probabilities.reserve(post.n_nodes);
    for (std::size_t a = 0; a < n_pi; ++a)
      for (std::size_t b = 0; b < n_c0; ++b)
        for (std::size_t c = 0; c < n_n0; ++c) {
          const double base = mix[(a * n_c0 + b) * n_n0 + c];
          for (std::size_t dd = 0; dd < mc1.size(); ++dd)
            for (std::size_t ee = 0; ee < mn1.size(); ++ee)
              post.probabilities.push_back(
                  std::exp(base + ll_c1[dd] + pr_c1[dd] + ll_n1[ee] + pr_n1[ee] - log_max) /
                  norm.sum);
        }
  }
  return post;
}

}  // namespace pstrat

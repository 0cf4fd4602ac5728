#include <doctest.h>

#include <cmath>
#include <numeric>

#include "pstrat/estimands.hpp"
#include "pstrat/gauss.hpp"
#include "pstrat/gibbs.hpp"
#include "pstrat/oracle.hpp"
#include "test_support.hpp"

using namespace pstrat;
using test_support::unit;

namespace {

// Seeded univariate two-component dataset. Strongly unequal known variances
// keep the label-swap mode of the control-arm mixture at negligible mass,
// so the posterior is effectively unimodal and a single-mode sampler and a
// full quadrature see the same distribution.
ObservedDataset tiny_univariate(std::uint64_t seed, int n, std::vector<Stratum>* truth = nullptr) {
  RngStream rng(seed);
  ObservedDataset data;
  const double mu[4] = {2.5, 0.5, 5.5, 4.25};   // cell order c0, c1, n0, n1
  const double sd[4] = {0.2, 0.1, 1.0, 0.5};
  for (int i = 0; i < n; ++i) {
    const Stratum s = rng.uniform() < 0.7 ? Stratum::Complier : Stratum::NeverTaker;
    const int z = i % 2;
    const int cell = cell_index(s, z);
    ObservedUnit u;
    u.z = z;
    u.d = (z == 1 && s == Stratum::Complier) ? 1 : 0;
    u.y1 = mu[cell] + sd[cell] * norm_quantile(rng.uniform());
    data.units.push_back(u);
    if (truth) truth->push_back(s);
  }
  return data;
}

const std::array<double, 4> kKnownVariances{0.04, 0.01, 1.0, 0.25};

}  // namespace

TEST_CASE("grid_posterior: single-atom grid concentrates all mass") {
  ObservedDataset data = tiny_univariate(7, 8);
  GridSpec grid;
  grid.pi_c = {0.6, 0.6, 1};
  grid.mu_c0 = {2.5, 2.5, 1};
  grid.mu_n0 = {2.75, 2.75, 1};
  grid.mu_c1 = {0.5, 0.5, 1};
  grid.mu_n1 = {4.25, 4.25, 1};
  const GridPosterior post = grid_posterior(data, Priors{}, kKnownVariances, grid, true);
  REQUIRE(post.probabilities.size() == 1);
  CHECK(post.probabilities[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(post.mean_pi_c == doctest::Approx(0.6));
  CHECK(post.mean_tau_c == doctest::Approx(0.5 - 2.5));
  CHECK(post.mean_tau_n == doctest::Approx(4.25 - 2.75));
}

TEST_CASE("grid_posterior: probabilities sum to one") {
  ObservedDataset data = tiny_univariate(11, 14);
  const GridSpec grid = default_grid(data, 9, 7);
  const GridPosterior post = grid_posterior(data, Priors{}, kKnownVariances, grid, true);
  const double total = std::accumulate(post.probabilities.begin(), post.probabilities.end(), 0.0);
  CHECK(std::fabs(total - 1.0) < 1e-10);
}

TEST_CASE("grid_posterior: sign flip under reflection of the data and grid") {
  ObservedDataset data = tiny_univariate(13, 12);
  const GridSpec grid = default_grid(data, 11, 9);
  const GridPosterior post = grid_posterior(data, Priors{}, kKnownVariances, grid);

  ObservedDataset reflected = data;
  for (auto& u : reflected.units) u.y1 = -u.y1;
  GridSpec rgrid = grid;
  auto flip = [](GridAxis& ax) {
    const double lo = -ax.hi, hi = -ax.lo;
    ax.lo = lo;
    ax.hi = hi;
  };
  flip(rgrid.mu_c0);
  flip(rgrid.mu_n0);
  flip(rgrid.mu_c1);
  flip(rgrid.mu_n1);
  const GridPosterior rpost = grid_posterior(reflected, Priors{}, kKnownVariances, rgrid);
  CHECK(rpost.mean_tau_c == doctest::Approx(-post.mean_tau_c).epsilon(1e-10));
  CHECK(rpost.mean_tau_n == doctest::Approx(-post.mean_tau_n).epsilon(1e-10));
  CHECK(rpost.mean_pi_c == doctest::Approx(post.mean_pi_c).epsilon(1e-10));
}

TEST_CASE("grid_posterior: doubling the resolution leaves the means stable") {
  ObservedDataset data = tiny_univariate(13, 20);
  GridSpec coarse;
  coarse.pi_c = {0.02, 0.98, 6};
  coarse.mu_c0 = {1.8, 8.2, 40};
  coarse.mu_n0 = {1.8, 8.2, 20};
  coarse.mu_c1 = {0.0, 1.1, 8};
  coarse.mu_n1 = {2.8, 5.8, 8};
  GridSpec fine = coarse;
  fine.pi_c.points *= 2;
  fine.mu_c0.points *= 2;
  fine.mu_n0.points *= 2;
  fine.mu_c1.points *= 2;
  fine.mu_n1.points *= 2;
  const GridPosterior a = grid_posterior(data, Priors{}, kKnownVariances, coarse);
  const GridPosterior b = grid_posterior(data, Priors{}, kKnownVariances, fine);
  CHECK(std::fabs(a.mean_pi_c - b.mean_pi_c) < 0.025);
  CHECK(std::fabs(a.mean_tau_c - b.mean_tau_c) < 0.025);
  CHECK(std::fabs(a.mean_tau_n - b.mean_tau_n) < 0.025);
  CHECK_FALSE(b.boundary_mass_warning);
}

TEST_CASE("grid_posterior: guard rails") {
  ObservedDataset data = tiny_univariate(19, 10);
  GridSpec huge = default_grid(data, 101, 101);
  CHECK_THROWS_AS(grid_posterior(data, Priors{}, kKnownVariances, huge), ValidationError);

  ObservedDataset big = tiny_univariate(19, 31);
  CHECK_THROWS_AS(grid_posterior(big, Priors{}, kKnownVariances, default_grid(big)),
                  ValidationError);

  // narrow grid far from the data: warn about boundary mass
  GridSpec narrow;
  narrow.pi_c = {0.02, 0.98, 5};
  narrow.mu_c0 = {10.0, 10.5, 4};
  narrow.mu_n0 = {10.0, 10.5, 4};
  narrow.mu_c1 = {10.0, 10.5, 4};
  narrow.mu_n1 = {10.0, 10.5, 4};
  const GridPosterior post = grid_posterior(data, Priors{}, kKnownVariances, narrow);
  CHECK(post.boundary_mass_warning);
}

TEST_CASE("Gibbs posterior means agree with the grid oracle on a tiny problem") {
  ObservedDataset data = tiny_univariate(13, 20);
  const GridSpec grid = default_grid(data, 21, 12);
  const GridPosterior oracle = grid_posterior(data, Priors{}, kKnownVariances, grid);

  ModelSpec spec;
  spec.family = Family::Univariate;
  spec.priors = Priors{};
  spec.fixed_variances = kKnownVariances;
  ChainConfig config;
  config.n_iter = 12000;
  config.n_burnin = 2000;
  config.n_chains = 2;
  config.seed = 271828;
  const DrawStore store = run_chains(data, spec, config);
  // fixed variances really are fixed
  for (const auto& t : store.chains[0]) {
    REQUIRE(t.cell(Stratum::Complier, 0).sigma(0, 0) == 0.04);
    REQUIRE(t.cell(Stratum::NeverTaker, 1).sigma(0, 0) == 0.25);
  }

  const auto pi_draws = store.flat([](const Theta& t) { return t.pi_c; });
  const auto tau_draws = store.flat([](const Theta& t) { return tau(t, Stratum::Complier); });
  double pi_mean = 0.0, tau_mean = 0.0;
  for (double v : pi_draws) pi_mean += v;
  for (double v : tau_draws) tau_mean += v;
  pi_mean /= static_cast<double>(pi_draws.size());
  tau_mean /= static_cast<double>(tau_draws.size());

  CHECK(std::fabs(pi_mean - oracle.mean_pi_c) < 0.05);
  CHECK(std::fabs(tau_mean - oracle.mean_tau_c) < 0.05);
}

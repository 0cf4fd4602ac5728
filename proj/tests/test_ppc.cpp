#include <doctest.h>

#include <cmath>

#include "pstrat/gauss.hpp"
#include "pstrat/ppc.hpp"
#include "pstrat/simlab.hpp"
#include "test_support.hpp"

using namespace pstrat;
using test_support::unit;

namespace {

ObservedDataset four_unit_fixture() {
  ObservedDataset data;
  data.units = {unit(0, 0, 0.0), unit(0, 0, 2.0), unit(1, 1, 1.0), unit(1, 1, 3.0)};
  return data;
}

DrawStore tiny_store(const ObservedDataset& data, Restriction r = Restriction::None,
                     int iters = 220, int burnin = 20) {
  ModelSpec spec;
  spec.family = Family::ContinuousContinuous;
  spec.restriction = r;
  ChainConfig config;
  config.n_iter = iters;
  config.n_burnin = burnin;
  config.n_chains = 1;
  config.seed = 5150;
  return run_chains(data, spec, config);
}

}  // namespace

TEST_CASE("signal/noise/signal-to-noise: hand arithmetic") {
  const ObservedDataset data = four_unit_fixture();
  const std::vector<Stratum> labels(4, Stratum::Complier);
  const auto d = discrepancy_si_no_sn(data, labels, 1, Stratum::Complier);
  REQUIRE(d.has_value());
  CHECK(d->si == doctest::Approx(1.0));
  CHECK(d->no == doctest::Approx(std::sqrt(2.0)));
  CHECK(d->sn == doctest::Approx(1.0 / std::sqrt(2.0)));

  // identical group means
  ObservedDataset same;
  same.units = {unit(0, 0, 1.0), unit(0, 0, 3.0), unit(1, 1, 1.0), unit(1, 1, 3.0)};
  const auto z = discrepancy_si_no_sn(same, labels, 1, Stratum::Complier);
  CHECK(z->si == 0.0);

  // too-small group is undefined
  const std::vector<Stratum> mixed{Stratum::Complier, Stratum::NeverTaker, Stratum::Complier,
                                   Stratum::Complier};
  CHECK_FALSE(discrepancy_si_no_sn(data, mixed, 1, Stratum::Complier).has_value());
}

TEST_CASE("signal scale equivariance: exact for a power-of-two factor") {
  ObservedDataset data;
  RngStream rng(3);
  std::vector<Stratum> labels;
  for (int i = 0; i < 40; ++i) {
    data.units.push_back(unit(i % 2, 0, rng.uniform() * 5.0));
    labels.push_back(i % 3 == 0 ? Stratum::NeverTaker : Stratum::Complier);
  }
  ObservedDataset doubled = data;
  for (auto& u : doubled.units) u.y1 *= 2.0;
  for (Stratum s : {Stratum::Complier, Stratum::NeverTaker}) {
    const auto a = discrepancy_si_no_sn(data, labels, 1, s);
    const auto b = discrepancy_si_no_sn(doubled, labels, 1, s);
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    CHECK(b->si == 2.0 * a->si);
    CHECK(b->no == 2.0 * a->no);
    CHECK(b->sn == a->sn);
  }
}

TEST_CASE("chi-square discrepancy") {
  Theta t = Theta::make(Family::ContinuousContinuous);
  for (auto& c : t.cells) {
    c.mu << 1.0, 2.0;
    c.sigma << 4.0, 0.0, 0.0, 9.0;
  }

  SUBCASE("data at cell means contributes nothing") {
    ObservedDataset data;
    data.units = {unit(0, 0, 1.0, 2.0), unit(1, 1, 1.0, 2.0)};
    const std::vector<Stratum> labels(2, Stratum::Complier);
    CHECK(chi2_discrepancy(data, labels, t) == 0.0);
  }

  SUBCASE("one standardized unit contributes one") {
    ObservedDataset data;
    data.units = {unit(0, 0, 1.0 + 2.0, 2.0)};
    const std::vector<Stratum> labels(1, Stratum::Complier);
    CHECK(chi2_discrepancy(data, labels, t, 1) == doctest::Approx(1.0));
  }

  SUBCASE("five-unit fixture matches a direct residual loop") {
    ObservedDataset data;
    std::vector<Stratum> labels;
    RngStream rng(5);
    for (int i = 0; i < 5; ++i) {
      data.units.push_back(unit(i % 2, 0, rng.uniform() * 3.0, rng.uniform() * 4.0));
      labels.push_back(i % 2 ? Stratum::NeverTaker : Stratum::Complier);
    }
    double expect = 0.0;
    for (int i = 0; i < 5; ++i) {
      const auto& u = data.units[i];
      const CellParams& cell = t.cell(labels[i], u.z);
      expect += (u.y1 - cell.mu[0]) * (u.y1 - cell.mu[0]) / cell.sigma(0, 0);
      expect += (u.y2 - cell.mu[1]) * (u.y2 - cell.mu[1]) / cell.sigma(1, 1);
    }
    CHECK(chi2_discrepancy(data, labels, t) == doctest::Approx(expect).epsilon(1e-13));
  }

  SUBCASE("degenerate probit probabilities are excluded and counted") {
    Theta cb = Theta::make(Family::ContinuousBinary);
    for (auto& c : cb.cells) {
      c.mu << 0.0, 40.0;  // Phi(40) rounds to exactly 1
      c.sigma << 1.0, 0.0, 0.0, 1.0;
    }
    ObservedDataset data;
    data.units = {unit(0, 0, 0.0, 1.0)};
    const std::vector<Stratum> labels(1, Stratum::Complier);
    int excluded = 0;
    chi2_discrepancy(data, labels, cb, 2, &excluded);
    CHECK(excluded == 1);
  }
}

TEST_CASE("Kolmogorov-Smirnov discrepancy") {
  Theta t = Theta::make(Family::ContinuousContinuous);
  t.pi_c = 0.7;
  t.cell(Stratum::Complier, 0).mu << 0.0, 0.0;
  t.cell(Stratum::Complier, 0).sigma << 1.0, 0.0, 0.0, 1.0;
  t.cell(Stratum::NeverTaker, 0).mu << 3.0, 0.0;
  t.cell(Stratum::NeverTaker, 0).sigma << 4.0, 0.0, 0.0, 1.0;
  t.cell(Stratum::Complier, 1) = t.cell(Stratum::Complier, 0);
  t.cell(Stratum::NeverTaker, 1) = t.cell(Stratum::NeverTaker, 0);

  SUBCASE("single point at the mixture median gives 0.5") {
    // find the mixture median by bisection
    auto cdf = [&](double y) {
      return 0.7 * norm_cdf(y) + 0.3 * norm_cdf((y - 3.0) / 2.0);
    };
    double lo = -10, hi = 10;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (cdf(mid) < 0.5 ? lo : hi) = mid;
    }
    ObservedDataset data;
    data.units = {unit(0, 0, 0.5 * (lo + hi), 0.0)};
    CHECK(ks_discrepancy(data, t) == doctest::Approx(0.5).epsilon(1e-9));
  }

  SUBCASE("pi_c = 1 reduces to a one-component test") {
    Theta one = t;
    one.pi_c = 1.0;
    ObservedDataset data;
    data.units = {unit(0, 0, 0.0, 0.0)};  // Phi(0) = 0.5 under the complier cell
    CHECK(ks_discrepancy(data, one) == doctest::Approx(0.5));
  }

  SUBCASE("model-generated data stays under the DKW band") {
    RngStream rng(7);
    ObservedDataset data;
    for (int i = 0; i < 10000; ++i) {
      const Stratum s = rng.uniform() < t.pi_c ? Stratum::Complier : Stratum::NeverTaker;
      const CellParams& cell = t.cell(s, 0);
      data.units.push_back(
          unit(0, 0, cell.mu[0] + std::sqrt(cell.sigma(0, 0)) * norm_quantile(rng.uniform()), 0.0));
    }
    CHECK(ks_discrepancy(data, t) < 0.025);
  }
}

TEST_CASE("replicate_dataset contracts") {
  const Scenario sc = scenario_params(1);
  ObservedDataset tmpl;
  for (int i = 0; i < 10000; ++i) tmpl.units.push_back(unit(i % 2, 0, 0.0, 0.0));

  SUBCASE("pi_c = 1 makes everyone a complier with d = z") {
    Theta t = sc.truth;
    t.pi_c = 1.0 - 1e-16;
    RngStream rng(11);
    const Replicate rep = replicate_dataset(t, tmpl, rng);
    for (std::size_t i = 0; i < rep.data.units.size(); ++i) {
      REQUIRE(rep.labels[i] == Stratum::Complier);
      REQUIRE(rep.data.units[i].d == rep.data.units[i].z);
    }
  }

  SUBCASE("group sizes partition the arms and z is kept") {
    RngStream rng(13);
    const Replicate rep = replicate_dataset(sc.truth, tmpl, rng);
    int n_by_arm[2] = {0, 0}, n_cells[4] = {0, 0, 0, 0};
    for (std::size_t i = 0; i < rep.data.units.size(); ++i) {
      REQUIRE(rep.data.units[i].z == tmpl.units[i].z);
      n_by_arm[rep.data.units[i].z]++;
      n_cells[cell_index(rep.labels[i], rep.data.units[i].z)]++;
    }
    CHECK(n_cells[0] + n_cells[2] == n_by_arm[0]);
    CHECK(n_cells[1] + n_cells[3] == n_by_arm[1]);
  }

  SUBCASE("probit margin frequency matches Phi(mu2)") {
    Theta cb = Theta::make(Family::ContinuousBinary);
    cb.pi_c = 0.99999999;
    for (auto& c : cb.cells) {
      c.mu << 0.0, 0.6;
      c.sigma << 1.0, 0.4, 0.4, 1.0;
    }
    RngStream rng(17);
    const Replicate rep = replicate_dataset(cb, tmpl, rng);
    double ones = 0.0;
    for (const auto& u : rep.data.units) ones += u.y2;
    const double p = norm_cdf(0.6);
    const double n = static_cast<double>(rep.data.units.size());
    CHECK(std::fabs(ones / n - p) < 4.0 * std::sqrt(p * (1.0 - p) / n));
  }
}

TEST_CASE("pppv core: rigged pairs") {
  using Pair = std::pair<std::optional<double>, std::optional<double>>;
  std::vector<Pair> larger, tied, mixed;
  for (int i = 0; i < 100; ++i) {
    const double obs = i * 0.1;
    larger.push_back({obs, obs + 1.0});
    tied.push_back({obs, obs});
  }
  CHECK(pppv_from_pairs(larger) == 1.0);
  CHECK(pppv_from_pairs(tied) == 0.5);

  mixed = larger;
  mixed.push_back({std::nullopt, 1.0});  // undefined pairs are skipped
  CHECK(pppv_from_pairs(mixed) == 1.0);

  std::vector<Pair> all_undef{{std::nullopt, 1.0}, {2.0, std::nullopt}};
  CHECK_THROWS(pppv_from_pairs(all_undef));
}

TEST_CASE("pppv on a real store: probabilities are proper and deterministic") {
  const Scenario sc = scenario_params(1);
  SimulatedDataset sim = generate_dataset(sc, 23);
  ObservedDataset data;
  data.units.assign(sim.data.units.begin(), sim.data.units.begin() + 120);
  data.units.push_back(unit(0, 0, 2.4, 8.1));
  data.units.push_back(unit(1, 1, 0.6, 6.4));

  const DrawStore store = tiny_store(data);
  const PValueReport a = pppv(store, data, 777);
  const PValueReport b = pppv(store, data, 777);
  REQUIRE(a.measures.size() == measure_list(Family::ContinuousContinuous).size());
  for (std::size_t i = 0; i < a.p.size(); ++i) {
    REQUIRE(a.p[i].has_value());
    REQUIRE(*a.p[i] >= 0.0);
    REQUIRE(*a.p[i] <= 1.0);
    CHECK(*a.p[i] == *b.p[i]);
  }
}

TEST_CASE("sppv: Beta(K+1, 1) shape when every replicate exceeds the realized value") {
  // With theta far from the data, the chi2 replicate discrepancy is almost
  // surely larger than... instead rig directly: all replicates tie-free
  // greater happens when obs data sits exactly at cell means so chi2_obs = 0.
  Theta t = Theta::make(Family::ContinuousContinuous);
  t.pi_c = 0.5;
  for (auto& c : t.cells) {
    c.mu << 1.0, 2.0;
    c.sigma << 1.0, 0.0, 0.0, 1.0;
  }
  ObservedDataset data;
  for (int i = 0; i < 20; ++i) data.units.push_back(unit(i % 2, 0, 1.0, 2.0));  // chi2_obs = 0

  const int K = 40;
  const MeasureId chi2_y1{MeasureKind::Chi2, 1, -1};
  std::vector<double> ps;
  for (int rep = 0; rep < 4000; ++rep) {
    const PValueReport r = sppv(t, data, K, 1000 + rep);
    const auto p = r.p_of(chi2_y1);
    REQUIRE(p.has_value());
    ps.push_back(*p);
  }
  // mean of Beta(K+1, 1) is (K+1)/(K+2)
  const auto ms = test_support::mean_se(ps);
  CHECK(std::fabs(ms.mean - (K + 1.0) / (K + 2.0)) < 5.0 * ms.se);

  CHECK_THROWS(sppv(t, data, 0, 1));
}

TEST_CASE("modified sppv: degenerate and quantile behavior") {
  const Scenario sc = scenario_params(1);
  SimulatedDataset sim = generate_dataset(sc, 29);
  ObservedDataset data;
  data.units.assign(sim.data.units.begin(), sim.data.units.begin() + 80);
  data.units.push_back(unit(0, 0, 2.4, 8.1));
  data.units.push_back(unit(1, 1, 0.6, 6.4));
  const DrawStore store = tiny_store(data);

  // J = 1 equals the single SPPV drawn with the same derived substream
  const PValueReport one = modified_sppv(store, data, 1, 5, 99);
  REQUIRE(!one.measures.empty());
  for (const auto& p : one.p)
    if (p) {
      REQUIRE(*p >= 0.0);
      REQUIRE(*p <= 1.0);
    }

  // J exceeding the store is rejected
  CHECK_THROWS(modified_sppv(store, data, static_cast<int>(store.total_draws()) + 1, 5, 99));

  // identical per-draw SPPVs collapse the quantile to that value
  std::vector<double> constant(50, 0.42);
  std::sort(constant.begin(), constant.end());
  for (double u : {0.01, 0.37, 0.99}) CHECK(quantile_sorted(constant, u) == 0.42);
}

TEST_CASE("modified sppv: u-quantile consistency on synthetic sets") {
  // With many J the combined value approaches the u-quantile of the SPPV
  // distribution; check the quantile rule itself on a synthetic ramp.
  std::vector<double> ramp(1001);
  for (int i = 0; i <= 1000; ++i) ramp[i] = i / 1000.0;
  CHECK(quantile_sorted(ramp, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(quantile_sorted(ramp, 0.25) == doctest::Approx(0.25).epsilon(1e-12));
}

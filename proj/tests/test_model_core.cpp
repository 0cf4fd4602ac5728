#include <doctest.h>

#include <cmath>

#include "pstrat/gauss.hpp"
#include "pstrat/model.hpp"
#include "pstrat/rng.hpp"
#include "test_support.hpp"

using namespace pstrat;
using test_support::unit;

namespace {

Theta scenario_like_cb_theta() {
  Theta t = Theta::make(Family::ContinuousBinary);
  t.pi_c = 0.6;
  t.cell(Stratum::Complier, 0).mu << 2.5, 0.3;
  t.cell(Stratum::Complier, 0).sigma << 0.09, 0.1, 0.1, 1.0;
  t.cell(Stratum::Complier, 1).mu << 0.5, -0.2;
  t.cell(Stratum::Complier, 1).sigma << 0.25, -0.1, -0.1, 1.0;
  t.cell(Stratum::NeverTaker, 0).mu << 2.75, 0.8;
  t.cell(Stratum::NeverTaker, 0).sigma << 0.16, 0.2, 0.2, 1.0;
  t.cell(Stratum::NeverTaker, 1).mu << 4.25, 0.5;
  t.cell(Stratum::NeverTaker, 1).sigma << 0.04, 0.05, 0.05, 1.0;
  return t;
}

Theta toy_cc_theta() {
  Theta t = Theta::make(Family::ContinuousContinuous);
  t.pi_c = 0.7;
  t.cell(Stratum::Complier, 0).mu << 2.5, 8.0;
  t.cell(Stratum::Complier, 0).sigma << 0.09, 0.24, 0.24, 1.0;
  t.cell(Stratum::Complier, 1).mu << 0.5, 6.5;
  t.cell(Stratum::Complier, 1).sigma << 0.01, 0.08, 0.08, 1.0;
  t.cell(Stratum::NeverTaker, 0).mu << 2.75, 12.0;
  t.cell(Stratum::NeverTaker, 0).sigma << 0.16, 0.16, 0.16, 4.0;
  t.cell(Stratum::NeverTaker, 1).mu << 4.25, 12.0;
  t.cell(Stratum::NeverTaker, 1).sigma << 0.04, 0.08, 0.08, 4.0;
  return t;
}

ModelSpec spec_for(const Theta& t, Restriction r = Restriction::None) {
  ModelSpec s;
  s.family = t.family;
  s.restriction = r;
  return s;
}

// Exhaustive log-sum-exp marginalization of the complete-data posterior over
// all latent label assignments of the z=0 units.
double enumerate_marginal(const Theta& theta, const ObservedDataset& data, const ModelSpec& spec) {
  std::vector<int> latent;
  for (int i = 0; i < data.n(); ++i)
    if (data.units[i].z == 0) latent.push_back(i);
  REQUIRE(latent.size() <= 12);
  AugmentedState aug;
  aug.s.resize(data.units.size());
  for (int i = 0; i < data.n(); ++i)
    aug.s[i] = data.units[i].d == 1 ? Stratum::Complier : Stratum::NeverTaker;
  double total = -std::numeric_limits<double>::infinity();
  const std::size_t combos = std::size_t{1} << latent.size();
  for (std::size_t mask = 0; mask < combos; ++mask) {
    for (std::size_t k = 0; k < latent.size(); ++k)
      aug.s[latent[k]] = (mask >> k) & 1 ? Stratum::Complier : Stratum::NeverTaker;
    total = log_add_exp(total, complete_data_log_posterior(theta, data, aug, spec));
  }
  return total;
}

}  // namespace

TEST_CASE("validate_dataset enforces the design facts") {
  ModelSpec spec;
  spec.family = Family::ContinuousBinary;

  ObservedDataset bad;
  bad.units = {unit(0, 1, 1.0, 1.0), unit(1, 1, 1.0, 1.0)};
  CHECK_THROWS_WITH_AS(validate_dataset(bad, spec),
                       doctest::Contains("one-sided noncompliance"), ValidationError);

  // JOBS-like margins: 398 units, 130 control, 268 treated of whom 144 took up.
  ObservedDataset jobs;
  for (int i = 0; i < 130; ++i) jobs.units.push_back(unit(0, 0, 2.15, i % 2 ? 1.0 : 0.0));
  for (int i = 0; i < 144; ++i) jobs.units.push_back(unit(1, 1, 1.96, 1.0));
  for (int i = 0; i < 124; ++i) jobs.units.push_back(unit(1, 0, 2.08, 0.0));
  CHECK_NOTHROW(validate_dataset(jobs, spec));
  CHECK(jobs.n() == 398);
  CHECK(jobs.count(0) == 130);
  CHECK(jobs.count(1) == 268);
  CHECK(jobs.count(1, 1) == 144);

  // univariate family ignores y2 entirely
  ModelSpec uni;
  uni.family = Family::Univariate;
  ObservedDataset with_y2;
  with_y2.units = {unit(0, 0, 1.0, 0.37), unit(1, 1, 2.0, 5.5)};
  CHECK_NOTHROW(validate_dataset(with_y2, uni));

  ObservedDataset one_arm;
  one_arm.units = {unit(1, 1, 1.0, 1.0), unit(1, 0, 2.0, 0.0)};
  CHECK_THROWS_AS(validate_dataset(one_arm, spec), ValidationError);
}

TEST_CASE("cell_log_density: bivariate normal against frozen direct evaluations") {
  CellParams cell = CellParams::make(2);

  SUBCASE("standard bivariate normal at its mean") {
    ObservedUnit u = unit(0, 0, 0.0, 0.0);
    CHECK(cell_log_density(u, cell, Family::ContinuousContinuous) ==
          doctest::Approx(-std::log(2.0 * M_PI)).epsilon(1e-14));
  }

  SUBCASE("scenario complier control cell, frozen values") {
    cell.mu << 2.5, 8.0;
    cell.sigma << 0.09, 0.24, 0.24, 1.0;
    ObservedUnit at_mean = unit(0, 0, 2.5, 8.0);
    CHECK(cell_log_density(at_mean, cell, Family::ContinuousContinuous) ==
          doctest::Approx(-0.12307863831741872).epsilon(1e-13));
    ObservedUnit off = unit(0, 0, 2.8, 9.0);
    CHECK(cell_log_density(off, cell, Family::ContinuousContinuous) ==
          doctest::Approx(-0.6786341938729742).epsilon(1e-13));
  }

  SUBCASE("non-positive-definite covariance is rejected") {
    cell.sigma << 1.0, 2.0, 2.0, 1.0;
    ObservedUnit u = unit(0, 0, 0.0, 0.0);
    CHECK_THROWS(cell_log_density(u, cell, Family::ContinuousContinuous));
  }
}

TEST_CASE("cell_log_density: probit margin factorizes when sigma12 = 0") {
  CellParams cell = CellParams::make(2);
  cell.mu << 1.2, 0.4;
  cell.sigma << 0.5, 0.0, 0.0, 1.0;
  for (double y1 : {0.4, 1.2, 2.2}) {
    for (double y2 : {0.0, 1.0}) {
      ObservedUnit u = unit(0, 0, y1, y2);
      const double expect = log_norm_pdf(y1, 1.2, 0.5) +
                            std::log(y2 > 0.5 ? norm_cdf(0.4) : 1.0 - norm_cdf(0.4));
      CHECK(cell_log_density(u, cell, Family::ContinuousBinary) ==
            doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("probit margin integrates to Phi(mu2) over y1") {
  CellParams cell = CellParams::make(2);
  cell.mu << 1.5, 0.7;
  cell.sigma << 0.36, 0.3, 0.3, 1.0;  // region: 0.36 > 0.09
  auto integrand = [&](double y1) {
    ObservedUnit u = unit(0, 0, y1, 1.0);
    return std::exp(cell_log_density(u, cell, Family::ContinuousBinary));
  };
  const double sd = std::sqrt(0.36);
  const double integral = test_support::simpson(integrand, 1.5 - 12 * sd, 1.5 + 12 * sd, 4000);
  CHECK(integral == doctest::Approx(norm_cdf(0.7)).epsilon(1e-6));
}

TEST_CASE("observed-data likelihood degenerate mixtures") {
  Theta t = toy_cc_theta();
  ModelSpec spec = spec_for(t);
  ObservedDataset z0;
  z0.units = {unit(0, 0, 2.6, 8.4), unit(0, 0, 3.0, 11.0)};

  SUBCASE("pi_c = 1 collapses the mixture to the complier density exactly") {
    t.pi_c = 1.0;
    double direct = 0.0;
    for (const auto& u : z0.units)
      direct += cell_log_density(u, t.cell(Stratum::Complier, 0), t.family);
    CHECK(observed_data_log_likelihood(t, z0, spec) == direct);
  }

  SUBCASE("identical components make the z=0 block independent of pi_c") {
    t.cell(Stratum::NeverTaker, 0) = t.cell(Stratum::Complier, 0);
    t.pi_c = 0.3;
    const double a = observed_data_log_likelihood(t, z0, spec);
    t.pi_c = 0.9;
    const double b = observed_data_log_likelihood(t, z0, spec);
    CHECK(a == doctest::Approx(b).epsilon(1e-13));
  }
}

TEST_CASE("observed-data likelihood equals an independent per-unit evaluation") {
  const Theta t = scenario_like_cb_theta();
  const ModelSpec spec = spec_for(t);
  ObservedDataset data;
  data.units = {unit(1, 1, 0.6, 1.0), unit(1, 0, 4.1, 0.0), unit(0, 0, 2.7, 1.0)};

  // direct evaluation, written independently of the implementation
  auto density = [&](const ObservedUnit& u, Stratum s) {
    const CellParams& cell = t.cell(s, u.z);
    const double s11 = cell.sigma(0, 0), s12 = cell.sigma(0, 1);
    const double fy1 = std::exp(-0.5 * (u.y1 - cell.mu[0]) * (u.y1 - cell.mu[0]) / s11) /
                       std::sqrt(2.0 * M_PI * s11);
    const double cm = cell.mu[1] + s12 / s11 * (u.y1 - cell.mu[0]);
    const double cv = 1.0 - s12 * s12 / s11;
    const double p1 = norm_cdf(cm / std::sqrt(cv));
    return fy1 * (u.y2 > 0.5 ? p1 : 1.0 - p1);
  };
  const double expect = std::log(t.pi_c * density(data.units[0], Stratum::Complier)) +
                        std::log((1.0 - t.pi_c) * density(data.units[1], Stratum::NeverTaker)) +
                        std::log(t.pi_c * density(data.units[2], Stratum::Complier) +
                                 (1.0 - t.pi_c) * density(data.units[2], Stratum::NeverTaker));
  CHECK(observed_data_log_likelihood(t, data, spec) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("mixture consistency: exp of the mixture term matches the weighted densities") {
  const Theta t = toy_cc_theta();
  const ModelSpec spec = spec_for(t);
  RngStream rng(97);
  for (int trial = 0; trial < 200; ++trial) {
    ObservedDataset one;
    one.units = {unit(0, 0, 2.0 + rng.uniform() * 2.0, 6.0 + rng.uniform() * 8.0)};
    const double mix = observed_data_log_likelihood(t, one, spec);
    const double direct =
        t.pi_c * std::exp(cell_log_density(one.units[0], t.cell(Stratum::Complier, 0), t.family)) +
        (1.0 - t.pi_c) *
            std::exp(cell_log_density(one.units[0], t.cell(Stratum::NeverTaker, 0), t.family));
    REQUIRE(std::exp(mix) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("complete-data posterior: no-latent case and empty dataset") {
  const Theta t = toy_cc_theta();
  const ModelSpec spec = spec_for(t);

  ObservedDataset all_treated;
  all_treated.units = {unit(1, 1, 0.5, 6.6), unit(1, 0, 4.2, 12.4), unit(1, 1, 0.7, 6.1)};
  AugmentedState aug;
  aug.s = {Stratum::Complier, Stratum::NeverTaker, Stratum::Complier};
  CHECK(complete_data_log_posterior(t, all_treated, aug, spec) ==
        doctest::Approx(log_prior(t, spec) + observed_data_log_likelihood(t, all_treated, spec))
            .epsilon(1e-12));

  ObservedDataset empty;
  AugmentedState no_aug;
  CHECK(complete_data_log_posterior(t, empty, no_aug, spec) ==
        doctest::Approx(log_prior(t, spec)).epsilon(1e-12));

  AugmentedState wrong;
  wrong.s = {Stratum::NeverTaker, Stratum::NeverTaker, Stratum::Complier};
  CHECK_THROWS(complete_data_log_posterior(t, all_treated, wrong, spec));
}

TEST_CASE("marginalizing the augmentation recovers the observed-data posterior") {
  SUBCASE("two latent units, bivariate") {
    const Theta t = toy_cc_theta();
    const ModelSpec spec = spec_for(t);
    ObservedDataset data;
    data.units = {unit(0, 0, 2.6, 8.2), unit(0, 0, 3.1, 11.5), unit(1, 1, 0.4, 6.6)};
    const double expect = log_prior(t, spec) + observed_data_log_likelihood(t, data, spec);
    CHECK(enumerate_marginal(t, data, spec) == doctest::Approx(expect).epsilon(1e-12));
  }

  SUBCASE("twelve latent units, probit family") {
    const Theta t = scenario_like_cb_theta();
    const ModelSpec spec = spec_for(t);
    RngStream rng(3);
    ObservedDataset data;
    for (int i = 0; i < 12; ++i)
      data.units.push_back(unit(0, 0, 2.0 + rng.uniform(), rng.uniform() < 0.5 ? 0.0 : 1.0));
    data.units.push_back(unit(1, 1, 0.5, 1.0));
    data.units.push_back(unit(1, 0, 4.0, 0.0));
    const double expect = log_prior(t, spec) + observed_data_log_likelihood(t, data, spec);
    const double got = enumerate_marginal(t, data, spec);
    CHECK(std::fabs(got - expect) / std::max(1.0, std::fabs(expect)) < 1e-10);
  }
}

TEST_CASE("apply_restriction ties and idempotence") {
  SUBCASE("ER on the univariate family forces tau_n = 0") {
    Theta t = Theta::make(Family::Univariate);
    t.cell(Stratum::NeverTaker, 0).mu[0] = 2.0;
    t.cell(Stratum::NeverTaker, 0).sigma(0, 0) = 0.5;
    t.cell(Stratum::NeverTaker, 1).mu[0] = 5.0;
    ModelSpec spec = spec_for(t, Restriction::ER);
    const Theta tied = apply_restriction(t, spec);
    CHECK(tied.cell(Stratum::NeverTaker, 1).mu[0] == 2.0);
    CHECK(tied.cell(Stratum::NeverTaker, 1).sigma(0, 0) == 0.5);
    CHECK(tied.cell(Stratum::NeverTaker, 1).mu[0] - tied.cell(Stratum::NeverTaker, 0).mu[0] == 0.0);
  }

  SUBCASE("PER ties only the secondary margin") {
    Theta t = scenario_like_cb_theta();
    ModelSpec spec = spec_for(t, Restriction::PER);
    const Theta tied = apply_restriction(t, spec);
    CHECK(norm_cdf(tied.cell(Stratum::NeverTaker, 1).mu[1]) -
              norm_cdf(tied.cell(Stratum::NeverTaker, 0).mu[1]) ==
          0.0);
    // tau_n stays free
    CHECK(tied.cell(Stratum::NeverTaker, 1).mu[0] != tied.cell(Stratum::NeverTaker, 0).mu[0]);
    // covariances stay free
    CHECK(tied.cell(Stratum::NeverTaker, 1).sigma(0, 0) !=
          tied.cell(Stratum::NeverTaker, 0).sigma(0, 0));
  }

  SUBCASE("none is the identity; PER rejects the univariate family") {
    Theta t = scenario_like_cb_theta();
    const Theta same = apply_restriction(t, spec_for(t, Restriction::None));
    CHECK(same.cell(Stratum::NeverTaker, 1).mu == t.cell(Stratum::NeverTaker, 1).mu);
    Theta uni = Theta::make(Family::Univariate);
    CHECK_THROWS(apply_restriction(uni, spec_for(uni, Restriction::PER)));
  }

  SUBCASE("idempotence") {
    for (Restriction r : {Restriction::None, Restriction::ER, Restriction::PER}) {
      Theta t = scenario_like_cb_theta();
      ModelSpec spec = spec_for(t, r);
      const Theta once = apply_restriction(t, spec);
      const Theta twice = apply_restriction(once, spec);
      for (int i = 0; i < 4; ++i) {
        CHECK(once.cells[i].mu == twice.cells[i].mu);
        CHECK(once.cells[i].sigma == twice.cells[i].sigma);
      }
    }
  }
}

TEST_CASE("complier_posterior_prob: determinism for the treated arm") {
  const Theta t = toy_cc_theta();
  CHECK(complier_posterior_prob(t, unit(1, 1, 0.0, 0.0)) == 1.0);
  CHECK(complier_posterior_prob(t, unit(1, 0, 0.0, 0.0)) == 0.0);
  const double p = complier_posterior_prob(t, unit(0, 0, 2.6, 8.3));
  CHECK(p > 0.0);
  CHECK(p < 1.0);
}

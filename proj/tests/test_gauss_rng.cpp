#include <doctest.h>

#include <cmath>

#include "pstrat/gauss.hpp"
#include "pstrat/rng.hpp"

using namespace pstrat;

TEST_CASE("norm_quantile matches known values") {
  CHECK(norm_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(norm_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(norm_quantile(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-12));
  CHECK(norm_quantile(0.95) == doctest::Approx(1.6448536269514722).epsilon(1e-12));
}

TEST_CASE("norm_quantile round-trips through the CDF across both tails") {
  for (double p : {1e-300, 1e-100, 1e-16, 1e-8, 1e-3, 0.2, 0.5, 0.7, 0.999, 1.0 - 1e-8}) {
    const double x = norm_quantile(p);
    const double back = p < 0.5 ? norm_cdf(x) : norm_sf(x);
    const double target = p < 0.5 ? p : 1.0 - p;
    CHECK(back == doctest::Approx(target).epsilon(1e-10));
  }
  CHECK_THROWS(norm_quantile(0.0));
  CHECK_THROWS(norm_quantile(1.0));
}

TEST_CASE("log_add_exp handles spread magnitudes") {
  CHECK(log_add_exp(0.0, 0.0) == doctest::Approx(std::log(2.0)));
  CHECK(log_add_exp(-1000.0, 0.0) == doctest::Approx(0.0));
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(log_add_exp(-inf, -2.5) == doctest::Approx(-2.5));
}

TEST_CASE("RngStream is deterministic and derivation separates streams") {
  RngStream a(42), b(42), c(43);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const double ua = a.uniform();
    all_equal = all_equal && ua == b.uniform();
    any_diff = any_diff || ua != c.uniform();
  }
  CHECK(all_equal);
  CHECK(any_diff);

  RngStream d1 = RngStream::derive(7, {1, 2});
  RngStream d2 = RngStream::derive(7, {1, 2});
  RngStream d3 = RngStream::derive(7, {2, 1});
  CHECK(d1.seed() == d2.seed());
  CHECK(d1.seed() != d3.seed());
  CHECK(d1.uniform() == d2.uniform());
}

TEST_CASE("uniform draws stay strictly inside (0,1)") {
  RngStream rng(1);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
}

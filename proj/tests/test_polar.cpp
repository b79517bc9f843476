#include "doctest.h"

#include "coneflow/polar.hpp"
#include "oracles.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace coneflow;

TEST_CASE("polar analytic branches") {
  SUBCASE("beta = 1: s == rho, a == 1") {
    PolarChart c = integrate_polar(1.0, 0.3, 1.0, 1e-3);
    for (std::size_t i = 0; i < c.rho_nodes.size(); ++i) {
      CHECK(c.s_vals[i] == doctest::Approx(c.rho_nodes[i]).epsilon(1e-14));
      CHECK(c.a_vals[i] == doctest::Approx(1.0).epsilon(1e-14));
    }
  }
  SUBCASE("eps = 0: s == rho^beta, a == beta^2, u == 1") {
    PolarChart c = integrate_polar(0.5, 0.0, 1.0, 1e-3);
    for (std::size_t i = 0; i < c.rho_nodes.size(); ++i) {
      CHECK(c.s_vals[i] == doctest::Approx(std::pow(c.rho_nodes[i], 0.5)).epsilon(1e-13));
      CHECK(c.a_vals[i] == doctest::Approx(0.25).epsilon(1e-13));
      CHECK(c.u_vals[i] == doctest::Approx(1.0).epsilon(1e-13));
    }
  }
}

TEST_CASE("polar chart against the independent quadrature oracle") {
  PolarChart c = integrate_polar(0.5, 0.01, 1.0, 1e-3);
  const std::size_t last = c.rho_nodes.size() - 1;
  CHECK(c.rho_nodes[last] == doctest::Approx(1.0).epsilon(1e-14));
  // frozen oracle values (quadrature of the arclength ODE at rel tol 1e-13)
  CHECK(c.s_vals[last] == doctest::Approx(0.81138850687816856).epsilon(1e-8));
  CHECK(c.a_vals[last] == doctest::Approx(0.37785190690185949).epsilon(1e-8));
  // runtime oracle agreement on interior nodes
  for (std::size_t i = 10; i < c.rho_nodes.size(); i += 100) {
    CHECK(c.s_vals[i] == doctest::Approx(oracles::polar_s(0.5, 0.01, c.rho_nodes[i])).epsilon(1e-8));
  }
}

TEST_CASE("polar step refinement follows the step^4 model") {
  const double ref = oracles::polar_s(0.35, 1e-4, 1.0);
  double prev = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double step = 4e-3 / std::pow(2.0, k);
    PolarChart c = integrate_polar(0.35, 1e-4, 1.0, step);
    const double err = std::fabs(c.s_vals.back() - ref);
    if (k > 0) CHECK(err <= prev / 16.0 * 1.6);  // 16x per halving, with slack
    prev = err;
  }
}

TEST_CASE("two-sided coefficient bounds across the beta x eps grid") {
  for (double beta : {0.3, 0.5, 0.7, 0.9}) {
    for (double eps : {1.0, 1e-2, 1e-4, 1e-6, 1e-8}) {
      PolarChart c = integrate_polar(beta, eps, 1.0, 1e-3);
      PinchingReport p = quasi_isometry_certificate(c);
      CHECK(p.certified);
      CHECK(p.lower > beta * beta - 1e-9);
      CHECK(p.upper <= 1.0 + 1e-9);
      ComparisonReport cmp = comparison_check(c);
      CHECK(cmp.u_in_range);
      CHECK(cmp.v_lower_bound);
      CHECK(cmp.min_margin_one_minus_u > 0.0);
    }
  }
}

TEST_CASE("refinement stability: halving the step moves a by < 1e-8") {
  PolarChart c1 = integrate_polar(0.6, 1e-3, 1.0, 1e-3);
  PolarChart c2 = integrate_polar(0.6, 1e-3, 1.0, 5e-4);
  // compare at the shared final node rho = 1
  CHECK(std::fabs(c1.a_vals.back() - c2.a_vals.back()) < 1e-8);
  CHECK(std::fabs(c1.s_vals.back() - c2.s_vals.back()) < 1e-8);
}

TEST_CASE("coefficient_a interpolation and the frozen oracle value") {
  PolarChart c = integrate_polar(0.3, 1e-4, 1.0, 1e-4);
  const double a = coefficient_a(c, 0.5);
  CHECK(a > 0.09);
  CHECK(a <= 1.0);
  CHECK(a == doctest::Approx(0.15555612383441711).epsilon(1e-6));  // frozen oracle
  CHECK(a == doctest::Approx(oracles::polar_a(0.3, 1e-4, 0.5)).epsilon(1e-6));
  CHECK(coefficient_a(integrate_polar(1.0, 0.1, 1.0, 1e-3), 0.5) == doctest::Approx(1.0));
  CHECK(coefficient_a(integrate_polar(0.5, 0.0, 1.0, 1e-3), 0.5) == doctest::Approx(0.25));
  CHECK_THROWS_AS(coefficient_a(c, 2.0), std::out_of_range);
}

TEST_CASE("comparison_check branch reporting") {
  ComparisonReport r1 = comparison_check(integrate_polar(1.0, 0.5, 1.0, 1e-3));
  CHECK(r1.analytic_upper_branch);
  CHECK(r1.u_in_range);
  ComparisonReport r0 = comparison_check(integrate_polar(0.5, 0.0, 1.0, 1e-3));
  CHECK(r0.analytic_lower_branch);
  CHECK(r0.u_in_range);  // u == 1 is the analytic equality branch at eps = 0
  ComparisonReport rg = comparison_check(integrate_polar(0.7, 0.1, 1.0, 1e-3));
  CHECK(rg.min_margin_one_minus_u > 0.0);
  CHECK(rg.min_margin_v > 0.0);
}

TEST_CASE("pinching constants per eps sweep at beta = 0.5") {
  double prev_lower = 2.0;
  for (double eps : {1e-1, 1e-2, 1e-4, 1e-6, 1e-8}) {
    PolarChart c = integrate_polar(0.5, eps, 1.0, 1e-3);
    PinchingReport p = quasi_isometry_certificate(c);
    CHECK(p.certified);
    // deeper regularization hugs the conical lower bound more closely
    CHECK(p.lower <= prev_lower + 1e-12);
    prev_lower = p.lower;
  }
}

TEST_CASE("polar errors") {
  CHECK_THROWS_AS(integrate_polar(0.5, 0.1, 1.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(integrate_polar(0.5, -0.1, 1.0, 1e-3), std::domain_error);
  CHECK_THROWS_AS(integrate_polar(0.0, 0.1, 1.0, 1e-3), std::domain_error);
}

TEST_CASE("polar CSV export round-trips through the CSV reader") {
  PolarChart c = integrate_polar(0.5, 1e-2, 1.0, 1e-2);
  const auto path = std::filesystem::temp_directory_path() / "coneflow_polar_test.csv";
  write_polar_csv(c, path.string());
  // parse back with a simple reader and compare bit-faithfully
  std::FILE* f = std::fopen(path.string().c_str(), "rb");
  REQUIRE(f);
  char line[512];
  REQUIRE(std::fgets(line, sizeof(line), f));
  CHECK(std::string(line) == "rho,s,a,u\r\n");
  std::size_t i = 0;
  while (std::fgets(line, sizeof(line), f)) {
    double rho, s, a, u;
    REQUIRE(std::sscanf(line, "%lg,%lg,%lg,%lg", &rho, &s, &a, &u) == 4);
    CHECK(rho == c.rho_nodes[i]);
    CHECK(s == c.s_vals[i]);
    CHECK(a == c.a_vals[i]);
    CHECK(u == c.u_vals[i]);
    ++i;
  }
  CHECK(i == c.rho_nodes.size());
  std::fclose(f);
  std::filesystem::remove(path);
}

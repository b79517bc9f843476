#include "doctest.h"

#include "coneflow/geometry.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace coneflow;

TEST_CASE("chi profile analytic branches") {
  CHECK(chi_profile(1.0, 0.5, 2.0) == doctest::Approx(2.0).epsilon(1e-14));  // integrand == 1
  CHECK(chi_profile(0.5, 0.0, 4.0) == doctest::Approx(2.0).epsilon(1e-14));  // y^beta
  CHECK(chi_profile(0.5, 0.3, 0.0) == 0.0);
}

TEST_CASE("chi profile against the independent quadrature oracle") {
  // frozen from the oracle at rel tol 1e-12
  CHECK(chi_profile(0.5, 0.01, 1.0) == doctest::Approx(0.73406036297875823).epsilon(1e-10));
  for (double beta : {0.3, 0.7, 0.9}) {
    for (double eps : {1.0, 1e-2, 1e-5}) {
      for (double y : {1e-4, 0.2, 1.0}) {
        const double want = oracles::chi(beta, eps, y);
        CHECK(chi_profile(beta, eps, y) == doctest::Approx(want).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("chi profile domain errors") {
  CHECK_THROWS_AS(chi_profile(0.5, 0.1, -1.0), std::domain_error);
  CHECK_THROWS_AS(chi_profile(0.0, 0.1, 1.0), std::domain_error);
  CHECK_THROWS_AS(chi_profile(1.5, 0.1, 1.0), std::domain_error);
}

TEST_CASE("chi profile monotonicity: nondecreasing in y, nonincreasing in eps") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ub(0.05, 1.0), uy(0.0, 2.0), ue(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const double beta = ub(rng);
    double y1 = uy(rng), y2 = uy(rng);
    if (y1 > y2) std::swap(y1, y2);
    double e1 = ue(rng), e2 = ue(rng);
    if (e1 > e2) std::swap(e1, e2);
    const double y = uy(rng);
    CHECK(chi_profile(beta, e1, y1) <= chi_profile(beta, e1, y2) + 1e-12);
    CHECK(chi_profile(beta, e2, y) <= chi_profile(beta, e1, y) + 1e-12);
  }
}

TEST_CASE("regularized cone density closed forms") {
  CHECK(regularized_cone_density(1.0, 0.3, 7.0) == doctest::Approx(1.0));
  CHECK(regularized_cone_density(0.5, 0.0, 4.0) == doctest::Approx(0.125));
  CHECK(regularized_cone_density(0.7, 0.01, 0.5) ==
        doctest::Approx(0.59968754250692070).epsilon(1e-12));  // beta^2 (eps+y)^(beta-1), frozen
  CHECK_THROWS_AS(regularized_cone_density(0.5, 0.0, 0.0), std::domain_error);
}

TEST_CASE("cone density equals the numeric second derivative of chi (h-refined)") {
  // density of i ddbar chi(eps+|z|^2) in y = |z|^2: d/dy (y * d(chi)/dy)
  for (double beta : {0.3, 0.5, 0.7, 0.9, 1.0}) {
    for (double eps : {1.0, 1e-2, 1e-4}) {
      for (double y : {0.3, 1.0}) {
        const double want = regularized_cone_density(beta, eps, y);
        double prev_err = 1e300;
        bool converged = false;
        for (double h = 1e-2; h > 1e-6; h /= 2.0) {
          auto W = [&](double yy) { return chi_profile(beta, eps, yy); };
          const double d1 = (W(y + h) - W(y - h)) / (2.0 * h);
          const double d2 = (W(y + h) - 2.0 * W(y) + W(y - h)) / (h * h);
          const double got = d1 + y * d2;
          const double err = std::fabs(got - want) / std::fabs(want);
          if (err < 1e-6) {
            converged = true;
            break;
          }
          CHECK(err < prev_err * 1.05);  // refinement must not diverge
          prev_err = err;
        }
        CHECK(converged);
      }
    }
  }
}

TEST_CASE("omega_eps density: positivity, exact area, N too small error") {
  RadialGrid grid = RadialGrid::uniform(257);
  ConeGeometry geom(0.5, 1e-3, grid);
  RadialField u = geom.omega_eps_density();
  for (std::size_t i = 0; i < u.size(); ++i) CHECK(u[i] > 0.0);
  std::vector<double> ones(u.size(), 1.0);
  CHECK(std::fabs(geom.grid.integrate(ones, u.values) / kTotalArea - 1.0) < 1e-12);
  CHECK_THROWS_WITH_AS(ConeGeometry(0.5, 1e-3, grid, 0.05), doctest::Contains("N too small"),
                       std::invalid_argument);
}

TEST_CASE("omega_eps at beta = 1 is the background plus a smooth correction") {
  RadialGrid grid = RadialGrid::uniform(129);
  ConeGeometry geom(1.0, 0.2, grid, 10.0, 0.1, 0.5);
  RadialField u = geom.omega_eps_density();
  // analytic correction: (1/N) * c (1-6s+6s^2) * s_norm/4... for |S|^2 = 4s(1-s):
  // ddbar(q)/g0 = 2(1-6s+6s^2)
  for (std::size_t i = 4; i + 4 < u.size(); i += 8) {
    const double s = grid.node(i);
    const double want = 1.0 + 2.0 * (1.0 - 6.0 * s + 6.0 * s * s) / geom.N;
    CHECK(u[i] == doctest::Approx(want).epsilon(1e-3));
  }
}

TEST_CASE("omega_eps at eps = 1 stays within a grid-stable band of the background") {
  auto band = [](std::size_t n) {
    ConeGeometry geom(0.5, 1.0, RadialGrid::uniform(n), 10.0);
    RadialField u = geom.omega_eps_density();
    double lo = 1e300, hi = -1e300;
    for (std::size_t i = 0; i < u.size(); ++i) {
      lo = std::min(lo, u[i]);
      hi = std::max(hi, u[i]);
    }
    return std::max(hi, 1.0 / lo);
  };
  const double c1 = band(129), c2 = band(257);
  CHECK(std::fabs(c1 / c2 - 1.0) < 0.1);  // C independent of grid size
}

TEST_CASE("large N limit recovers the background density") {
  RadialGrid grid = RadialGrid::uniform(129);
  ConeGeometry geom(0.5, 1e-2, grid, 1e8);
  RadialField u = geom.omega_eps_density();
  for (std::size_t i = 0; i < u.size(); ++i) CHECK(u[i] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("barrier psi values") {
  RadialGrid grid = RadialGrid::uniform(5);  // nodes at sigma = 0, .25, .5, .75, 1
  ConeGeometry g0(0.5, 0.0, grid, 10.0);
  // |S|^2 = 1 at the equator node: chi_rho(0 + 1) = 1
  CHECK(g0.barrier_psi(0.25, 2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g0.barrier_psi(0.25, 0) == 0.0);  // |S|^2 = 0 at the pole
  ConeGeometry g1(0.5, 0.1, grid, 10.0);
  // frozen oracle: chi_{0.25}(0.1 + 0.3), |S|^2 = 0.3 at sigma such that 4s(1-s)=0.3
  const double q = 0.3;
  const double psi = chi_profile(0.25, 0.1, q);
  CHECK(psi == doctest::Approx(0.075227129098793626).epsilon(1e-10));
  CHECK(oracles::chi(0.25, 0.1, q) == doctest::Approx(psi).epsilon(1e-10));
  CHECK_THROWS_AS(g1.barrier_psi(0.7, 1), std::domain_error);  // rho >= beta
}

TEST_CASE("donaldson density: branches, band, and delta-too-large error") {
  RadialGrid grid = RadialGrid::uniform(4097);
  SUBCASE("beta = 1 smooth") {
    ConeGeometry geom(1.0, 0.1, grid, 10.0, 0.05, 0.5);
    RadialField u = geom.donaldson_density();
    for (std::size_t i = 0; i < u.size(); ++i) CHECK(u[i] > 0.0);
  }
  SUBCASE("delta -> 0 recovers the background") {
    ConeGeometry geom(0.5, 0.1, grid, 10.0, 1e-12);
    RadialField u = geom.donaldson_density();
    for (std::size_t i = 0; i < u.size(); ++i) CHECK(u[i] == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("near-pole ratio to the standard cone sits in a band") {
    ConeGeometry geom(0.5, 0.1, grid, 10.0, 0.05);
    RadialField u = geom.donaldson_density();
    double lo = 1e300, hi = -1e300;
    for (std::size_t i = 1; i < u.size(); ++i) {
      const double s = grid.node(i);
      if (s >= 0.01) break;
      const double y = s / (1.0 - s);
      const double g_D = u[i] * 2.0 * (1.0 - s) * (1.0 - s);  // chart density
      const double cone = 0.25 * std::pow(y, -0.5);           // beta^2 y^(beta-1)
      const double ratio = g_D / cone;
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    // delta * s_norm^beta = 0.05 * 2 = 0.1 is the pole limit of the ratio
    CHECK(lo > 0.05);
    CHECK(hi < 2.0);
    ConeGeometry half(0.5, 0.1, RadialGrid::uniform(2049), 10.0, 0.05);
    RadialField uh = half.donaldson_density();
    double lo2 = 1e300;
    for (std::size_t i = 1; i < uh.size(); ++i) {
      const double s = half.grid.node(i);
      if (s >= 0.01) break;
      const double y = s / (1.0 - s);
      lo2 = std::min(lo2, uh[i] * 2.0 * (1.0 - s) * (1.0 - s) / (0.25 * std::pow(y, -0.5)));
    }
    CHECK(std::fabs(lo2 / lo - 1.0) < 0.1);  // two-resolution stability
  }
  SUBCASE("delta too large") {
    CHECK_THROWS_WITH_AS(ConeGeometry(0.5, 0.1, RadialGrid::uniform(257), 10.0, 100.0),
                         doctest::Contains("delta too large"), std::runtime_error);
  }
}

TEST_CASE("trace ratio") {
  RadialField a{{1.0, 2.0, 4.0}, FieldKind::density};
  RadialField b = a;
  RadialField r = trace_ratio(a, b);
  for (std::size_t i = 0; i < 3; ++i) CHECK(r[i] == 1.0);
  for (auto& v : b.values) v *= 2.0;
  r = trace_ratio(a, b);
  for (std::size_t i = 0; i < 3; ++i) CHECK(r[i] == 2.0);
  b.values[1] = -1.0;
  CHECK_THROWS_AS(trace_ratio(a, b), std::domain_error);
}

TEST_CASE("trace ratio of omega_eps vs omega_D at small eps is bounded") {
  ConeGeometry geom(0.5, 1e-4, RadialGrid::graded(257, 5e-5), 10.0);
  RadialField ue = geom.omega_eps_density();
  RadialField uD = geom.donaldson_density();
  RadialField r = trace_ratio(uD, ue);
  CHECK(r.sup() < 50.0);
  CHECK(r.inf() > 1.0 / 50.0);
}

TEST_CASE("compute_h: Einstein background gives h == 0, mean zero imposed") {
  for (double beta : {1.0, 0.5}) {
    ConeGeometry geom(beta, 1e-2, RadialGrid::uniform(257), 10.0);
    RadialField h = geom.compute_h();
    CHECK(h.sup_abs() < 1e-12);  // round background with FS bundle metric
    CHECK(std::fabs(geom.grid.integrate_background(h.values)) < 1e-12);
  }
}

TEST_CASE("quasi-isometry of the Donaldson model near cone points (two-resolution)") {
  // model-vs-cone pinching constant stable within 10% under refinement
  auto pinch = [](std::size_t n) {
    ConeGeometry geom(0.7, 0.0, RadialGrid::uniform(n), 4.0);
    RadialField u = geom.donaldson_density();
    double c = 0.0;
    for (std::size_t i = 1; i < u.size(); ++i) {
      const double s = geom.grid.node(i);
      if (s >= 0.02) break;
      const double y = s / (1.0 - s);
      const double ratio = u[i] * 2.0 * std::pow(1.0 - s, 2.0) /
                           (0.49 * std::pow(y, -0.3));
      c = std::max(c, std::max(ratio, 1.0 / ratio));
    }
    return c;
  };
  const double c1 = pinch(2049), c2 = pinch(4097);
  CHECK(std::fabs(c1 / c2 - 1.0) < 0.1);
}

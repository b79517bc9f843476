#include "doctest.h"

#include "coneflow/elliptic.hpp"
#include "coneflow/flow.hpp"

#include <cmath>

using namespace coneflow;

namespace {

ConeGeometry make_geom(double beta, double eps, std::size_t n = 257) {
  return ConeGeometry(beta, eps, RadialGrid::uniform(n), 10.0);
}

FlowState initial_state(const ConeGeometry& geom, const RadialField& phi0,
                        FlowReference ref = FlowReference::omega_0) {
  FlowConfig cfg;
  cfg.reference = ref;
  cfg.dt = 1e-6;
  cfg.T = 1e-6;
  Trajectory t = run_flow(geom, cfg, phi0);
  return t.snapshots.front();
}

// explicit RK4 reference integrator for the potential flow (omega_0 reference)
std::vector<double> explicit_reference(const ConeGeometry& geom, std::vector<double> phi,
                                       double T, double dt) {
  RadialField h = geom.compute_h();
  const std::size_t n = geom.grid.size();
  std::vector<double> H(n);
  for (std::size_t i = 0; i < n; ++i)
    H[i] = h[i] + (1.0 - geom.beta) * std::log(geom.section_sq(i) + geom.eps);
  auto rhs = [&](const std::vector<double>& p) {
    std::vector<double> dd = geom.grid.ddbar_rel(p);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
      out[i] = std::log(1.0 + dd[i]) + geom.beta * p[i] + H[i];
    return out;
  };
  const std::size_t steps = std::size_t(std::llround(T / dt));
  for (std::size_t k = 0; k < steps; ++k) {
    std::vector<double> k1 = rhs(phi);
    std::vector<double> tmp(n);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = phi[i] + 0.5 * dt * k1[i];
    std::vector<double> k2 = rhs(tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = phi[i] + 0.5 * dt * k2[i];
    std::vector<double> k3 = rhs(tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = phi[i] + dt * k3[i];
    std::vector<double> k4 = rhs(tmp);
    for (std::size_t i = 0; i < n; ++i)
      phi[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return phi;
}

}  // namespace

TEST_CASE("beta = 1 round background: phi = 0 is an exact fixed point") {
  ConeGeometry geom(1.0, 0.3, RadialGrid::uniform(129), 10.0, 0.1, 0.5);
  FlowConfig cfg;
  cfg.dt = 1e-3;
  cfg.T = 0.02;
  RadialField zero{std::vector<double>(geom.grid.size(), 0.0), FieldKind::potential};
  Trajectory traj = run_flow(geom, cfg, zero);
  CHECK(traj.final_state().phi.sup_abs() < 1e-9);
  CHECK(traj.final_state().phi_dot.sup_abs() < 1e-9);
}

TEST_CASE("manufactured stationary point stays fixed under stepping") {
  ConeGeometry geom = make_geom(0.7, 1e-2, 129);
  SmoothingResult sm = smoothing_pipeline(geom, ke_log_density(geom.grid, 0.7));
  RadialField phi_star = solve_stationary(geom, sm.phi_hat);
  FlowConfig cfg;
  cfg.dt = 1e-3;
  cfg.T = 0.05;
  Trajectory traj = run_flow(geom, cfg, phi_star);
  double drift = 0.0;
  for (std::size_t i = 0; i < phi_star.size(); ++i)
    drift = std::max(drift, std::fabs(traj.final_state().phi[i] - phi_star[i]));
  CHECK(drift < 1e-8);
  CHECK(traj.final_state().phi_dot.sup_abs() < 1e-9);
}

TEST_CASE("one step matches the refined explicit integrator to O(dt^2)") {
  ConeGeometry geom = make_geom(0.6, 1e-2, 129);
  SmoothingResult sm = smoothing_pipeline(geom, ke_log_density(geom.grid, 0.6));
  FlowState st = initial_state(geom, sm.phi_hat);
  auto local_error = [&](double dt) {
    FlowConfig cfg;
    cfg.dt = dt;
    cfg.T = dt;
    FlowState out = flow_step(st, geom, cfg);
    std::vector<double> ref = explicit_reference(geom, sm.phi_hat.values, dt, dt / 1000.0);
    double err = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i)
      err = std::max(err, std::fabs(out.phi[i] - ref[i]));
    return err;
  };
  const double e1 = local_error(2e-3);
  const double e2 = local_error(1e-3);
  CHECK(e1 / e2 > 3.0);  // one-step error is O(dt^2): halving dt quarters it
  CHECK(e1 / e2 < 5.0);
}

TEST_CASE("dt-refinement: endpoint potentials differ by O(dt)") {
  ConeGeometry geom = make_geom(0.5, 1e-2, 129);
  SmoothingResult sm = smoothing_pipeline(geom, ke_log_density(geom.grid, 0.5));
  auto endpoint = [&](double dt) {
    FlowConfig cfg;
    cfg.dt = dt;
    cfg.T = 0.1;
    return run_flow(geom, cfg, sm.phi_hat).final_state().phi;
  };
  RadialField p1 = endpoint(2e-3), p2 = endpoint(1e-3), p4 = endpoint(5e-4);
  double d12 = 0.0, d24 = 0.0;
  for (std::size_t i = 0; i < p1.size(); ++i) {
    d12 = std::max(d12, std::fabs(p1[i] - p2[i]));
    d24 = std::max(d24, std::fabs(p2[i] - p4[i]));
  }
  CHECK(d24 < d12);
  CHECK(d24 / d12 == doctest::Approx(0.5).epsilon(0.25));  // first order in dt
}

TEST_CASE("maximum principle and twisted-potential monotonicity on a run") {
  ConeGeometry geom = make_geom(0.7, 1e-3);
  SmoothingResult sm = smoothing_pipeline(geom, ke_log_density(geom.grid, 0.7));
  FlowConfig cfg;
  cfg.dt = 1e-3;
  cfg.T = 0.25;
  Trajectory traj = run_flow(geom, cfg, sm.phi_hat);
  const double sup0 = traj.steps.front().sup_phidot;
  for (const auto& d : traj.steps) {
    CHECK(d.sup_phidot <= std::exp(geom.beta * d.t) * sup0 + 1e-6);
    CHECK(std::fabs(d.area / kTotalArea - 1.0) < 1e-6);
  }
  for (std::size_t k = 1; k < traj.steps.size(); ++k)
    CHECK(traj.steps[k].sup_v <= traj.steps[k - 1].sup_v + 1e-8);
}

TEST_CASE("twisted potential: zero at a fixed point, residual first order in dt") {
  ConeGeometry geom = make_geom(0.7, 1e-2, 129);
  SmoothingResult sm = smoothing_pipeline(geom, ke_log_density(geom.grid, 0.7));
  SUBCASE("fixed point gives v == 0") {
    RadialField phi_star = solve_stationary(geom, sm.phi_hat);
    FlowConfig cfg;
    cfg.dt = 1e-3;
    cfg.T = 0.02;
    Trajectory traj = run_flow(geom, cfg, phi_star);
    TwistedPotential tp = twisted_potential(traj, geom);
    for (const auto& v : tp.v) CHECK(v.sup_abs() < 1e-9);
  }
  SUBCASE("residual decreases under dt refinement") {
    auto resid = [&](double dt) {
      FlowConfig cfg;
      cfg.dt = dt;
      cfg.T = 0.04;
      cfg.snapshot_stride = 1;
      Trajectory traj = run_flow(geom, cfg, sm.phi_hat);
      TwistedPotential tp = twisted_potential(traj, geom);
      double m = 0.0;
      for (double r : tp.residual_sup) m = std::max(m, r);
      return m;
    };
    const double r1 = resid(2e-3), r2 = resid(1e-3);
    CHECK(r2 < r1);
  }
}

TEST_CASE("reference equivalence: (3.1) and (3.2) differ exactly by Psi/N") {
  ConeGeometry geom = make_geom(0.6, 1e-2, 129);
  SmoothingResult sm = smoothing_pipeline(geom, ke_log_density(geom.grid, 0.6));
  FlowConfig cfgA;
  cfgA.dt = 1e-3;
  cfgA.T = 0.05;
  Trajectory trajA = run_flow(geom, cfgA, sm.phi_hat);
  FlowConfig cfgB = cfgA;
  cfgB.reference = FlowReference::omega_eps;
  RadialField phiB0 = sm.phi_hat;
  const auto& psi = geom.psi_beta();
  for (std::size_t i = 0; i < phiB0.size(); ++i) phiB0[i] -= psi[i] / geom.N;
  Trajectory trajB = run_flow(geom, cfgB, phiB0);
  double worst = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i)
    worst = std::max(worst, std::fabs(trajA.final_state().phi[i] -
                                      trajB.final_state().phi[i] - psi[i] / geom.N));
  CHECK(worst < 10.0 * cfgA.newton_tol);
  // the two trajectories carry the same metric
  double du = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i)
    du = std::max(du, std::fabs(trajA.final_state().density[i] - trajB.final_state().density[i]));
  CHECK(du < 1e-9);
}

TEST_CASE("restart datum: identity at t = 0 and two-route agreement") {
  ConeGeometry geom = make_geom(0.5, 1e-3, 257);
  SmoothingResult sm = smoothing_pipeline(geom, ke_log_density(geom.grid, 0.5));
  FlowConfig cfg;
  cfg.dt = 1e-3;
  cfg.T = 0.1;
  cfg.snapshot_stride = 50;
  Trajectory traj = run_flow(geom, cfg, sm.phi_hat);
  RadialField F0 = restart_datum(traj.snapshots.front(), geom);
  for (std::size_t i = 0; i < F0.size(); ++i)
    CHECK(F0[i] == doctest::Approx(sm.F_eps[i]).epsilon(1e-7));  // recovers the initial F_eps
  RadialField Ft = restart_datum(traj.final_state(), geom);  // two routes agree internally
  // the datum feeds the pipeline again (restart smoke)
  SmoothingResult sm2 = smoothing_pipeline(geom, Ft);
  CHECK(sm2.normalization_residual_exp < 1e-8);
  CHECK(sm2.phi_hat.sup() == 0.0);
}

TEST_CASE("restart datum two-route agreement holds for the omega_eps reference") {
  ConeGeometry geom = make_geom(0.6, 1e-2, 129);
  SmoothingResult sm = smoothing_pipeline(geom, ke_log_density(geom.grid, 0.6));
  FlowConfig cfg;
  cfg.dt = 1e-3;
  cfg.T = 0.03;
  cfg.reference = FlowReference::omega_eps;
  RadialField phiB0 = sm.phi_hat;
  const auto& psi = geom.psi_beta();
  for (std::size_t i = 0; i < phiB0.size(); ++i) phiB0[i] -= psi[i] / geom.N;
  Trajectory traj = run_flow(geom, cfg, phiB0);
  CHECK_NOTHROW(restart_datum(traj.final_state(), geom));
}

TEST_CASE("semigroup: restarting from the mid-state reproduces the endpoint") {
  ConeGeometry geom = make_geom(0.5, 1e-2, 129);
  SmoothingResult sm = smoothing_pipeline(geom, ke_log_density(geom.grid, 0.5));
  FlowConfig cfg;
  cfg.dt = 1e-3;
  cfg.T = 0.1;
  cfg.snapshot_stride = 50;  // snapshot exactly at t = 0.05
  Trajectory full = run_flow(geom, cfg, sm.phi_hat);
  const FlowState* mid = nullptr;
  for (const auto& s : full.snapshots)
    if (std::fabs(s.t - 0.05) < 1e-12) mid = &s;
  REQUIRE(mid != nullptr);
  FlowConfig half = cfg;
  half.T = 0.05;
  Trajectory tail = run_flow(geom, half, mid->phi);
  double d = 0.0;
  for (std::size_t i = 0; i < sm.phi_hat.size(); ++i)
    d = std::max(d, std::fabs(tail.final_state().phi[i] - full.final_state().phi[i]));
  CHECK(d < 1e-3 * cfg.dt);  // the step map is autonomous, so this is near-exact
}

TEST_CASE("fixed-point datum is constant along the flow") {
  ConeGeometry geom = make_geom(0.7, 1e-2, 129);
  SmoothingResult sm = smoothing_pipeline(geom, ke_log_density(geom.grid, 0.7));
  RadialField phi_star = solve_stationary(geom, sm.phi_hat);
  FlowConfig cfg;
  cfg.dt = 1e-3;
  cfg.T = 0.03;
  cfg.snapshot_stride = 10;
  Trajectory traj = run_flow(geom, cfg, phi_star);
  RadialField F_first = restart_datum(traj.snapshots.front(), geom);
  RadialField F_last = restart_datum(traj.final_state(), geom);
  for (std::size_t i = 0; i < F_first.size(); ++i)
    CHECK(F_first[i] == doctest::Approx(F_last[i]).epsilon(1e-8));
}

TEST_CASE("kahler-cone violation and dt floor produce flow errors") {
  ConeGeometry geom = make_geom(0.5, 1e-2, 65);
  const std::size_t n = geom.grid.size();
  // a potential so rough that the density is already nonpositive
  std::vector<double> bad(n);
  for (std::size_t i = 0; i < n; ++i) bad[i] = 10.0 * ((i % 2 == 0) ? 1.0 : -1.0);
  FlowConfig cfg;
  cfg.dt = 1e-3;
  cfg.T = 0.01;
  CHECK_THROWS_AS(run_flow(geom, cfg, RadialField{bad, FieldKind::potential}), FlowError);
}

TEST_CASE("semi-implicit scheme stays close to the implicit one over a short run") {
  ConeGeometry geom = make_geom(0.6, 1e-2, 129);
  SmoothingResult sm = smoothing_pipeline(geom, ke_log_density(geom.grid, 0.6));
  FlowConfig ci;
  ci.dt = 1e-3;
  ci.T = 0.02;
  FlowConfig cs = ci;
  cs.scheme = FlowScheme::semi_implicit;
  Trajectory ti = run_flow(geom, ci, sm.phi_hat);
  Trajectory ts = run_flow(geom, cs, sm.phi_hat);
  double d = 0.0;
  for (std::size_t i = 0; i < sm.phi_hat.size(); ++i)
    d = std::max(d, std::fabs(ti.final_state().phi[i] - ts.final_state().phi[i]));
  CHECK(d < 1e-5);
}

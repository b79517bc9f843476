#include "coneflow/flow.hpp"

#include <cmath>
#include <cstdio>

namespace coneflow {

namespace {

struct FlowOperator {
  const ConeGeometry* geom = nullptr;
  FlowReference reference = FlowReference::omega_0;
  std::vector<double> u_base;  // density under the potential: u = u_base + ddbar_rel(phi)
  std::vector<double> u_ref;   // reference density in the log term
  std::vector<double> H;       // static forcing

  static FlowOperator make(const ConeGeometry& g, FlowReference ref) {
    FlowOperator op;
    op.geom = &g;
    op.reference = ref;
    const std::size_t n = g.grid.size();
    RadialField h = g.compute_h();
    op.H.resize(n);
    if (ref == FlowReference::omega_0) {
      op.u_base.assign(n, 1.0);
      op.u_ref.assign(n, 1.0);
      for (std::size_t i = 0; i < n; ++i)
        op.H[i] = h[i] + (1.0 - g.beta) * std::log(g.section_sq(i) + g.eps);
    } else {
      op.u_base = g.u_eps();
      op.u_ref = g.u_eps();
      const auto& psi = g.psi_beta();
      for (std::size_t i = 0; i < n; ++i)
        op.H[i] = h[i] + std::log(g.u_eps()[i]) +
                  (1.0 - g.beta) * std::log(g.section_sq(i) + g.eps) +
                  (g.beta / g.N) * psi[i];
    }
    return op;
  }

  std::vector<double> density(std::span<const double> phi) const {
    std::vector<double> u = geom->grid.ddbar_rel(phi);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += u_base[i];
    return u;
  }

  std::vector<double> phidot(std::span<const double> phi, std::span<const double> u) const {
    std::vector<double> pd(u.size());
    for (std::size_t i = 0; i < u.size(); ++i)
      pd[i] = std::log(u[i] / u_ref[i]) + geom->beta * phi[i] + H[i];
    return pd;
  }
};

// Newton solve of  x - target - dtt*(log(u(x)/u_ref) + H) = 0.
// Returns false if Newton stalls or the density leaves the Kahler cone.
bool implicit_solve(const FlowOperator& op, const std::vector<double>& target, double dtt,
                    std::vector<double>& x, double tol, int max_iter, bool single_iteration) {
  const auto& grid = op.geom->grid;
  const std::size_t n = x.size();
  const auto& em = grid.edge_mid();
  const auto& ew = grid.edge_width();
  std::vector<double> c(n - 1);
  for (std::size_t e = 0; e + 1 < n; ++e) c[e] = em[e] * (1.0 - em[e]) / ew[e];

  Tridiagonal J;
  J.lower.assign(n, 0.0);
  J.diag.assign(n, 0.0);
  J.upper.assign(n, 0.0);
  std::vector<double> R(n);

  for (int it = 0; it < max_iter; ++it) {
    std::vector<double> u = op.density(x);
    double umin = 1e300;
    for (double v : u) umin = std::min(umin, v);
    if (umin <= 0.0) return false;
    double rmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      R[i] = x[i] - target[i] - dtt * (std::log(u[i] / op.u_ref[i]) + op.H[i]);
      rmax = std::max(rmax, std::fabs(R[i]));
    }
    if (rmax < tol) return true;
    // J = I - dtt * diag(1/u) * DDbar
    for (std::size_t i = 0; i < n; ++i) {
      const double fac = dtt / (u[i] * 2.0 * grid.weight(i));
      double left = (i > 0) ? c[i - 1] : 0.0;
      double right = (i + 1 < n) ? c[i] : 0.0;
      J.diag[i] = 1.0 + fac * (left + right);
      if (i > 0) J.lower[i] = -fac * left;
      if (i + 1 < n) J.upper[i] = -fac * right;
    }
    std::vector<double> dx = J.solve(R);
    // damp to keep the density positive
    double lam = 1.0;
    for (int bt = 0; bt < 30; ++bt) {
      std::vector<double> xt(n);
      for (std::size_t i = 0; i < n; ++i) xt[i] = x[i] - lam * dx[i];
      std::vector<double> ut = op.density(xt);
      double mn = 1e300;
      for (double v : ut) mn = std::min(mn, v);
      if (mn > 0.0) {
        x = std::move(xt);
        break;
      }
      lam *= 0.5;
      if (bt == 29) return false;
    }
    if (single_iteration && it == 0) {
      // semi-implicit: one linearized correction only; verify the residual is sane
      std::vector<double> u2 = op.density(x);
      double mn = 1e300;
      for (double v : u2) mn = std::min(mn, v);
      return mn > 0.0;
    }
  }
  return false;
}

StepDiagnostics diagnostics(const FlowOperator& op, double t, std::span<const double> phi,
                            std::span<const double> u, std::span<const double> pd,
                            double delta_tube, std::span<const double> u_prev, double dt) {
  const ConeGeometry& g = *op.geom;
  const auto& grid = g.grid;
  const std::size_t n = grid.size();
  StepDiagnostics d;
  d.t = t;
  double supd = 0.0;
  for (double v : pd) supd = std::max(supd, std::fabs(v));
  d.sup_phidot = supd;
  d.sup_v = std::exp(-g.beta * t) * supd;
  std::vector<double> ones(n, 1.0);
  d.area = grid.integrate(ones, u);

  const auto& ue = g.u_eps();
  double ts = -1e300, ti = 1e300;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = grid.node(i);
    if (s < delta_tube || s > 1.0 - delta_tube) continue;
    const double r = u[i] / ue[i];
    ts = std::max(ts, r);
    ti = std::min(ti, r);
  }
  d.trace_sup = ts;
  d.trace_inf = ti;

  // R = (1 - ddbar_rel(log u)) / u, from the background-relative density
  std::vector<double> logu(n);
  for (std::size_t i = 0; i < n; ++i) logu[i] = std::log(u[i]);
  std::vector<double> dd = grid.ddbar_rel(logu);
  double rmin = 1e300;
  for (std::size_t i = 0; i < n; ++i) rmin = std::min(rmin, (1.0 - dd[i]) / u[i]);
  d.min_R_t = t * rmin;

  if (!u_prev.empty() && dt > 0.0) {
    double vd = -1e300;
    for (std::size_t i = 0; i < n; ++i)
      vd = std::max(vd, (std::log(u[i]) - std::log(u_prev[i])) / dt);
    d.vol_deriv_max = vd;
  }
  return d;
}

}  // namespace

FlowState flow_step(const FlowState& state, const ConeGeometry& geom, const FlowConfig& config) {
  config.validate();
  state.density.validate();
  FlowOperator op = FlowOperator::make(geom, config.reference);
  const double beta = geom.beta;
  const double dt = config.dt;
  const double ebdt = std::exp(beta * dt);
  const double dtt = (ebdt - 1.0) / beta;

  const std::size_t n = geom.grid.size();
  std::vector<double> target(n);
  for (std::size_t i = 0; i < n; ++i) target[i] = ebdt * state.phi[i];
  std::vector<double> x = state.phi.values;
  const bool semi = (config.scheme == FlowScheme::semi_implicit);
  if (!implicit_solve(op, target, dtt, x, config.newton_tol, config.newton_max_iter, semi)) {
    throw FlowError("flow_step: Newton did not converge", state.t, dt / 2.0);
  }
  std::vector<double> u = op.density(x);
  for (double v : u)
    if (v <= 0.0) throw FlowError("flow_step: Kahler cone violated", state.t, dt / 2.0);
  std::vector<double> pd = op.phidot(x, u);

  FlowState out;
  out.t = state.t + dt;
  out.beta = beta;
  out.eps = geom.eps;
  out.reference = config.reference;
  out.phi = RadialField{std::move(x), FieldKind::potential};
  out.phi_dot = RadialField{std::move(pd), FieldKind::potential};
  out.density = RadialField{std::move(u), FieldKind::density};
  return out;
}

Trajectory run_flow(const ConeGeometry& geom, const FlowConfig& config, const RadialField& phi0,
                    double delta_tube) {
  config.validate();
  phi0.validate();
  if (phi0.size() != geom.grid.size()) throw std::invalid_argument("run_flow: grid mismatch");

  FlowOperator op = FlowOperator::make(geom, config.reference);
  Trajectory traj;
  traj.beta = geom.beta;
  traj.eps = geom.eps;
  traj.reference = config.reference;
  traj.dt = config.dt;

  FlowState st;
  st.t = 0.0;
  st.beta = geom.beta;
  st.eps = geom.eps;
  st.reference = config.reference;
  st.phi = phi0;
  {
    std::vector<double> u = op.density(phi0.values);
    for (double v : u)
      if (v <= 0.0) throw FlowError("run_flow: initial density not positive", 0.0);
    std::vector<double> pd = op.phidot(phi0.values, u);
    st.phi_dot = RadialField{std::move(pd), FieldKind::potential};
    st.density = RadialField{std::move(u), FieldKind::density};
  }
  const double sup0 = st.phi_dot.sup_abs();
  traj.steps.push_back(diagnostics(op, 0.0, st.phi.values, st.density.values, st.phi_dot.values,
                                   delta_tube, {}, 0.0));
  traj.snapshots.push_back(st);

  FlowConfig step_cfg = config;
  std::size_t accepted = 0;
  while (st.t < config.T - 1e-12) {
    step_cfg.dt = std::min(step_cfg.dt, config.T - st.t);
    FlowState next;
    for (;;) {
      try {
        next = flow_step(st, geom, step_cfg);
        break;
      } catch (const FlowError&) {
        if (step_cfg.dt / 2.0 < config.dt_floor)
          throw FlowError("run_flow: step failed at dt floor, t = " + std::to_string(st.t),
                          st.t, step_cfg.dt / 2.0);
        step_cfg.dt /= 2.0;
      }
    }
    // maximum-principle monitor
    const double sup_now = next.phi_dot.sup_abs();
    const double allowed = std::exp(geom.beta * next.t) * sup0 + config.mp_tol;
    if (sup_now > allowed)
      throw MaximumPrincipleError("run_flow: sup|phi_dot| exceeded its envelope", next.t,
                                  sup_now, allowed);
    traj.steps.push_back(diagnostics(op, next.t, next.phi.values, next.density.values,
                                     next.phi_dot.values, delta_tube, st.density.values,
                                     step_cfg.dt));
    ++accepted;
    const bool last = (next.t >= config.T - 1e-12);
    if (last || (accepted % config.snapshot_stride == 0)) traj.snapshots.push_back(next);
    st = std::move(next);
  }
  return traj;
}

TwistedPotential twisted_potential(const Trajectory& traj, const ConeGeometry& geom) {
  TwistedPotential tp;
  const auto& snaps = traj.snapshots;
  for (const FlowState& s : snaps) {
    tp.times.push_back(s.t);
    RadialField v = s.phi_dot;
    const double f = std::exp(-geom.beta * s.t);
    for (double& x : v.values) x *= f;
    tp.v.push_back(std::move(v));
  }
  for (std::size_t k = 0; k + 1 < snaps.size(); ++k) {
    const double dt = snaps[k + 1].t - snaps[k].t;
    std::vector<double> dd = geom.grid.ddbar_rel(tp.v[k + 1].values);
    double rmax = 0.0;
    for (std::size_t i = 0; i < dd.size(); ++i) {
      const double lap = dd[i] / snaps[k + 1].density[i];
      rmax = std::max(rmax, std::fabs((tp.v[k + 1][i] - tp.v[k][i]) / dt - lap));
    }
    tp.residual_sup.push_back(rmax);
  }
  return tp;
}

RadialField restart_datum(const FlowState& state, const ConeGeometry& geom, double tol) {
  const std::size_t n = geom.grid.size();
  RadialField h = geom.compute_h();
  std::vector<double> from_flow(n), from_density(n);
  // phi in the formula is the omega_0-relative potential; an omega_eps-relative
  // state differs from it by Psi_{eps,beta}/N.
  const auto& psi = geom.psi_beta();
  const bool shifted = (state.reference == FlowReference::omega_eps);
  for (std::size_t i = 0; i < n; ++i) {
    const double phi0_rel = state.phi[i] + (shifted ? psi[i] / geom.N : 0.0);
    from_flow[i] = -h[i] + state.phi_dot[i] - geom.beta * phi0_rel;
  }
  double dis = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    from_density[i] = std::log(state.density[i]) +
                      (1.0 - geom.beta) * std::log(geom.section_sq(i) + geom.eps);
    dis = std::max(dis, std::fabs(from_density[i] - from_flow[i]));
  }
  if (dis > tol)
    throw std::runtime_error("restart_datum: flow and density routes disagree by " +
                             std::to_string(dis));
  return RadialField{std::move(from_density), FieldKind::log_density};
}

RadialField solve_stationary(const ConeGeometry& geom, const RadialField& phi_seed, double tol,
                             int max_iter) {
  FlowOperator op = FlowOperator::make(geom, FlowReference::omega_0);
  const auto& grid = geom.grid;
  const std::size_t n = grid.size();
  const auto& em = grid.edge_mid();
  const auto& ew = grid.edge_width();
  std::vector<double> c(n - 1);
  for (std::size_t e = 0; e + 1 < n; ++e) c[e] = em[e] * (1.0 - em[e]) / ew[e];

  std::vector<double> x = phi_seed.values;
  Tridiagonal J;
  J.lower.assign(n, 0.0);
  J.diag.assign(n, 0.0);
  J.upper.assign(n, 0.0);
  std::vector<double> R(n);
  for (int it = 0; it < max_iter; ++it) {
    std::vector<double> u = op.density(x);
    for (double v : u)
      if (v <= 0.0) throw std::runtime_error("solve_stationary: left the Kahler cone");
    double rmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      R[i] = std::log(u[i]) + geom.beta * x[i] + op.H[i];
      rmax = std::max(rmax, std::fabs(R[i]));
    }
    if (rmax < tol) return RadialField{std::move(x), FieldKind::potential};
    // J = diag(1/u) DDbar + beta I
    for (std::size_t i = 0; i < n; ++i) {
      const double fac = 1.0 / (u[i] * 2.0 * grid.weight(i));
      double left = (i > 0) ? c[i - 1] : 0.0;
      double right = (i + 1 < n) ? c[i] : 0.0;
      J.diag[i] = geom.beta - fac * (left + right);
      if (i > 0) J.lower[i] = fac * left;
      if (i + 1 < n) J.upper[i] = fac * right;
    }
    std::vector<double> dx = J.solve(R);
    double lam = 1.0;
    for (int bt = 0; bt < 40; ++bt) {
      std::vector<double> xt(n);
      for (std::size_t i = 0; i < n; ++i) xt[i] = x[i] - lam * dx[i];
      std::vector<double> ut = op.density(xt);
      double mn = 1e300;
      for (double v : ut) mn = std::min(mn, v);
      if (mn > 0.0) {
        x = std::move(xt);
        break;
      }
      lam *= 0.5;
    }
  }
  throw std::runtime_error("solve_stationary: Newton did not converge");
}

}  // namespace coneflow

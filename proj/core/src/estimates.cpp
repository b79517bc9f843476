#include "coneflow/estimates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace coneflow {

TraceMonitors trace_monitors(const FlowState& state, const ConeGeometry& geom) {
  const std::size_t n = geom.grid.size();
  if (state.density.size() != n) throw std::invalid_argument("trace_monitors: grid mismatch");
  TraceMonitors m;
  m.trace = RadialField{std::vector<double>(n), FieldKind::density};
  m.inv_trace = RadialField{std::vector<double>(n), FieldKind::density};
  const auto& ue = geom.u_eps();
  for (std::size_t i = 0; i < n; ++i) {
    const double up = state.density[i];
    if (up <= 0.0 || ue[i] <= 0.0) throw std::domain_error("trace_monitors: nonpositive density");
    m.trace[i] = up / ue[i];
    m.inv_trace[i] = ue[i] / up;
  }
  m.det = m.trace;  // n = 1: determinant equals the single eigenvalue
  return m;
}

bool eigenvalue_inequality(std::span<const double> lambdas) {
  const std::size_t n = lambdas.size();
  if (n < 2 || n > 16) throw std::domain_error("eigenvalue_inequality: need 2 <= n <= 16");
  double inv_sum = 0.0, sum = 0.0, prod = 1.0;
  for (double l : lambdas) {
    if (!(l > 0.0)) throw std::domain_error("eigenvalue_inequality: lambdas must be positive");
    inv_sum += 1.0 / l;
    sum += l;
    prod *= l;
  }
  const double lhs = std::pow(inv_sum, double(n - 1));
  const double rhs = sum / prod;
  const double slack = 4.0 * std::numeric_limits<double>::epsilon() * std::max(lhs, rhs);
  return lhs >= rhs - slack;
}

SiuQuantity siu_quantity(const FlowState& state, const ConeGeometry& geom, double A, double B) {
  if (!(A >= 0.0) || !(B >= 0.0)) throw std::domain_error("siu_quantity: A, B must be >= 0");
  const std::size_t n = geom.grid.size();
  const auto& ue = geom.u_eps();
  SiuQuantity out;
  out.field = RadialField{std::vector<double>(n), FieldKind::potential};
  double best = -1e300;
  for (std::size_t i = 0; i < n; ++i) {
    const double tr = state.density[i] / ue[i];
    const double psi = geom.barrier_psi(geom.rho_exp, i);
    const double val = std::log(tr) + B * psi - A * state.phi[i];
    out.field[i] = val;
    if (val > best) {
      best = val;
      out.argmax = i;
    }
  }
  out.max_value = best;
  out.inv_trace_at_argmax = ue[out.argmax] / state.density[out.argmax];
  return out;
}

RadialField scalar_curvature(const FlowState& state, const ConeGeometry& geom) {
  const std::size_t n = geom.grid.size();
  std::vector<double> logu(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (state.density[i] <= 0.0) throw std::domain_error("scalar_curvature: nonpositive density");
    logu[i] = std::log(state.density[i]);
  }
  std::vector<double> dd = geom.grid.ddbar_rel(logu);
  std::vector<double> R(n);
  for (std::size_t i = 0; i < n; ++i) R[i] = (1.0 - dd[i]) / state.density[i];
  return RadialField{std::move(R), FieldKind::potential};
}

namespace {

// int dsigma / sqrt(sigma (1-sigma)) over [a,b], exactly.
double round_arc(double a, double b) { return std::asin(2.0 * b - 1.0) - std::asin(2.0 * a - 1.0); }

}  // namespace

DistanceTable::DistanceTable(const RadialGrid& grid, std::span<const double> u) {
  const std::size_t n = grid.size();
  if (u.size() != n) throw std::invalid_argument("DistanceTable: size mismatch");
  cum_.assign(n, 0.0);
  for (std::size_t e = 0; e + 1 < n; ++e) {
    const double um = 0.5 * (u[e] + u[e + 1]);
    cum_[e + 1] = cum_[e] + std::sqrt(um) * round_arc(grid.node(e), grid.node(e + 1));
  }
}

DistanceTable DistanceTable::donaldson(const ConeGeometry& geom) {
  // dL = sqrt(2 g_D) dr = sqrt(u_D) dsigma/sqrt(sigma(1-sigma)); near the poles
  // u_D ~ c (sigma(1-sigma))^(beta-1), so the end-cell integrand behaves like
  // sigma^(beta/2 - 1): substitute sigma = h v^(2/beta) to flatten it.
  const auto& grid = geom.grid;
  const std::size_t n = grid.size();
  const auto& uD = geom.u_donaldson();
  DistanceTable t;
  t.cum_.assign(n, 0.0);
  static const double gx[8] = {-0.96028986, -0.79666648, -0.52553241, -0.18343464,
                               0.18343464,  0.52553241,  0.79666648,  0.96028986};
  static const double gw[8] = {0.10122854, 0.22238103, 0.31370665, 0.36268378,
                               0.36268378, 0.31370665, 0.22238103, 0.10122854};
  const double beta = geom.beta;
  auto integrand = [&](double s, double u_of_s) {
    return std::sqrt(u_of_s) / std::sqrt(s * (1.0 - s));
  };
  // analytic relative density of omega_D off the poles, for in-cell quadrature
  auto uD_analytic = [&](double s) {
    const double q = geom.s_norm * s * (1.0 - s);
    const double dd = std::pow(geom.s_norm, beta) * beta *
                      std::pow(s * (1.0 - s), beta - 1.0) * (1.0 - s) * (1.0 - s) *
                      (beta * (1.0 - 2.0 * s) * (1.0 - 2.0 * s) - 2.0 * s * (1.0 - s));
    (void)q;
    return 1.0 + geom.delta * dd / (2.0 * (1.0 - s) * (1.0 - s));
  };
  for (std::size_t e = 0; e + 1 < n; ++e) {
    const double a = grid.node(e), b = grid.node(e + 1);
    double seg = 0.0;
    if (e == 0 || e + 2 == n) {
      // graded substitution sigma = h v^(2/beta) (mirrored at the far pole)
      const double h = (e == 0) ? b : (1.0 - a);
      for (int k = 0; k < 8; ++k) {
        const double v = 0.5 * (gx[k] + 1.0);
        const double s = h * std::pow(v, 2.0 / beta);
        const double sm = (e == 0) ? s : 1.0 - s;
        const double ds = h * (2.0 / beta) * std::pow(v, 2.0 / beta - 1.0);
        if (s <= 0.0) continue;
        seg += 0.5 * gw[k] * integrand(sm, uD_analytic(sm)) * ds;
      }
    } else {
      for (int k = 0; k < 8; ++k) {
        const double s = 0.5 * (a + b) + 0.5 * (b - a) * gx[k];
        seg += 0.5 * (b - a) * gw[k] * integrand(s, uD_analytic(s));
      }
    }
    (void)uD;
    t.cum_[e + 1] = t.cum_[e] + seg;
  }
  return t;
}

double DistanceTable::between(std::size_t i, std::size_t j) const {
  return std::fabs(cum_[j] - cum_[i]);
}

namespace {

std::vector<std::size_t> decimated_indices(std::size_t n, std::size_t stride) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < n; i += stride) idx.push_back(i);
  if (idx.back() != n - 1) idx.push_back(n - 1);
  return idx;
}

}  // namespace

double holder_seminorm(std::span<const double> field, const DistanceTable& dist, double alpha) {
  if (!(alpha > 0.0) || alpha >= 1.0) throw std::domain_error("holder_seminorm: alpha in (0,1)");
  const std::size_t n = field.size();
  if (dist.cumulative().size() != n) throw std::invalid_argument("holder_seminorm: size mismatch");
  double best = 0.0;
  const auto idx = decimated_indices(n, 4);
  for (std::size_t p = 0; p < idx.size(); ++p)
    for (std::size_t q = p + 1; q < idx.size(); ++q) {
      const double d = dist.between(idx[p], idx[q]);
      if (d <= 0.0) continue;
      best = std::max(best, std::fabs(field[idx[p]] - field[idx[q]]) / std::pow(d, alpha));
    }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double d = dist.between(i, i + 1);
    if (d <= 0.0) continue;
    best = std::max(best, std::fabs(field[i] - field[i + 1]) / std::pow(d, alpha));
  }
  return best;
}

double parabolic_holder_seminorm(const std::vector<std::vector<double>>& slabs,
                                 std::span<const double> times, const DistanceTable& dist,
                                 double alpha) {
  if (slabs.empty()) throw std::invalid_argument("parabolic_holder_seminorm: empty slab");
  if (slabs.size() != times.size())
    throw std::invalid_argument("parabolic_holder_seminorm: time mismatch");
  const std::size_t n = slabs[0].size();
  const auto sp = decimated_indices(n, 4);
  // decimate times to at most 17 slices
  const std::size_t tstride = std::max<std::size_t>(1, (times.size() + 16) / 17);
  std::vector<std::size_t> tp;
  for (std::size_t k = 0; k < times.size(); k += tstride) tp.push_back(k);
  if (tp.back() != times.size() - 1) tp.push_back(times.size() - 1);

  double best = 0.0;
  for (std::size_t ta = 0; ta < tp.size(); ++ta)
    for (std::size_t tb = ta; tb < tp.size(); ++tb) {
      const double dt = std::sqrt(std::fabs(times[tp[tb]] - times[tp[ta]]));
      const auto& fa = slabs[tp[ta]];
      const auto& fb = slabs[tp[tb]];
      for (std::size_t p = 0; p < sp.size(); ++p)
        for (std::size_t q = (ta == tb ? p + 1 : 0); q < sp.size(); ++q) {
          const double d = std::max(dist.between(sp[p], sp[q]), dt);
          if (d <= 0.0) continue;
          best = std::max(best, std::fabs(fa[sp[p]] - fb[sp[q]]) / std::pow(d, alpha));
        }
    }
  return best;
}

double poincare_constant_of_density(const RadialGrid& grid, std::span<const double> u, double tol,
                                    int max_iter) {
  const std::size_t n = grid.size();
  if (u.size() != n) throw std::invalid_argument("poincare_constant: size mismatch");
  // stiffness A (Riemannian Dirichlet form, conformally invariant):
  // E(x) = 4 pi sum_e m(1-m) (dx/dsigma)^2 dsigma; mass M_i = 4 pi u_i w_i.
  const auto& em = grid.edge_mid();
  const auto& ew = grid.edge_width();
  std::vector<double> c(n - 1), mass(n);
  for (std::size_t e = 0; e + 1 < n; ++e) c[e] = em[e] * (1.0 - em[e]) / ew[e];
  double msum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mass[i] = u[i] * grid.weight(i);
    msum += mass[i];
  }
  // power iteration on (A + M)^{-1} M, deflating the constant mode
  Tridiagonal T;
  T.lower.assign(n, 0.0);
  T.diag.assign(n, 0.0);
  T.upper.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double left = (i > 0) ? c[i - 1] : 0.0;
    double right = (i + 1 < n) ? c[i] : 0.0;
    T.diag[i] = left + right + mass[i];
    if (i > 0) T.lower[i] = -left;
    if (i + 1 < n) T.upper[i] = -right;
  }
  auto deflate = [&](std::vector<double>& x) {
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += x[i] * mass[i];
    dot /= msum;
    for (double& v : x) v -= dot;
  };
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = 1.0 - 2.0 * grid.node(i);  // deterministic seed
  deflate(x);
  double mu_prev = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    std::vector<double> rhs(n);
    for (std::size_t i = 0; i < n; ++i) rhs[i] = mass[i] * x[i];
    std::vector<double> y = T.solve(rhs);
    deflate(y);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      num += y[i] * mass[i] * x[i];
      den += y[i] * mass[i] * y[i];
    }
    const double mu = num / den;  // converges to lambda_1 + 1
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += y[i] * mass[i] * y[i];
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / norm;
    if (it > 2 && std::fabs(mu - mu_prev) < tol * std::fabs(mu)) {
      const double lam = mu - 1.0;
      if (!(lam > 0.0)) throw std::runtime_error("poincare_constant: nonpositive eigenvalue");
      return 1.0 / std::sqrt(lam);
    }
    mu_prev = mu;
  }
  throw std::runtime_error("poincare_constant: eigen-solver did not converge");
}

double poincare_constant(const ConeGeometry& geom, double tol, int max_iter) {
  return poincare_constant_of_density(geom.grid, geom.u_eps(), tol, max_iter);
}

JeffresLedger jeffres_compare(const Trajectory& traj1, const Trajectory& traj2, double a, double p,
                              const ConeGeometry& geom) {
  if (!(a > 0.0)) throw std::invalid_argument("jeffres_compare: a must be positive");
  if (!(p > 0.0) || !(p < geom.beta)) throw std::invalid_argument("jeffres_compare: bad p");
  const auto& s1 = traj1.snapshots;
  const auto& s2 = traj2.snapshots;
  if (s1.size() != s2.size()) throw std::invalid_argument("jeffres_compare: horizon mismatch");
  const std::size_t n = geom.grid.size();
  for (std::size_t k = 0; k < s1.size(); ++k) {
    if (s1[k].phi.size() != n || s2[k].phi.size() != n)
      throw std::invalid_argument("jeffres_compare: grid mismatch");
    if (std::fabs(s1[k].t - s2[k].t) > 1e-12)
      throw std::invalid_argument("jeffres_compare: time grids differ");
  }

  std::vector<double> qp(n);
  for (std::size_t i = 0; i < n; ++i) qp[i] = std::pow(geom.section_sq(i), p);

  // measured C: Laplacian lower bound of |S|^(2p) under the b-averaged metric,
  // then the Gronwall constant (C0 + beta)/beta it induces.
  double C0 = 0.0;
  std::vector<double> ddqp = geom.grid.ddbar_rel(qp);
  for (std::size_t k = 0; k < s1.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const double g1 = s1[k].density[i], g2 = s2[k].density[i];
      const double inv_avg =
          (std::fabs(g1 - g2) < 1e-14) ? 1.0 / g1 : (std::log(g1) - std::log(g2)) / (g1 - g2);
      C0 = std::max(C0, -ddqp[i] * inv_avg);
    }
  }
  JeffresLedger out;
  out.measured_C = (C0 + geom.beta) / geom.beta;

  double min_margin = 1e300;
  for (double aa : {a, a / 2.0, a / 4.0}) {
    double sup0 = -1e300;
    for (std::size_t i = 0; i < n; ++i)
      sup0 = std::max(sup0, s1[0].phi[i] + aa * qp[i] - s2[0].phi[i]);
    double worst = 1e300;
    for (std::size_t k = 0; k < s1.size(); ++k) {
      double supv = -1e300;
      for (std::size_t i = 0; i < n; ++i)
        supv = std::max(supv, s1[k].phi[i] + aa * qp[i] - s2[k].phi[i]);
      const double env = (sup0 + aa * out.measured_C) * std::exp(geom.beta * s1[k].t) + 1e-9;
      worst = std::min(worst, env - supv);
    }
    min_margin = std::min(min_margin, worst);
    out.a_values.push_back(aa);
    out.min_margin.push_back(worst);
    double supd = -1e300;
    const std::size_t last = s1.size() - 1;
    for (std::size_t i = 0; i < n; ++i)
      supd = std::max(supd, s1[last].phi[i] - s2[last].phi[i]);
    out.sup_final.push_back(supd);
  }
  out.envelope_ok = (min_margin >= 0.0);
  // linear fit in a of sup(phi1 + a q^p - phi2) at T, extrapolated to a = 0
  const std::size_t last = s1.size() - 1;
  std::vector<double> sup_pert;
  for (double aa : out.a_values) {
    double sp = -1e300;
    for (std::size_t i = 0; i < n; ++i)
      sp = std::max(sp, s1[last].phi[i] + aa * qp[i] - s2[last].phi[i]);
    sup_pert.push_back(sp);
  }
  // least-squares line through (a, sup_pert)
  double sa = 0.0, sv = 0.0, saa = 0.0, sav = 0.0;
  const double m = double(sup_pert.size());
  for (std::size_t k = 0; k < sup_pert.size(); ++k) {
    sa += out.a_values[k];
    sv += sup_pert[k];
    saa += out.a_values[k] * out.a_values[k];
    sav += out.a_values[k] * sup_pert[k];
  }
  const double slope = (m * sav - sa * sv) / (m * saa - sa * sa);
  out.extrapolated_zero = (sv - slope * sa) / m;
  return out;
}

WeakFlowCertificate weak_flow_certificate(const Trajectory& traj, const ConeGeometry& geom,
                                          double delta, double alpha) {
  if (!(delta > 0.0) || delta >= 0.5)
    throw std::invalid_argument("weak_flow_certificate: delta in (0, 0.5)");
  WeakFlowCertificate cert;
  const auto& grid = geom.grid;
  const std::size_t n = grid.size();

  // bullet 1: parabolic Holder bound of phi over M x [0,T]
  DistanceTable dD = DistanceTable::donaldson(geom);
  std::vector<std::vector<double>> slabs;
  std::vector<double> times;
  for (const auto& s : traj.snapshots) {
    slabs.push_back(s.phi.values);
    times.push_back(s.t);
  }
  cert.holder_constant = parabolic_holder_seminorm(slabs, times, dD, alpha);
  cert.holder_bounded = std::isfinite(cert.holder_constant);

  // bullets 2 and 3: sup bounds and the lower metric bound off the tube
  const auto& uD = geom.u_donaldson();
  double sup_pd = 0.0, tr_sum = 0.0, low = 1e300;
  bool positive = true;
  for (const auto& s : traj.snapshots) {
    sup_pd = std::max(sup_pd, s.phi_dot.sup_abs());
    for (std::size_t i = 0; i < n; ++i) {
      const double sig = grid.node(i);
      if (sig < delta || sig > 1.0 - delta) continue;
      const double up = s.density[i];
      if (up <= 0.0) {
        positive = false;
        continue;
      }
      tr_sum = std::max(tr_sum, up / uD[i] + uD[i] / up);
      low = std::min(low, up / uD[i]);
    }
  }
  cert.sup_phidot = sup_pd;
  cert.trace_sum_sup = tr_sum;
  cert.sup_bounds = positive && std::isfinite(tr_sum);
  cert.lower_bound_constant = low;
  cert.lower_metric_bound = positive && low > 0.0;
  return cert;
}

}  // namespace coneflow

#include "coneflow/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace coneflow {

namespace {

// ((eps+x)^beta - eps^beta)/x, evaluated without cancellation via expm1/log1p.
double chi_integrand(double beta, double eps, double x) {
  if (x <= 0.0) return beta * std::pow(eps, beta - 1.0);
  return std::pow(eps, beta) * std::expm1(beta * std::log1p(x / eps)) / x;
}

// Gauss-Kronrod 7/15 on [a,b]; returns the K15 value, sets an error estimate.
double gk15(double beta, double eps, double a, double b, double& err) {
  static const double xk[8] = {
      0.0, 0.207784955007898, 0.405845151377397, 0.586087235467691,
      0.741531185599394, 0.864864423359769, 0.949107912342759, 0.991455371120813};
  static const double wk[8] = {
      0.209482141084728, 0.204432940075298, 0.190350578064785, 0.169004726639267,
      0.140653259715525, 0.104790010322250, 0.063092092629979, 0.022935322010529};
  static const double wg[4] = {
      0.417959183673469, 0.381830050505119, 0.279705391489277, 0.129484966168870};
  const double mid = 0.5 * (a + b);
  const double hl = 0.5 * (b - a);
  double f0 = chi_integrand(beta, eps, mid);
  double k15 = wk[0] * f0;
  double g7 = wg[0] * f0;
  for (int i = 1; i < 8; ++i) {
    const double dx = hl * xk[i];
    const double fs = chi_integrand(beta, eps, mid + dx) + chi_integrand(beta, eps, mid - dx);
    k15 += wk[i] * fs;
    if (i % 2 == 0) g7 += wg[i / 2] * fs;
  }
  k15 *= hl;
  g7 *= hl;
  err = std::fabs(k15 - g7);
  return k15;
}

double adaptive_chi_integral(double beta, double eps, double a, double b, double tol) {
  struct Seg { double a, b; };
  std::vector<Seg> stack{{a, b}};
  double total = 0.0;
  int evals = 0;
  while (!stack.empty()) {
    const Seg s = stack.back();
    stack.pop_back();
    double err = 0.0;
    const double v = gk15(beta, eps, s.a, s.b, err);
    if (err < tol * std::max(1.0, std::fabs(v)) || (s.b - s.a) < 1e-300 || ++evals > 4000) {
      total += v;
    } else {
      const double m = 0.5 * (s.a + s.b);
      stack.push_back({s.a, m});
      stack.push_back({m, s.b});
    }
  }
  return total;
}

}  // namespace

double chi_profile(double beta, double eps, double y) {
  if (!(beta > 0.0) || beta > 1.0) throw std::domain_error("chi_profile: beta must lie in (0,1]");
  if (y < 0.0) throw std::domain_error("chi_profile: y must be nonnegative");
  if (eps < 0.0) throw std::domain_error("chi_profile: eps must be nonnegative");
  if (y == 0.0) return 0.0;
  if (beta == 1.0) return y;                 // integrand is identically 1
  if (eps == 0.0) return std::pow(y, beta);  // beta int_0^y x^(beta-1) dx
  // Two-term head on [0, x0] with the exact x -> 0 limit of the integrand,
  // x0 << eps; the adaptive quadrature covers the rest.
  const double x0 = std::min(y, 1e-8 * eps);
  const double head = x0 * 0.5 * (chi_integrand(beta, eps, 0.0) + chi_integrand(beta, eps, x0));
  const double tail = (y > x0) ? adaptive_chi_integral(beta, eps, x0, y, 1e-12) : 0.0;
  return beta * (head + tail);
}

double regularized_cone_density(double beta, double eps, double y) {
  if (!(beta > 0.0) || beta > 1.0)
    throw std::domain_error("regularized_cone_density: beta must lie in (0,1]");
  if (y < 0.0) throw std::domain_error("regularized_cone_density: y must be nonnegative");
  if (eps < 0.0) throw std::domain_error("regularized_cone_density: eps must be nonnegative");
  if (eps == 0.0 && y == 0.0)
    throw std::domain_error("regularized_cone_density: singular at y = 0 when eps = 0");
  return beta * beta * std::pow(eps + y, beta - 1.0);
}

ConeGeometry::ConeGeometry(double beta_, double eps_, RadialGrid grid_,
                           std::optional<double> N_, std::optional<double> delta_,
                           double rho_exp_)
    : beta(beta_), eps(eps_), rho_exp(rho_exp_), grid(std::move(grid_)) {
  if (!(beta > 0.0) || beta > 1.0) throw std::invalid_argument("ConeGeometry: beta in (0,1]");
  if (eps < 0.0 || eps > 1.0) throw std::invalid_argument("ConeGeometry: eps in [0,1]");
  if (!(rho_exp > 0.0) || rho_exp >= beta)
    throw std::invalid_argument("ConeGeometry: rho_exp in (0, beta)");
  N = N_ ? *N_ : select_barrier_scale(beta, eps, grid, s_norm);
  if (N <= 0.0) throw std::invalid_argument("ConeGeometry: N must be positive");
  delta = delta_ ? *delta_ : 1.0 / N;  // default: omega_D is the eps -> 0 limit of omega_eps
  if (delta <= 0.0) throw std::invalid_argument("ConeGeometry: delta must be positive");

  const std::size_t n = grid.size();
  psi_beta_.resize(n);
  std::vector<double> qb(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double q = section_sq(i);
    psi_beta_[i] = chi_profile(beta, eps, q);
    qb[i] = std::pow(q, beta);
  }
  std::vector<double> dd = grid.ddbar_rel(psi_beta_);
  u_eps_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    u_eps_[i] = 1.0 + dd[i] / N;
    if (u_eps_[i] <= 0.0)
      throw std::invalid_argument("ConeGeometry: N too small, omega_eps density <= 0 at node " +
                                  std::to_string(i));
  }
  std::vector<double> ddq = grid.ddbar_rel(qb);
  u_D_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    u_D_[i] = 1.0 + delta * ddq[i];
    if (u_D_[i] <= 0.0)
      throw std::runtime_error("ConeGeometry: delta too large, omega_D density <= 0 at node " +
                               std::to_string(i));
  }
}

std::vector<double> ConeGeometry::section_sq_field() const {
  std::vector<double> q(grid.size());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = section_sq(i);
  return q;
}

double ConeGeometry::select_barrier_scale(double beta, double eps, const RadialGrid& grid,
                                          double s_norm) {
  const std::size_t n = grid.size();
  std::vector<double> psi(n);
  for (std::size_t i = 0; i < n; ++i)
    psi[i] = chi_profile(beta, eps, s_norm * grid.node(i) * (1.0 - grid.node(i)));
  std::vector<double> dd = grid.ddbar_rel(psi);
  double N = 10.0;
  for (int tries = 0; tries < 60; ++tries) {
    double umin = 1e300;
    for (std::size_t i = 0; i < n; ++i) umin = std::min(umin, 1.0 + dd[i] / N);
    if (umin >= 0.1) return N;  // positive with 10% margin
    N *= 2.0;
  }
  throw std::runtime_error("select_barrier_scale: no admissible N found");
}

RadialField ConeGeometry::omega_eps_density() const {
  RadialField f{u_eps_, FieldKind::density};
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f[i] <= 0.0)
      throw std::runtime_error("omega_eps_density: N too small at node " + std::to_string(i));
  return f;
}

double ConeGeometry::barrier_psi(double rho, std::size_t node) const {
  if (!(rho > 0.0) || rho >= beta) throw std::domain_error("barrier_psi: rho in (0, beta)");
  return chi_profile(rho, eps, section_sq(node));
}

std::vector<double> ConeGeometry::barrier_psi_field(double rho) const {
  if (!(rho > 0.0) || rho >= beta) throw std::domain_error("barrier_psi: rho in (0, beta)");
  std::vector<double> f(grid.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = chi_profile(rho, eps, section_sq(i));
  return f;
}

RadialField ConeGeometry::donaldson_density() const {
  RadialField f{u_D_, FieldKind::density};
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f[i] <= 0.0) throw std::runtime_error("donaldson_density: delta too large");
  return f;
}

RadialField ConeGeometry::compute_h() const {
  // Ric(omega_0) = omega_0 and Theta = omega_0, so the source
  // (Ric(omega_0) - beta omega_0 - (1-beta) Theta)/omega_0 = 1 - beta - (1-beta) = 0.
  const std::size_t n = grid.size();
  std::vector<double> source(n, 1.0 - beta - (1.0 - beta));
  double defect = 0.0;
  for (std::size_t i = 0; i < n; ++i) defect += source[i] * grid.weight(i);
  if (std::fabs(defect) > 1e-10)
    throw std::runtime_error("compute_h: source is not mean-free, no solution");
  double res = 0.0;
  std::vector<double> h = grid.solve_ddbar(source, &res);
  if (res > 1e-8) throw std::runtime_error("compute_h: solver residual too large");
  double mean = grid.integrate_background(h);
  for (double& v : h) v -= mean;
  return RadialField{std::move(h), FieldKind::potential};
}

RadialField trace_ratio(const RadialField& a, const RadialField& b) {
  if (a.size() != b.size()) throw std::invalid_argument("trace_ratio: size mismatch");
  RadialField out{std::vector<double>(a.size()), FieldKind::density};
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] <= 0.0 || b[i] <= 0.0)
      throw std::domain_error("trace_ratio: nonpositive density");
    out[i] = b[i] / a[i];
  }
  return out;
}

}  // namespace coneflow

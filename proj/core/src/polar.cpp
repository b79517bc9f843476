#include "coneflow/polar.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace coneflow {

namespace {

void fill_derived(PolarChart& chart) {
  const std::size_t n = chart.rho_nodes.size();
  chart.a_vals.resize(n);
  chart.u_vals.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double rho = chart.rho_nodes[i];
    const double s = chart.s_vals[i];
    const double v = std::pow(rho * rho + chart.eps, 0.5 * (1.0 - chart.beta)) * s;
    const double u = v / rho;
    chart.u_vals[i] = u;
    chart.a_vals[i] = (chart.beta / u) * (chart.beta / u);
  }
}

}  // namespace

PolarChart integrate_polar(double beta, double eps, double rho_max, double step) {
  if (!(beta > 0.0) || beta > 1.0) throw std::domain_error("integrate_polar: beta in (0,1]");
  if (eps < 0.0) throw std::domain_error("integrate_polar: eps must be nonnegative");
  if (step <= 0.0) throw std::domain_error("integrate_polar: step must be positive");
  if (rho_max <= 0.0) throw std::domain_error("integrate_polar: rho_max must be positive");

  PolarChart chart;
  chart.beta = beta;
  chart.eps = eps;
  const std::size_t n = std::max<std::size_t>(2, std::llround(std::ceil(rho_max / step)));

  if (beta == 1.0 || eps == 0.0) {
    // closed forms: s = rho (beta = 1), s = rho^beta (eps = 0)
    chart.rho_nodes.resize(n);
    chart.s_vals.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double rho = rho_max * double(i + 1) / double(n);
      chart.rho_nodes[i] = rho;
      chart.s_vals[i] = (beta == 1.0) ? rho : std::pow(rho, beta);
    }
    fill_derived(chart);
    return chart;
  }

  // ds/dw = beta eps^(beta/2) cosh(w)^beta along rho = sqrt(eps) sinh(w).
  const double sq = std::sqrt(eps);
  const double w_max = std::asinh(rho_max / sq);
  const double dw = w_max / double(n);
  const double amp = beta * std::pow(eps, 0.5 * beta);
  auto f = [&](double w) { return amp * std::pow(std::cosh(w), beta); };

  chart.rho_nodes.resize(n);
  chart.s_vals.resize(n);
  double s = 0.0, w = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double k1 = f(w);
    const double k2 = f(w + 0.5 * dw);
    const double k4 = f(w + dw);
    s += dw * (k1 + 4.0 * k2 + k4) / 6.0;  // RK4 on a quadrature = Simpson
    w += dw;
    chart.rho_nodes[i] = sq * std::sinh(w);
    chart.s_vals[i] = s;
  }
  // land exactly on rho_max
  chart.rho_nodes[n - 1] = rho_max;
  fill_derived(chart);
  return chart;
}

double coefficient_a(const PolarChart& chart, double rho) {
  const auto& r = chart.rho_nodes;
  if (r.empty()) throw std::out_of_range("coefficient_a: empty chart");
  if (rho < r.front() || rho > r.back())
    throw std::out_of_range("coefficient_a: rho outside chart range");
  auto it = std::lower_bound(r.begin(), r.end(), rho);
  std::size_t hi = std::size_t(it - r.begin());
  double a;
  if (r[hi] == rho) {
    a = chart.a_vals[hi];
  } else {
    const std::size_t lo = hi - 1;
    const double t = (rho - r[lo]) / (r[hi] - r[lo]);
    a = (1.0 - t) * chart.a_vals[lo] + t * chart.a_vals[hi];
  }
  const double b2 = chart.beta * chart.beta;
  if (!(a > b2 - 1e-9 && a <= 1.0 + 1e-9))
    throw std::runtime_error("coefficient_a: two-sided bound violated");
  return a;
}

ComparisonReport comparison_check(const PolarChart& chart) {
  ComparisonReport rep;
  rep.analytic_upper_branch = (chart.beta == 1.0);
  rep.analytic_lower_branch = (chart.eps == 0.0);
  double min1mu = 1e300, minv = 1e300;
  bool u_ok = true, v_ok = true;
  // On the analytic branches the comparison degenerates to equalities:
  // beta = 1 gives u == 1 == a, and eps = 0 gives v == rho, u == 1, a == beta^2.
  const bool equality_branch = rep.analytic_upper_branch || rep.analytic_lower_branch;
  for (std::size_t i = 0; i < chart.rho_nodes.size(); ++i) {
    const double u = chart.u_vals[i];
    const double rho = chart.rho_nodes[i];
    const double v = u * rho;
    min1mu = std::min(min1mu, 1.0 - u);
    minv = std::min(minv, v - chart.beta * rho);
    if (u < chart.beta - 1e-12) u_ok = false;
    if (equality_branch ? (u > 1.0 + 1e-12) : (u >= 1.0)) u_ok = false;
    if (v < chart.beta * rho - 1e-12) v_ok = false;
  }
  rep.u_in_range = u_ok;
  rep.v_lower_bound = v_ok;
  rep.min_margin_one_minus_u = min1mu;
  rep.min_margin_v = minv;
  return rep;
}

PinchingReport quasi_isometry_certificate(const PolarChart& chart, double tol) {
  PinchingReport rep;
  rep.tol = tol;
  double lo = 1e300, hi = -1e300;
  for (double a : chart.a_vals) {
    lo = std::min(lo, std::min(1.0, a));
    hi = std::max(hi, std::max(1.0, a));
  }
  rep.lower = lo;
  rep.upper = hi;
  const double b2 = chart.beta * chart.beta;
  rep.certified = (lo > b2 - tol) && (hi <= 1.0 + tol);
  return rep;
}

void write_polar_csv(const PolarChart& chart, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("write_polar_csv: cannot open " + path);
  std::fprintf(f, "rho,s,a,u\r\n");
  for (std::size_t i = 0; i < chart.rho_nodes.size(); ++i)
    std::fprintf(f, "%.17g,%.17g,%.17g,%.17g\r\n", chart.rho_nodes[i], chart.s_vals[i],
                 chart.a_vals[i], chart.u_vals[i]);
  std::fclose(f);
}

}  // namespace coneflow

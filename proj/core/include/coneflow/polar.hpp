#pragma once

#include <string>
#include <vector>

namespace coneflow {

/// Polar normal form of the regularized cone metric
/// beta^2 (|z|^2 + eps)^(beta-1) dz dzbar = ds^2 + a_eps(s) s^2 dtheta^2
/// near a cone point, where s solves ds/drho = beta (rho^2 + eps)^((beta-1)/2),
/// s(0) = 0, and a_eps = beta^2 rho^2 / ((rho^2+eps)^(1-beta) s^2) = (beta/u)^2
/// with u = (rho^2+eps)^((1-beta)/2) s / rho.
struct PolarChart {
  double beta = 0.0;
  double eps = 0.0;
  std::vector<double> rho_nodes;  // increasing, in (0, rho_max]
  std::vector<double> s_vals;
  std::vector<double> a_vals;
  std::vector<double> u_vals;  // u = v/rho, v = (rho^2+eps)^((1-beta)/2) s
};

/// Integrates the arclength ODE with a classical 4th-order one-step method.
/// For eps > 0 the stepping runs in the stretched variable w = asinh(rho/sqrt(eps)),
/// where the right-hand side beta eps^(beta/2) cosh(w)^beta is smooth with no
/// boundary layer; the number of steps is ceil(rho_max/step), so halving `step`
/// halves the w-step and the global error follows the step^4 model.
/// Analytic branches: beta = 1 (s = rho), eps = 0 (s = rho^beta).
PolarChart integrate_polar(double beta, double eps, double rho_max, double step);

/// Interpolated a_eps at rho, with the two-sided bound asserted.
/// Throws std::out_of_range on extrapolation.
double coefficient_a(const PolarChart& chart, double rho);

struct ComparisonReport {
  bool u_in_range = false;       // beta <= u < 1 at all nodes
  bool v_lower_bound = false;    // beta*rho <= v at all nodes
  double min_margin_one_minus_u = 0.0;
  double min_margin_v = 0.0;     // min of v - beta*rho
  bool analytic_upper_branch = false;  // beta = 1: a == 1 degenerate branch
  bool analytic_lower_branch = false;  // eps = 0: u == beta exactly
};

/// Verifies u in [beta, 1) and beta*rho <= v at all nodes; violations are
/// reported, not thrown.
ComparisonReport comparison_check(const PolarChart& chart);

struct PinchingReport {
  double lower = 0.0;  // measured inf over nodes of min(1, a)
  double upper = 0.0;  // measured sup over nodes of max(1, a)
  bool certified = false;  // beta^2 - tol < lower and upper <= 1 + tol
  double tol = 1e-9;
};

/// Confirms beta^2 omega_E < pullback <= omega_E nodewise and returns the
/// measured pinching constants.
PinchingReport quasi_isometry_certificate(const PolarChart& chart, double tol = 1e-9);

/// Writes the (rho, s, a, u) table as RFC-4180 CSV with a header row.
void write_polar_csv(const PolarChart& chart, const std::string& path);

}  // namespace coneflow

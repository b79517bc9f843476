#pragma once

#include "coneflow/geometry.hpp"
#include "coneflow/grid.hpp"

namespace coneflow {

/// Output of the initial-metric smoothing pipeline.
struct SmoothingResult {
  RadialField F_eps;          // smoothed log-density (log-density kind)
  double a_eps_norm = 0.0;    // normalization constant of the Laplace step
  RadialField phi_hat;        // sup-normalized initial potential
  RadialField u_phi;          // relative density of omega_{phi_hat}
  double quasi_inf = 0.0;     // inf over M \ T_delta(D) of u_phi / u_eps
  double quasi_sup = 0.0;     // sup over M \ T_delta(D) of u_phi / u_eps
  double laplace_residual = 0.0;
  double potential_residual = 0.0;
  double normalization_residual_a = 0.0;    // int (Delta_D F + a) dvol_eps
  double normalization_residual_exp = 0.0;  // int e^F (|S|^2+eps)^(beta-1) dvolbar_0 - 1
};

/// Smooths F by solving Delta_{omega_eps} F_eps = Delta_{omega_D} F + a_eps,
/// with a_eps fixed by int (Delta_D F + a_eps) dvol_eps = 0 and the additive
/// constant of F_eps fixed by int e^{F_eps} (|S|^2+eps)^(beta-1) dvolbar_0 = 1
/// (dvolbar_0 is the unit-mass round measure; this is the mass the potential
/// equation needs to be solvable in the fixed class).
/// Returns (F_eps, a_eps); discrete residual < 1e-8 enforced.
std::pair<RadialField, double> laplace_smooth(const ConeGeometry& geom, const RadialField& F);

/// Solves density(omega_0) (1 + Delta_0 phi) = RHS for the initial potential,
/// where rhs is the relative density e^{F_eps} (|S|^2+eps)^(beta-1).
/// Gauge sup phi = 0. Throws on mass mismatch (class violation) or if the
/// resulting density fails to be positive.
RadialField solve_initial_potential(const ConeGeometry& geom, const RadialField& F_eps);

/// min over nodes of Delta_{omega_eps} F_eps, the measured lower Laplacian bound.
double subharmonicity_check(const ConeGeometry& geom, const RadialField& F_eps);

/// Full pipeline; monitors are measured over M minus the divisor tube
/// {sigma < delta_tube or sigma > 1 - delta_tube}.
SmoothingResult smoothing_pipeline(const ConeGeometry& geom, const RadialField& F,
                                   double delta_tube = 0.05);

/// Log-density of the constant-curvature metric with the two cone points:
/// F(sigma) = log(beta) + (1-beta) log 4 - 2 log(sigma^beta + (1-sigma)^beta).
RadialField ke_log_density(const RadialGrid& grid, double beta);

}  // namespace coneflow

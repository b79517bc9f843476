#pragma once

#include <optional>

#include "coneflow/grid.hpp"

namespace coneflow {

// Fixed background: the round sphere of total area 4*pi carrying two
// antipodal cone points of equal angle 2*pi*beta at sigma = 0 and sigma = 1.
// In the affine chart, |S|^2 = 4|z|^2/(1+|z|^2)^2 = 4*sigma*(1-sigma), so
// sup |S|^2 = 1 at the equator. The bundle metric is the Fubini-Study one,
// whose curvature form equals the background Kahler form; together with
// Ric(omega_0) = omega_0 this makes the Ricci potential of the twisted flow
// vanish identically (compute_h solves the general equation regardless).
//
// Conventions, used throughout and in all reports:
//   - densities are relative to the background (u = omega/omega_0 as area
//     forms); the background area form is 4*pi*dsigma;
//   - Delta_omega = trace of i*ddbar against omega (complex Laplacian);
//   - R = trace of the Ricci form = Gauss curvature; R == 1 for the round
//     background.

/// chi_beta(eps + y) = beta * int_0^y ((eps+x)^beta - eps^beta)/x dx,
/// the smoothing profile whose i*ddbar regularizes the cone metric.
/// Analytic branches: beta = 1 gives y; eps = 0 gives y^beta.
/// Relative accuracy 1e-10.
double chi_profile(double beta, double eps, double y);

/// Density of i*ddbar chi_beta(eps + |z|^2) against dz dzbar:
/// beta^2 (eps + y)^(beta-1) with y = |z|^2.
double regularized_cone_density(double beta, double eps, double y);

struct ConeGeometry {
  double beta = 0.7;      // cone angle parameter, in (0, 1]
  double eps = 1e-3;      // regularization, in [0, 1]
  double N = 10.0;        // barrier scale of the reference metric
  double delta = 0.1;     // Donaldson model coefficient
  double rho_exp = 0.1;   // barrier exponent, in (0, beta)
  double s_norm = 4.0;    // |S|^2 = s_norm * sigma(1-sigma), sup <= 1
  RadialGrid grid;

  /// Validates ranges and checks that N keeps the reference density
  /// positive on the grid. Throws std::invalid_argument on violation.
  ConeGeometry(double beta, double eps, RadialGrid grid,
               std::optional<double> N = std::nullopt,
               std::optional<double> delta = std::nullopt,
               double rho_exp = 0.1);

  /// |S|^2 at node i.
  double section_sq(std::size_t i) const { return s_norm * grid.node(i) * (1.0 - grid.node(i)); }
  std::vector<double> section_sq_field() const;

  /// Smallest N from the doubling scan (start 10, double) such that the
  /// reference density keeps a 10% positivity margin.
  static double select_barrier_scale(double beta, double eps, const RadialGrid& grid,
                                     double s_norm = 4.0);

  /// Relative density of omega_eps = omega_0 + (1/N) i ddbar chi_beta(eps+|S|^2),
  /// built with the discrete i*ddbar so the total area is conserved exactly.
  /// Throws std::runtime_error naming the offending node if N is too small.
  RadialField omega_eps_density() const;

  /// Barrier Psi_{eps,rho} = chi_rho(eps + |S|^2) at a node.
  double barrier_psi(double rho, std::size_t node) const;
  std::vector<double> barrier_psi_field(double rho) const;

  /// Relative density of the Donaldson model omega_D = omega_0 + delta i ddbar |S|^(2 beta).
  /// Throws std::runtime_error ("delta too large") on positivity failure.
  RadialField donaldson_density() const;

  /// Ricci potential: solves i ddbar h = Ric(omega_0) - beta omega_0 - (1-beta) Theta
  /// with mean zero against omega_0. In this geometry the right-hand side
  /// vanishes identically and h == 0; the solver path is generic.
  RadialField compute_h() const;

  /// Data of the validated reference metric, cached at construction.
  const std::vector<double>& u_eps() const { return u_eps_; }
  const std::vector<double>& u_donaldson() const { return u_D_; }
  const std::vector<double>& psi_beta() const { return psi_beta_; }

 private:
  std::vector<double> u_eps_, u_D_, psi_beta_;
};

/// Pointwise trace ratio tr_{omega_a} omega_b = b/a (n = 1).
/// Throws std::domain_error on nonpositive input density.
RadialField trace_ratio(const RadialField& a, const RadialField& b);

}  // namespace coneflow

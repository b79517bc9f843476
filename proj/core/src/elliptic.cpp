#include "coneflow/elliptic.hpp"

#include <cmath>
#include <stdexcept>

namespace coneflow {

namespace {

std::vector<double> cone_weight(const ConeGeometry& g) {
  // (|S|^2 + eps)^(beta-1) sampled at nodes
  std::vector<double> cw(g.grid.size());
  for (std::size_t i = 0; i < cw.size(); ++i)
    cw[i] = std::pow(g.section_sq(i) + g.eps, g.beta - 1.0);
  return cw;
}

}  // namespace

std::pair<RadialField, double> laplace_smooth(const ConeGeometry& geom, const RadialField& F) {
  F.validate();
  const auto& grid = geom.grid;
  const std::size_t n = grid.size();
  if (F.size() != n) throw std::invalid_argument("laplace_smooth: grid mismatch");

  const auto& u_eps = geom.u_eps();
  const auto& u_D = geom.u_donaldson();
  std::vector<double> dd = grid.ddbar_rel(F.values);
  std::vector<double> dDF(n);
  for (std::size_t i = 0; i < n; ++i) {
    dDF[i] = dd[i] / u_D[i];
    if (!std::isfinite(dDF[i]))
      throw std::runtime_error("laplace_smooth: Delta_D F diverges under the grid quadrature");
  }

  double vol_eps = 0.0, num = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    vol_eps += u_eps[i] * grid.weight(i);
    num += dDF[i] * u_eps[i] * grid.weight(i);
  }
  const double a_eps = -num / vol_eps;

  // Delta_eps F_eps = dDF + a  <=>  ddbar_rel(F_eps) = u_eps (dDF + a)
  std::vector<double> rhs(n);
  for (std::size_t i = 0; i < n; ++i) rhs[i] = u_eps[i] * (dDF[i] + a_eps);
  double res = 0.0;
  std::vector<double> Fe = grid.solve_ddbar(rhs, &res);
  if (res > 1e-8) throw std::runtime_error("laplace_smooth: linear solve residual too large");

  // exponential normalization against the unit-mass round measure
  std::vector<double> cw = cone_weight(geom);
  double I = 0.0;
  for (std::size_t i = 0; i < n; ++i) I += std::exp(Fe[i]) * cw[i] * grid.weight(i);
  if (!(I > 0.0) || !std::isfinite(I))
    throw std::runtime_error("laplace_smooth: exponential normalization diverged");
  const double shift = -std::log(I);
  for (double& v : Fe) v += shift;

  return {RadialField{std::move(Fe), FieldKind::log_density}, a_eps};
}

RadialField solve_initial_potential(const ConeGeometry& geom, const RadialField& F_eps) {
  const auto& grid = geom.grid;
  const std::size_t n = grid.size();
  if (F_eps.size() != n) throw std::invalid_argument("solve_initial_potential: grid mismatch");

  std::vector<double> cw = cone_weight(geom);
  std::vector<double> r(n);
  double mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u_rhs = std::exp(F_eps[i]) * cw[i];
    if (!(u_rhs > 0.0)) throw std::runtime_error("solve_initial_potential: RHS not positive");
    r[i] = u_rhs - 1.0;
    mass += r[i] * grid.weight(i);
  }
  if (std::fabs(mass) > 1e-8)
    throw std::runtime_error("solve_initial_potential: RHS mass does not match the class");

  double res = 0.0;
  std::vector<double> phi = grid.solve_ddbar(r, &res);
  if (res > 1e-8) throw std::runtime_error("solve_initial_potential: residual too large");

  double sup = phi[0];
  for (double v : phi) sup = std::max(sup, v);
  for (double& v : phi) v -= sup;

  std::vector<double> dd = grid.ddbar_rel(phi);
  for (std::size_t i = 0; i < n; ++i)
    if (1.0 + dd[i] <= 0.0)
      throw std::runtime_error("solve_initial_potential: resulting density not positive");
  return RadialField{std::move(phi), FieldKind::potential};
}

double subharmonicity_check(const ConeGeometry& geom, const RadialField& F_eps) {
  const auto& grid = geom.grid;
  if (F_eps.size() != grid.size())
    throw std::invalid_argument("subharmonicity_check: grid mismatch");
  std::vector<double> dd = grid.ddbar_rel(F_eps.values);
  const auto& u_eps = geom.u_eps();
  double mn = 1e300;
  for (std::size_t i = 0; i < grid.size(); ++i) mn = std::min(mn, dd[i] / u_eps[i]);
  return mn;
}

SmoothingResult smoothing_pipeline(const ConeGeometry& geom, const RadialField& F,
                                   double delta_tube) {
  SmoothingResult out;
  auto [Fe, a] = laplace_smooth(geom, F);
  out.a_eps_norm = a;

  const auto& grid = geom.grid;
  const std::size_t n = grid.size();
  const auto& u_eps = geom.u_eps();
  const auto& u_D = geom.u_donaldson();

  // residuals of the two normalizations, recomputed from the results
  {
    std::vector<double> dd = grid.ddbar_rel(F.values);
    double acc = 0.0, volw = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += (dd[i] / u_D[i] + a) * u_eps[i] * grid.weight(i);
      volw += u_eps[i] * grid.weight(i);
    }
    out.normalization_residual_a = std::fabs(acc) / volw;
    std::vector<double> cw = cone_weight(geom);
    double I = 0.0;
    for (std::size_t i = 0; i < n; ++i) I += std::exp(Fe[i]) * cw[i] * grid.weight(i);
    out.normalization_residual_exp = std::fabs(I - 1.0);

    std::vector<double> ddFe = grid.ddbar_rel(Fe.values);
    double rmax = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      rmax = std::max(rmax, std::fabs(ddFe[i] / u_eps[i] - (dd[i] / u_D[i] + a)));
    out.laplace_residual = rmax;
  }

  out.phi_hat = solve_initial_potential(geom, Fe);

  std::vector<double> dd = grid.ddbar_rel(out.phi_hat.values);
  out.u_phi = RadialField{std::vector<double>(n), FieldKind::density};
  std::vector<double> cw = cone_weight(geom);
  double pres = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.u_phi[i] = 1.0 + dd[i];
    pres = std::max(pres, std::fabs(out.u_phi[i] - std::exp(Fe[i]) * cw[i]));
  }
  out.potential_residual = pres;

  double qi = 1e300, qs = -1e300;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = grid.node(i);
    if (s < delta_tube || s > 1.0 - delta_tube) continue;
    const double ratio = out.u_phi[i] / u_eps[i];
    qi = std::min(qi, ratio);
    qs = std::max(qs, ratio);
  }
  out.quasi_inf = qi;
  out.quasi_sup = qs;
  out.F_eps = std::move(Fe);
  return out;
}

RadialField ke_log_density(const RadialGrid& grid, double beta) {
  if (!(beta > 0.0) || beta > 1.0) throw std::domain_error("ke_log_density: beta in (0,1]");
  std::vector<double> F(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double s = grid.node(i);
    F[i] = std::log(beta) + (1.0 - beta) * std::log(4.0) -
           2.0 * std::log(std::pow(s, beta) + std::pow(1.0 - s, beta));
  }
  return RadialField{std::move(F), FieldKind::log_density};
}

}  // namespace coneflow

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "coneflow/flow.hpp"
#include "coneflow/geometry.hpp"

namespace coneflow {

/// Measured constants of the monitored inequalities for one run.
struct EstimateReport {
  double trace_sup = 0.0;      // max over run of tr_{omega_eps} omega_phi (off divisor tube)
  double inv_trace_sup = 0.0;  // max over run of tr_{omega_phi} omega_eps
  double siu_max = 0.0;        // max of log tr + B Psi - A phi
  double siu_A = 0.0, siu_B = 0.0;
  double inv_trace_at_siu_argmax = 0.0;
  double R_t_min = 0.0;        // min over run of t * min R
  double vol_deriv_constant = 0.0;  // max over steps of t * (max d/dt log dvol - n beta)
  std::map<std::string, double> holder;  // alpha tag -> seminorm
  double poincare = 0.0;
  double jeffres_envelope_margin = 0.0;  // min over time of envelope - sup v (if probed)
  bool reproducible = true;
};

/// (trace, inverse trace, determinant) fields; in n = 1 trace == det.
struct TraceMonitors {
  RadialField trace;      // tr_{omega_eps} omega_phi
  RadialField inv_trace;  // tr_{omega_phi} omega_eps
  RadialField det;        // density ratio
};
TraceMonitors trace_monitors(const FlowState& state, const ConeGeometry& geom);

/// (sum 1/lambda_i)^(n-1) >= sum lambda_i / prod lambda_k within 4 ulps.
/// Throws std::domain_error on nonpositive input; requires 2 <= n <= 16.
bool eigenvalue_inequality(std::span<const double> lambdas);

struct SiuQuantity {
  RadialField field;  // log tr_{omega_eps} omega_phi + B Psi_{eps,rho} - A phi
  std::size_t argmax = 0;
  double max_value = 0.0;
  double inv_trace_at_argmax = 0.0;
};
SiuQuantity siu_quantity(const FlowState& state, const ConeGeometry& geom, double A, double B);

/// Scalar curvature of omega_phi, computed from the background-relative
/// density as R = (1 - ddbar_rel(log u))/u (R == 1 for the round background).
RadialField scalar_curvature(const FlowState& state, const ConeGeometry& geom);

/// Geodesic distance table along a meridian: d(i,j) = |L(j) - L(i)| with
/// dL = sqrt(u) dsigma / sqrt(sigma (1-sigma)); pole cells integrate the
/// inverse-sqrt factor exactly. For the round metric L(1) - L(0) = pi.
class DistanceTable {
 public:
  DistanceTable(const RadialGrid& grid, std::span<const double> u);
  /// Donaldson-metric distances, with the conical (sigma(1-sigma))^((beta-1)/2)
  /// factor of the end cells integrated by a graded substitution.
  static DistanceTable donaldson(const ConeGeometry& geom);
  double between(std::size_t i, std::size_t j) const;
  double diameter() const { return cum_.back(); }
  const std::vector<double>& cumulative() const { return cum_; }

 private:
  DistanceTable() = default;
  std::vector<double> cum_;
};

/// Spacewise Holder seminorm sup |u_i - u_j| / d(i,j)^alpha over the
/// deterministic pair set: all pairs of every 4th node plus all adjacent pairs.
double holder_seminorm(std::span<const double> field, const DistanceTable& dist, double alpha);

/// Parabolic seminorm over a time slab: distance max(d(x,y), sqrt|t-s|),
/// sampled on the decimated space-time lattice (every 4th node, <= 17 slices).
double parabolic_holder_seminorm(const std::vector<std::vector<double>>& slabs,
                                 std::span<const double> times, const DistanceTable& dist,
                                 double alpha);

/// 1/sqrt(lambda_1) of the metric Laplacian of omega_eps, via deflated inverse
/// power iteration on the (conformally invariant) Dirichlet form against the
/// omega_eps mass. Round background of area 4 pi gives 1/sqrt(2).
double poincare_constant(const ConeGeometry& geom, double tol = 1e-12, int max_iter = 500);
double poincare_constant_of_density(const RadialGrid& grid, std::span<const double> u,
                                    double tol = 1e-12, int max_iter = 500);

/// Jeffres comparison of two trajectories on a common grid.
struct JeffresLedger {
  std::vector<double> a_values;
  std::vector<double> sup_final;       // sup(phi1 - phi2) at T per a (a-free difference)
  std::vector<double> min_margin;      // min over time of envelope - sup(phi1 + a|S|^2p - phi2)
  double measured_C = 0.0;             // from the Laplacian lower bound on |S|^(2p)
  double extrapolated_zero = 0.0;      // linear a -> 0 extrapolation of sup(phi1-phi2)
  bool envelope_ok = false;
};
JeffresLedger jeffres_compare(const Trajectory& traj1, const Trajectory& traj2, double a,
                              double p, const ConeGeometry& geom);

/// Weak-flow certificate: the three defining bullets with measured constants,
/// evaluated on M minus the divisor tube of radius delta where they demand it.
struct WeakFlowCertificate {
  bool holder_bounded = false;
  double holder_constant = 0.0;  // parabolic [phi]_{alpha,alpha/2} over M x [0,T]
  bool sup_bounds = false;
  double sup_phidot = 0.0;
  double trace_sum_sup = 0.0;    // sup of tr + inv trace vs omega_D off the tube
  bool lower_metric_bound = false;
  double lower_bound_constant = 0.0;  // min of u_phi/u_D off the tube
  bool pass() const { return holder_bounded && sup_bounds && lower_metric_bound; }
};
WeakFlowCertificate weak_flow_certificate(const Trajectory& traj, const ConeGeometry& geom,
                                          double delta, double alpha);

}  // namespace coneflow

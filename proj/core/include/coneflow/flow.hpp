#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "coneflow/geometry.hpp"
#include "coneflow/grid.hpp"

namespace coneflow {

enum class FlowScheme { implicit, semi_implicit };
enum class FlowReference { omega_0, omega_eps };

struct FlowConfig {
  double dt = 1e-3;
  double T = 1.0;
  FlowScheme scheme = FlowScheme::implicit;
  FlowReference reference = FlowReference::omega_0;
  double newton_tol = 1e-11;
  int newton_max_iter = 40;
  double dt_floor = 1e-6;       // halving floor on Newton failure
  std::size_t snapshot_stride = 10;  // store full fields every k accepted steps
  double mp_tol = 1e-6;         // slack of the sup|phidot| envelope

  void validate() const {
    if (dt <= 0.0 || T <= 0.0) throw std::invalid_argument("FlowConfig: dt, T must be positive");
    if (newton_tol <= 0.0 || dt_floor <= 0.0)
      throw std::invalid_argument("FlowConfig: tolerances must be positive");
  }
};

struct FlowState {
  double t = 0.0;
  RadialField phi;      // potential relative to the configured reference form
  RadialField phi_dot;
  RadialField density;  // relative density of omega_phi (background-relative)
  double eps = 0.0, beta = 0.0;
  FlowReference reference = FlowReference::omega_0;
};

/// Per-step scalar diagnostics (divisor-tube quantities use delta_tube).
struct StepDiagnostics {
  double t = 0.0;
  double sup_phidot = 0.0;
  double trace_sup = 0.0;   // sup over M \ T_delta of u_phi/u_eps
  double trace_inf = 0.0;   // inf over M \ T_delta of u_phi/u_eps
  double area = 0.0;
  double min_R_t = 0.0;     // t * min_M R(omega_phi)
  double sup_v = 0.0;       // sup |e^{-beta t} phi_dot|
  double vol_deriv_max = 0.0;  // max_i d/dt log dvol over the last step
};

struct Trajectory {
  std::vector<StepDiagnostics> steps;  // one entry per accepted step (incl. t=0)
  std::vector<FlowState> snapshots;    // every snapshot_stride steps plus t=0, t=T
  double beta = 0.0, eps = 0.0;
  FlowReference reference = FlowReference::omega_0;
  double dt = 0.0;
  const FlowState& final_state() const { return snapshots.back(); }
};

class FlowError : public std::runtime_error {
 public:
  FlowError(const std::string& what, double t_fail, double suggested_dt = 0.0)
      : std::runtime_error(what), t_fail(t_fail), suggested_dt(suggested_dt) {}
  double t_fail;
  double suggested_dt;
};

class MaximumPrincipleError : public FlowError {
 public:
  MaximumPrincipleError(const std::string& what, double t_fail, double measured, double allowed)
      : FlowError(what, t_fail), measured(measured), allowed(allowed) {}
  double measured, allowed;
};

/// One implicit step of the perturbed potential flow
///   d phi/dt = log(omega_phi^n / omega_ref^n) + beta phi + H,
/// where H = h + (1-beta) log(|S|^2 + eps) for reference omega_0 and
/// H = V_eps = h + log(omega_eps (|S|^2+eps)^(1-beta) / omega_0) + (beta/N) Psi_{eps,beta}
/// for reference omega_eps. The linear beta*phi term is integrated exactly
/// (phi+ = e^{beta dt} phi + (e^{beta dt}-1)/beta * [log + H](phi+)), which keeps
/// stationary points exact fixed points and gives the discrete scheme the
/// continuum maximum-principle envelope with no time-step slack.
/// Throws FlowError with a suggested dt/2 if Newton fails; throws on
/// Kahler-cone violations.
FlowState flow_step(const FlowState& state, const ConeGeometry& geom, const FlowConfig& config);

/// Runs from phi0 over [0, T], monitoring sup|phi_dot(t)| <= e^{beta t} sup|phi_dot(0)| + mp_tol
/// at every accepted step (violations abort with MaximumPrincipleError) and
/// halving dt on step failures down to dt_floor.
Trajectory run_flow(const ConeGeometry& geom, const FlowConfig& config, const RadialField& phi0,
                    double delta_tube = 0.05);

/// Twisted potential v = e^{-beta t} phi_dot per snapshot, with the discrete
/// heat-equation residual between consecutive snapshots.
struct TwistedPotential {
  std::vector<double> times;
  std::vector<RadialField> v;
  std::vector<double> residual_sup;  // per consecutive-snapshot pair
};
TwistedPotential twisted_potential(const Trajectory& traj, const ConeGeometry& geom);

/// Log-density datum F_t = -h + phi_dot - beta phi at a state, computed both
/// from the stored time derivative and directly from the metric density;
/// throws on disagreement beyond tol. Suitable as pipeline input for restart.
RadialField restart_datum(const FlowState& state, const ConeGeometry& geom, double tol = 1e-8);

/// Newton solve of the stationary equation log(u_phi) + beta phi + H = 0
/// (reference omega_0); used to manufacture exact fixed points.
RadialField solve_stationary(const ConeGeometry& geom, const RadialField& phi_seed,
                             double tol = 1e-12, int max_iter = 80);

}  // namespace coneflow

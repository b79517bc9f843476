#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "coneflow/elliptic.hpp"
#include "coneflow/estimates.hpp"
#include "coneflow/flow.hpp"
#include "coneflow/geometry.hpp"

namespace coneflow {

/// Plan for the regularization ladder. Each rung runs the full smoothing
/// pipeline and flow at its own eps; the grid refines with eps near the poles
/// (uniform base lattice plus graded nodes down to spacing ~ grading_scale*eps)
/// so that base nodes are shared across rungs and comparisons need no
/// interpolation.
struct CascadePlan {
  std::vector<double> eps_ladder;  // strictly decreasing, positive
  double delta = 0.05;             // divisor-exclusion radius in sigma
  double a0 = 0.1;                 // comparison start time
  double alpha = 0.25;             // Holder exponent
  double beta = 0.7;
  std::optional<double> N;         // barrier scale (auto-selected if absent)
  std::optional<double> delta_donaldson;
  std::size_t grid_n = 257;        // base lattice size
  double grading_scale = 0.5;      // pole spacing target = grading_scale * eps
  FlowConfig flow;
  std::string init_F = "ke";       // "ke" | "const"

  void validate() const;
};

struct RungResult {
  double eps = 0.0;
  RadialGrid grid{RadialGrid::uniform(3)};
  SmoothingResult smoothing;
  Trajectory trajectory;
  EstimateReport report;
  WeakFlowCertificate certificate;
};

struct CascadeRecord {
  CascadePlan plan;
  std::vector<RungResult> rungs;  // ladder order
};

/// Runs every rung (concurrently up to `jobs`); any failure aborts with the
/// partial record preserved in the exception message.
CascadeRecord run_cascade(const CascadePlan& plan, std::size_t jobs = 1);

/// Parabolic Holder distance (sup norm + seminorm, potentials and densities)
/// between rungs k and k+1, restricted to the shared base nodes outside the
/// divisor tube and to times in [a0, T]. Potentials are gauge-fixed to
/// sup phi = 0 per time slice before differencing.
double pairwise_distance(const CascadeRecord& rec, std::size_t k, double delta, double alpha);

/// Max discrepancy of pairwise geodesic distances between rungs k and k+1 at
/// time t, over `sample_count` evenly spaced base nodes.
double gh_proxy(const CascadeRecord& rec, std::size_t k, double t, std::size_t sample_count);

struct VerdictCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Verdict {
  bool pass = false;
  std::vector<VerdictCheck> checks;
};

/// Aggregates the cascade-level checks: Cauchy decrease of the pairwise
/// distances (ratio <= 0.9), decreasing gh proxy, trace uniformity
/// (< factor 2), quasi-isometry stability (within +-20%), monotone |a_eps|,
/// and the per-rung certificates.
Verdict verdict(const CascadeRecord& rec);

/// Persistence: one folder per rung (trajectory.csv, estimates.json,
/// certificate.json) plus top-level verdict.json. manifest.json carries the
/// volatile timestamps and is not part of the deterministic record.
void write_cascade_record(const CascadeRecord& rec, const Verdict& v,
                          const std::filesystem::path& dir);

/// Builds the geometry of one rung of the plan.
ConeGeometry rung_geometry(const CascadePlan& plan, double eps);

/// Serialization helpers shared with the CLI.
void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path);
void write_estimates_json(const EstimateReport& rep, const SmoothingResult& sm, double eps,
                          const std::filesystem::path& path);
void write_certificate_json(const WeakFlowCertificate& cert, const std::filesystem::path& path);
EstimateReport collect_report(const RungResult& rung, const ConeGeometry& geom);

}  // namespace coneflow

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace coneflow {

/// Scalar field sampled on the radial grid.
///
/// Density-kind fields store the ratio of the metric's area density to the
/// round background's, which is a smooth positive function across the poles
/// for every regularized metric. The background area form itself is
/// 4*pi*dsigma, so integrals reduce to weighted sums in sigma.
enum class FieldKind { potential, density, log_density };

struct RadialField {
  std::vector<double> values;
  FieldKind kind = FieldKind::potential;

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  /// Throws std::invalid_argument if values are non-finite, or if a
  /// density-kind field is not strictly positive.
  void validate() const;

  double sup() const;
  double inf() const;
  double sup_abs() const;
};

/// One-dimensional grid in sigma = |z|^2/(1+|z|^2) over [0,1], endpoints
/// included (the two cone points sit exactly at sigma = 0 and sigma = 1).
/// Nodes may be graded toward the poles; `weights` are the finite-volume
/// cell widths, so that  integral f dvol_omega = 4*pi * sum f_i u_i w_i
/// for a field with relative density u.
class RadialGrid {
 public:
  /// Uniform grid with n nodes.
  static RadialGrid uniform(std::size_t n);

  /// Uniform base lattice of n_base nodes plus geometrically graded nodes
  /// inside the two pole zones, refined down to spacing ~h_pole. Base nodes
  /// are preserved, so grids built from the same base share them exactly.
  static RadialGrid graded(std::size_t n_base, double h_pole,
                           double zone = 0.04, double ratio = 0.65);

  /// Arbitrary strictly increasing nodes with endpoints 0 and 1.
  explicit RadialGrid(std::vector<double> nodes);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  double node(std::size_t i) const { return nodes_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }

  /// Midpoints and widths of the edges between consecutive nodes.
  const std::vector<double>& edge_mid() const { return edge_mid_; }
  const std::vector<double>& edge_width() const { return edge_width_; }

  /// Discrete density of i*ddbar(u) relative to the round background:
  /// ddbar_rel(u)_i = (flux_{i+1/2} - flux_{i-1/2}) / (2 w_i) with
  /// flux = m(1-m) du/dsigma at edge midpoints and zero flux past the poles.
  /// Telescoping makes sum_i ddbar_rel(u)_i w_i vanish identically, which is
  /// what keeps every derived metric in the fixed area class exactly.
  std::vector<double> ddbar_rel(std::span<const double> u) const;

  /// Solves ddbar_rel(x) = r for x (gauge: x[n-1] = 0, then caller shifts).
  /// Requires the compatibility sum_i r_i w_i = 0; the defect of the dropped
  /// row is returned in *residual if given.
  std::vector<double> solve_ddbar(std::span<const double> r,
                                  double* residual = nullptr) const;

  /// integral of f against 4*pi * u * dsigma (area integral for density u).
  double integrate(std::span<const double> f, std::span<const double> u) const;
  /// integral of f against the unit-mass round measure dsigma.
  double integrate_background(std::span<const double> f) const;

  /// True if `other` has the same base lattice embedded in this grid.
  std::vector<std::size_t> restriction_indices(const RadialGrid& coarse) const;

  bool operator==(const RadialGrid& o) const { return nodes_ == o.nodes_; }

 private:
  void build_tables();
  std::vector<double> nodes_;
  std::vector<double> weights_;
  std::vector<double> edge_mid_;
  std::vector<double> edge_width_;
};

/// Tridiagonal system solved by the Thomas algorithm (no pivoting; the
/// matrices arising here are diagonally dominant after row scaling).
struct Tridiagonal {
  std::vector<double> lower, diag, upper;  // lower[0] and upper[n-1] unused
  std::vector<double> solve(std::span<const double> rhs) const;
};

inline constexpr double kTotalArea = 12.566370614359172953850573533;  // 4*pi

}  // namespace coneflow

#include "coneflow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace coneflow {

void RadialField::validate() const {
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("RadialField: non-finite value");
    if (kind == FieldKind::density && v <= 0.0)
      throw std::invalid_argument("RadialField: density must be strictly positive");
  }
}

double RadialField::sup() const { return *std::max_element(values.begin(), values.end()); }
double RadialField::inf() const { return *std::min_element(values.begin(), values.end()); }
double RadialField::sup_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::fabs(v));
  return m;
}

RadialGrid RadialGrid::uniform(std::size_t n) {
  if (n < 3) throw std::invalid_argument("RadialGrid: need at least 3 nodes");
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = double(i) / double(n - 1);
  s.front() = 0.0;
  s.back() = 1.0;
  return RadialGrid(std::move(s));
}

RadialGrid RadialGrid::graded(std::size_t n_base, double h_pole, double zone, double ratio) {
  if (h_pole <= 0.0 || zone <= 0.0 || zone >= 0.5 || ratio <= 0.0 || ratio >= 1.0)
    throw std::invalid_argument("RadialGrid::graded: bad grading parameters");
  h_pole = std::max(h_pole, 1e-8);
  std::set<double> nodes;
  for (std::size_t i = 0; i < n_base; ++i) nodes.insert(double(i) / double(n_base - 1));
  double x = zone;
  while (x > 2.0 * h_pole) {
    x *= ratio;
    nodes.insert(x);
    nodes.insert(1.0 - x);
  }
  return RadialGrid(std::vector<double>(nodes.begin(), nodes.end()));
}

RadialGrid::RadialGrid(std::vector<double> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.size() < 3) throw std::invalid_argument("RadialGrid: need at least 3 nodes");
  if (nodes_.front() != 0.0 || nodes_.back() != 1.0)
    throw std::invalid_argument("RadialGrid: endpoints must be 0 and 1");
  for (std::size_t i = 1; i < nodes_.size(); ++i)
    if (nodes_[i] <= nodes_[i - 1])
      throw std::invalid_argument("RadialGrid: nodes must be strictly increasing");
  build_tables();
}

void RadialGrid::build_tables() {
  const std::size_t n = nodes_.size();
  weights_.assign(n, 0.0);
  edge_mid_.resize(n - 1);
  edge_width_.resize(n - 1);
  for (std::size_t e = 0; e + 1 < n; ++e) {
    edge_mid_[e] = 0.5 * (nodes_[e] + nodes_[e + 1]);
    edge_width_[e] = nodes_[e + 1] - nodes_[e];
  }
  weights_[0] = 0.5 * edge_width_[0];
  weights_[n - 1] = 0.5 * edge_width_[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i)
    weights_[i] = 0.5 * (edge_width_[i - 1] + edge_width_[i]);
}

std::vector<double> RadialGrid::ddbar_rel(std::span<const double> u) const {
  const std::size_t n = nodes_.size();
  if (u.size() != n) throw std::invalid_argument("ddbar_rel: size mismatch");
  std::vector<double> out(n);
  double flux_prev = 0.0;  // zero flux past the pole
  for (std::size_t e = 0; e + 1 < n; ++e) {
    const double m = edge_mid_[e];
    const double flux = m * (1.0 - m) * (u[e + 1] - u[e]) / edge_width_[e];
    out[e] = (flux - flux_prev) / (2.0 * weights_[e]);
    flux_prev = flux;
  }
  out[n - 1] = (0.0 - flux_prev) / (2.0 * weights_[n - 1]);
  return out;
}

std::vector<double> RadialGrid::solve_ddbar(std::span<const double> r, double* residual) const {
  const std::size_t n = nodes_.size();
  if (r.size() != n) throw std::invalid_argument("solve_ddbar: size mismatch");
  // Row i (i < n-1): flux differences = 2 w_i r_i. Last row is replaced by the
  // gauge x[n-1] = 0; its defect equals the compatibility defect of r.
  Tridiagonal T;
  T.lower.assign(n, 0.0);
  T.diag.assign(n, 0.0);
  T.upper.assign(n, 0.0);
  std::vector<double> rhs(n);
  std::vector<double> c(n - 1);
  for (std::size_t e = 0; e + 1 < n; ++e)
    c[e] = edge_mid_[e] * (1.0 - edge_mid_[e]) / edge_width_[e];
  T.diag[0] = -c[0];
  T.upper[0] = c[0];
  rhs[0] = 2.0 * weights_[0] * r[0];
  for (std::size_t i = 1; i + 1 < n; ++i) {
    T.lower[i] = c[i - 1];
    T.diag[i] = -(c[i - 1] + c[i]);
    T.upper[i] = c[i];
    rhs[i] = 2.0 * weights_[i] * r[i];
  }
  T.diag[n - 1] = 1.0;
  rhs[n - 1] = 0.0;
  std::vector<double> x = T.solve(rhs);
  if (residual) {
    // defect of the dropped row: c_{n-2}(x_{n-2} - x_{n-1}) = 2 w_{n-1} r_{n-1}
    const double lhs = c[n - 2] * (x[n - 2] - x[n - 1]);
    *residual = std::fabs(lhs - 2.0 * weights_[n - 1] * r[n - 1]);
  }
  return x;
}

double RadialGrid::integrate(std::span<const double> f, std::span<const double> u) const {
  const std::size_t n = nodes_.size();
  if (f.size() != n || u.size() != n) throw std::invalid_argument("integrate: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += f[i] * u[i] * weights_[i];
  return kTotalArea * acc;
}

double RadialGrid::integrate_background(std::span<const double> f) const {
  const std::size_t n = nodes_.size();
  if (f.size() != n) throw std::invalid_argument("integrate_background: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += f[i] * weights_[i];
  return acc;
}

std::vector<std::size_t> RadialGrid::restriction_indices(const RadialGrid& coarse) const {
  std::vector<std::size_t> idx;
  idx.reserve(coarse.size());
  std::size_t j = 0;
  for (double s : coarse.nodes()) {
    while (j < nodes_.size() && nodes_[j] < s) ++j;
    if (j >= nodes_.size() || nodes_[j] != s)
      throw std::invalid_argument("restriction_indices: grids are not nested");
    idx.push_back(j);
  }
  return idx;
}

std::vector<double> Tridiagonal::solve(std::span<const double> rhs) const {
  const std::size_t n = diag.size();
  if (rhs.size() != n || lower.size() != n || upper.size() != n)
    throw std::invalid_argument("Tridiagonal::solve: size mismatch");
  std::vector<double> cp(n), dp(n);
  double piv = diag[0];
  if (piv == 0.0) throw std::runtime_error("Tridiagonal::solve: zero pivot");
  cp[0] = upper[0] / piv;
  dp[0] = rhs[0] / piv;
  for (std::size_t i = 1; i < n; ++i) {
    piv = diag[i] - lower[i] * cp[i - 1];
    if (piv == 0.0) throw std::runtime_error("Tridiagonal::solve: zero pivot");
    cp[i] = upper[i] / piv;
    dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / piv;
  }
  std::vector<double> x(n);
  x[n - 1] = dp[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = dp[i] - cp[i] * x[i + 1];
  return x;
}

}  // namespace coneflow

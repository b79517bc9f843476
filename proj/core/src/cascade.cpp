#include "coneflow/cascade.hpp"

#include "json.hpp"  // vendored nlohmann/json

#include "coneflow/elliptic.hpp"
#include "coneflow/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace coneflow {

void CascadePlan::validate() const {
  if (eps_ladder.empty()) throw std::invalid_argument("CascadePlan: empty ladder");
  for (double e : eps_ladder)
    if (!(e > 0.0)) throw std::invalid_argument("CascadePlan: ladder entries must be positive");
  for (std::size_t k = 1; k < eps_ladder.size(); ++k)
    if (!(eps_ladder[k] < eps_ladder[k - 1]))
      throw std::invalid_argument("CascadePlan: ladder must be strictly decreasing");
  if (!(delta > 0.0) || delta >= 0.5) throw std::invalid_argument("CascadePlan: delta in (0,0.5)");
  if (!(a0 > 0.0) || a0 >= flow.T) throw std::invalid_argument("CascadePlan: need 0 < a0 < T");
  if (!(alpha > 0.0) || alpha >= 1.0) throw std::invalid_argument("CascadePlan: alpha in (0,1)");
  flow.validate();
}

ConeGeometry rung_geometry(const CascadePlan& plan, double eps) {
  const double base_h = 1.0 / double(plan.grid_n - 1);
  RadialGrid grid = (plan.grading_scale * eps < base_h)
                        ? RadialGrid::graded(plan.grid_n, plan.grading_scale * eps)
                        : RadialGrid::uniform(plan.grid_n);
  return ConeGeometry(plan.beta, eps, std::move(grid), plan.N, plan.delta_donaldson);
}

EstimateReport collect_report(const RungResult& rung, const ConeGeometry& geom) {
  EstimateReport rep;
  double ts = -1e300, is = -1e300, rt = 1e300, vd = -1e300;
  for (const auto& d : rung.trajectory.steps) {
    ts = std::max(ts, d.trace_sup);
    is = std::max(is, 1.0 / d.trace_inf);
    rt = std::min(rt, d.min_R_t);
    if (d.t > 0.0) vd = std::max(vd, d.t * (d.vol_deriv_max - geom.beta));
  }
  rep.trace_sup = ts;
  rep.inv_trace_sup = is;
  rep.R_t_min = rt;
  rep.vol_deriv_constant = vd;

  const FlowState& last = rung.trajectory.final_state();
  double supd = 0.0;
  for (const auto& d : rung.trajectory.steps) supd = std::max(supd, d.sup_phidot);
  rep.siu_A = 2.0 * (1.0 + supd);
  rep.siu_B = 1.0;
  SiuQuantity sq = siu_quantity(last, geom, rep.siu_A, rep.siu_B);
  rep.siu_max = sq.max_value;
  rep.inv_trace_at_siu_argmax = sq.inv_trace_at_argmax;

  DistanceTable dD = DistanceTable::donaldson(geom);
  rep.holder["F_eps"] = holder_seminorm(rung.smoothing.F_eps.values, dD, 0.25);
  rep.holder["phi_final"] = holder_seminorm(last.phi.values, dD, 0.25);
  rep.poincare = poincare_constant(geom);
  return rep;
}

namespace {

RungResult run_rung(const CascadePlan& plan, double eps) {
  RungResult r;
  r.eps = eps;
  ConeGeometry geom = rung_geometry(plan, eps);
  r.grid = geom.grid;
  RadialField F = (plan.init_F == "const")
                      ? RadialField{std::vector<double>(geom.grid.size(), 0.0), FieldKind::log_density}
                      : ke_log_density(geom.grid, plan.beta);
  r.smoothing = smoothing_pipeline(geom, F, plan.delta);
  r.trajectory = run_flow(geom, plan.flow, r.smoothing.phi_hat, plan.delta);
  r.certificate = weak_flow_certificate(r.trajectory, geom, plan.delta, plan.alpha);
  r.report = collect_report(r, geom);
  return r;
}

}  // namespace

CascadeRecord run_cascade(const CascadePlan& plan, std::size_t jobs) {
  plan.validate();
  CascadeRecord rec;
  rec.plan = plan;
  rec.rungs.resize(plan.eps_ladder.size());
  if (jobs <= 1) {
    for (std::size_t k = 0; k < plan.eps_ladder.size(); ++k)
      rec.rungs[k] = run_rung(plan, plan.eps_ladder[k]);
    return rec;
  }
  std::vector<std::exception_ptr> errors(plan.eps_ladder.size());
  std::vector<std::thread> pool;
  std::size_t next = 0;
  std::mutex mtx;
  auto worker = [&]() {
    for (;;) {
      std::size_t k;
      {
        std::lock_guard<std::mutex> lk(mtx);
        if (next >= plan.eps_ladder.size()) return;
        k = next++;
      }
      try {
        rec.rungs[k] = run_rung(plan, plan.eps_ladder[k]);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t nthreads = std::min(jobs, plan.eps_ladder.size());
  for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  for (std::size_t k = 0; k < errors.size(); ++k)
    if (errors[k]) std::rethrow_exception(errors[k]);
  return rec;
}

namespace {

struct SharedSlab {
  std::vector<double> times;
  std::vector<std::vector<double>> phi1, phi2, u1, u2;  // restricted to shared off-tube nodes
  std::vector<std::size_t> node_subset;                 // indices into the coarse base grid
  RadialGrid base{RadialGrid::uniform(3)};
};

SharedSlab restrict_pair(const CascadeRecord& rec, std::size_t k, double delta, double a0) {
  const RungResult& A = rec.rungs[k];
  const RungResult& B = rec.rungs[k + 1];
  RadialGrid base = RadialGrid::uniform(rec.plan.grid_n);
  std::vector<std::size_t> ia = A.grid.restriction_indices(base);
  std::vector<std::size_t> ib = B.grid.restriction_indices(base);

  SharedSlab s;
  s.base = base;
  for (std::size_t i = 0; i < base.size(); ++i) {
    const double sig = base.node(i);
    if (sig >= delta && sig <= 1.0 - delta) s.node_subset.push_back(i);
  }
  const auto& snapsA = A.trajectory.snapshots;
  const auto& snapsB = B.trajectory.snapshots;
  if (snapsA.size() != snapsB.size())
    throw std::invalid_argument("pairwise_distance: snapshot grids differ");
  for (std::size_t j = 0; j < snapsA.size(); ++j) {
    if (std::fabs(snapsA[j].t - snapsB[j].t) > 1e-12)
      throw std::invalid_argument("pairwise_distance: snapshot times differ");
    if (snapsA[j].t < a0 - 1e-12) continue;
    s.times.push_back(snapsA[j].t);
    std::vector<double> p1, p2, v1, v2;
    double g1 = -1e300, g2 = -1e300;
    for (std::size_t q : s.node_subset) {
      g1 = std::max(g1, snapsA[j].phi[ia[q]]);
      g2 = std::max(g2, snapsB[j].phi[ib[q]]);
    }
    for (std::size_t q : s.node_subset) {
      p1.push_back(snapsA[j].phi[ia[q]] - g1);
      p2.push_back(snapsB[j].phi[ib[q]] - g2);
      v1.push_back(snapsA[j].density[ia[q]]);
      v2.push_back(snapsB[j].density[ib[q]]);
    }
    s.phi1.push_back(std::move(p1));
    s.phi2.push_back(std::move(p2));
    s.u1.push_back(std::move(v1));
    s.u2.push_back(std::move(v2));
  }
  if (s.times.empty()) throw std::invalid_argument("pairwise_distance: empty slab (a0 >= T?)");
  return s;
}

}  // namespace

double pairwise_distance(const CascadeRecord& rec, std::size_t k, double delta, double alpha) {
  if (k + 1 >= rec.rungs.size()) throw std::out_of_range("pairwise_distance: index out of range");
  SharedSlab s = restrict_pair(rec, k, delta, rec.plan.a0);

  // distance table of the shared subset under the Donaldson measuring metric
  ConeGeometry coarse_geom(rec.plan.beta, rec.rungs[k].eps, s.base, rec.plan.N,
                           rec.plan.delta_donaldson);
  DistanceTable full = DistanceTable::donaldson(coarse_geom);
  std::vector<double> cum;
  for (std::size_t q : s.node_subset) cum.push_back(full.cumulative()[q]);
  // re-wrap as a table over the subset
  struct SubTable : DistanceTable {
  };
  // build difference slabs
  std::vector<std::vector<double>> dphi(s.times.size()), du(s.times.size());
  double sup = 0.0;
  for (std::size_t j = 0; j < s.times.size(); ++j) {
    dphi[j].resize(s.node_subset.size());
    du[j].resize(s.node_subset.size());
    for (std::size_t q = 0; q < s.node_subset.size(); ++q) {
      dphi[j][q] = s.phi1[j][q] - s.phi2[j][q];
      du[j][q] = s.u1[j][q] - s.u2[j][q];
      sup = std::max(sup, std::max(std::fabs(dphi[j][q]), std::fabs(du[j][q])));
    }
  }
  // parabolic seminorms against the subset distances
  const std::size_t m = s.node_subset.size();
  auto seminorm = [&](const std::vector<std::vector<double>>& f) {
    double best = 0.0;
    const std::size_t tstride = std::max<std::size_t>(1, (s.times.size() + 16) / 17);
    std::vector<std::size_t> tp;
    for (std::size_t j = 0; j < s.times.size(); j += tstride) tp.push_back(j);
    if (tp.back() != s.times.size() - 1) tp.push_back(s.times.size() - 1);
    std::vector<std::size_t> spi;
    for (std::size_t i = 0; i < m; i += 4) spi.push_back(i);
    if (spi.back() != m - 1) spi.push_back(m - 1);
    for (std::size_t ta = 0; ta < tp.size(); ++ta)
      for (std::size_t tb = ta; tb < tp.size(); ++tb) {
        const double dt = std::sqrt(std::fabs(s.times[tp[tb]] - s.times[tp[ta]]));
        for (std::size_t p = 0; p < spi.size(); ++p)
          for (std::size_t q = (ta == tb ? p + 1 : 0); q < spi.size(); ++q) {
            const double d = std::max(std::fabs(cum[spi[q]] - cum[spi[p]]), dt);
            if (d <= 0.0) continue;
            best = std::max(best,
                            std::fabs(f[tp[ta]][spi[p]] - f[tp[tb]][spi[q]]) / std::pow(d, alpha));
          }
      }
    return best;
  };
  return sup + seminorm(dphi) + seminorm(du);
}

double gh_proxy(const CascadeRecord& rec, std::size_t k, double t, std::size_t sample_count) {
  if (k + 1 >= rec.rungs.size()) throw std::out_of_range("gh_proxy: index out of range");
  const RungResult& A = rec.rungs[k];
  const RungResult& B = rec.rungs[k + 1];
  auto find_snapshot = [&](const Trajectory& tr) -> const FlowState& {
    for (const auto& snap : tr.snapshots)
      if (std::fabs(snap.t - t) < 1e-9) return snap;
    throw std::invalid_argument("gh_proxy: no snapshot at requested time");
  };
  const FlowState& sa = find_snapshot(A.trajectory);
  const FlowState& sb = find_snapshot(B.trajectory);
  DistanceTable da(A.grid, sa.density.values);
  DistanceTable db(B.grid, sb.density.values);
  RadialGrid base = RadialGrid::uniform(rec.plan.grid_n);
  std::vector<std::size_t> ia = A.grid.restriction_indices(base);
  std::vector<std::size_t> ib = B.grid.restriction_indices(base);
  // deterministic sample of base nodes
  std::vector<std::size_t> pick;
  const std::size_t m = base.size();
  const std::size_t count = std::max<std::size_t>(2, std::min(sample_count, m));
  for (std::size_t j = 0; j < count; ++j) pick.push_back(j * (m - 1) / (count - 1));
  double worst = 0.0;
  for (std::size_t p = 0; p < pick.size(); ++p)
    for (std::size_t q = p + 1; q < pick.size(); ++q) {
      const double d1 = da.between(ia[pick[p]], ia[pick[q]]);
      const double d2 = db.between(ib[pick[p]], ib[pick[q]]);
      worst = std::max(worst, std::fabs(d1 - d2));
    }
  return worst;
}

Verdict verdict(const CascadeRecord& rec) {
  Verdict v;
  auto add = [&](const std::string& name, bool pass, const std::string& detail) {
    v.checks.push_back({name, pass, detail});
  };

  // per-rung certificates and flow invariants
  bool certs = true;
  std::string cert_detail;
  for (std::size_t k = 0; k < rec.rungs.size(); ++k) {
    if (!rec.rungs[k].certificate.pass()) {
      certs = false;
      cert_detail += "rung " + std::to_string(k) + " failed; ";
    }
  }
  add("weak_flow_certificates", certs, cert_detail.empty() ? "all rungs pass" : cert_detail);

  bool area_ok = true;
  for (const auto& r : rec.rungs)
    for (const auto& d : r.trajectory.steps)
      if (std::fabs(d.area / kTotalArea - 1.0) > 1e-6) area_ok = false;
  add("class_conservation", area_ok, "area within rel 1e-6 at every step");

  if (rec.rungs.size() >= 2) {
    std::vector<double> dist, ghs;
    for (std::size_t k = 0; k + 1 < rec.rungs.size(); ++k) {
      dist.push_back(pairwise_distance(rec, k, rec.plan.delta, rec.plan.alpha));
      ghs.push_back(gh_proxy(rec, k, rec.plan.flow.T, 33));
    }
    bool cauchy = true;
    std::string det;
    for (std::size_t k = 0; k + 1 < dist.size(); ++k) {
      if (!(dist[k + 1] <= 0.9 * dist[k])) cauchy = false;
    }
    for (double d : dist) det += format_double(d) + " ";
    add("cauchy_ratio_0.9", cauchy, "pairwise distances: " + det);
    bool gh_dec = true;
    std::string ghdet;
    for (std::size_t k = 0; k + 1 < ghs.size(); ++k)
      if (!(ghs[k + 1] < ghs[k])) gh_dec = false;
    for (double d : ghs) ghdet += format_double(d) + " ";
    add("gh_proxy_decreasing", gh_dec, "gh proxies: " + ghdet);

    double ts_max = -1e300, ts_min = 1e300, is_max = -1e300, is_min = 1e300;
    double cf_max = -1e300, cf_min = 1e300;
    bool a_mono = true;
    for (std::size_t k = 0; k < rec.rungs.size(); ++k) {
      const auto& r = rec.rungs[k];
      ts_max = std::max(ts_max, r.report.trace_sup);
      ts_min = std::min(ts_min, r.report.trace_sup);
      is_max = std::max(is_max, r.report.inv_trace_sup);
      is_min = std::min(is_min, r.report.inv_trace_sup);
      const double cf = std::max(r.smoothing.quasi_sup, 1.0 / r.smoothing.quasi_inf);
      cf_max = std::max(cf_max, cf);
      cf_min = std::min(cf_min, cf);
      if (k > 0 &&
          !(std::fabs(r.smoothing.a_eps_norm) < std::fabs(rec.rungs[k - 1].smoothing.a_eps_norm)))
        a_mono = false;
    }
    add("trace_uniformity_factor2", ts_max / ts_min < 2.0 && is_max / is_min < 2.0,
        "trace spread " + format_double(ts_max / ts_min) + ", inverse " +
            format_double(is_max / is_min));
    add("quasi_isometry_20pct", cf_max / cf_min <= 1.5,
        "C_F spread " + format_double(cf_max / cf_min));
    add("a_eps_monotone", a_mono, "|a_eps| strictly decreasing along the ladder");
  }

  v.pass = true;
  for (const auto& c : v.checks) v.pass = v.pass && c.pass;
  return v;
}

void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path) {
  CsvTable t;
  t.header = {"t", "sup_phidot", "trace_sup", "trace_inf", "area", "min_R_t", "sup_v",
              "vol_deriv_max"};
  for (const auto& d : traj.steps)
    t.rows.push_back({d.t, d.sup_phidot, d.trace_sup, d.trace_inf, d.area, d.min_R_t, d.sup_v,
                      d.vol_deriv_max});
  t.write(path);
}

void write_estimates_json(const EstimateReport& rep, const SmoothingResult& sm, double eps,
                          const std::filesystem::path& path) {
  nlohmann::json j;
  j["eps"] = eps;
  j["trace_sup"] = rep.trace_sup;
  j["inv_trace_sup"] = rep.inv_trace_sup;
  j["siu_max"] = rep.siu_max;
  j["siu_A"] = rep.siu_A;
  j["siu_B"] = rep.siu_B;
  j["inv_trace_at_siu_argmax"] = rep.inv_trace_at_siu_argmax;
  j["R_t_min"] = rep.R_t_min;
  j["vol_deriv_constant"] = rep.vol_deriv_constant;
  j["poincare"] = rep.poincare;
  for (const auto& [k, val] : rep.holder) j["holder_" + k] = val;
  j["a_eps_norm"] = sm.a_eps_norm;
  j["quasi_inf"] = sm.quasi_inf;
  j["quasi_sup"] = sm.quasi_sup;
  j["laplace_residual"] = sm.laplace_residual;
  j["potential_residual"] = sm.potential_residual;
  j["normalization_residual_a"] = sm.normalization_residual_a;
  j["normalization_residual_exp"] = sm.normalization_residual_exp;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_estimates_json: cannot open " + path.string());
  out << j.dump(2) << "\n";
}

void write_certificate_json(const WeakFlowCertificate& cert, const std::filesystem::path& path) {
  nlohmann::json j;
  j["holder_bounded"] = cert.holder_bounded;
  j["holder_constant"] = cert.holder_constant;
  j["sup_bounds"] = cert.sup_bounds;
  j["sup_phidot"] = cert.sup_phidot;
  j["trace_sum_sup"] = cert.trace_sum_sup;
  j["lower_metric_bound"] = cert.lower_metric_bound;
  j["lower_bound_constant"] = cert.lower_bound_constant;
  j["pass"] = cert.pass();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_certificate_json: cannot open " + path.string());
  out << j.dump(2) << "\n";
}

void write_cascade_record(const CascadeRecord& rec, const Verdict& v,
                          const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t k = 0; k < rec.rungs.size(); ++k) {
    const auto& r = rec.rungs[k];
    char sub[64];
    std::snprintf(sub, sizeof(sub), "rung_%02zu_eps_%g", k, r.eps);
    const auto rd = dir / sub;
    std::filesystem::create_directories(rd);
    write_trajectory_csv(r.trajectory, rd / "trajectory.csv");
    write_estimates_json(r.report, r.smoothing, r.eps, rd / "estimates.json");
    write_certificate_json(r.certificate, rd / "certificate.json");
  }
  nlohmann::json j;
  j["pass"] = v.pass;
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : v.checks)
    checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  j["checks"] = checks;
  std::ofstream out(dir / "verdict.json");
  if (!out) throw std::runtime_error("write_cascade_record: cannot open verdict.json");
  out << j.dump(2) << "\n";
}

}  // namespace coneflow

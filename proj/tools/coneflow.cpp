// Command-line front end: polar-check, run-flow, cascade.
//
// Exit codes are the machine contract:
//   0  success, all certified bounds hold
//   1  a certified bound or invariant failed
//   2  argument or configuration errors
//   3  solver failure (time of failure on stderr)
// stdout is human oriented; stderr carries structured "error: ..." lines.

#include "CLI11.hpp"
#include "json.hpp"

#include "coneflow/cascade.hpp"
#include "coneflow/elliptic.hpp"
#include "coneflow/estimates.hpp"
#include "coneflow/flow.hpp"
#include "coneflow/geometry.hpp"
#include "coneflow/io.hpp"
#include "coneflow/polar.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace coneflow;

namespace {

constexpr const char* kVersion = "0.1.0";

std::size_t default_jobs() {
  if (const char* env = std::getenv("CONEFLOW_JOBS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return std::size_t(v);
  }
  return 1;
}

CascadePlan plan_from_config(const Config& cfg, bool need_ladder) {
  CascadePlan plan;
  plan.beta = cfg.get_double_or("beta", 0.7);
  plan.N = cfg.get_double_opt("N");
  plan.delta_donaldson = cfg.get_double_opt("delta");
  plan.grid_n = cfg.get_size_or("grid.n", 257);
  plan.grading_scale = cfg.get_double_or("grid.grading_scale", 0.5);
  plan.flow.dt = cfg.get_double_or("flow.dt", 1e-3);
  plan.flow.T = cfg.get_double_or("flow.T", 0.5);
  plan.flow.snapshot_stride = cfg.get_size_or("flow.snapshot_stride", 10);
  const std::string scheme = cfg.get_or("flow.scheme", "implicit");
  if (scheme == "implicit")
    plan.flow.scheme = FlowScheme::implicit;
  else if (scheme == "semi-implicit")
    plan.flow.scheme = FlowScheme::semi_implicit;
  else
    throw std::runtime_error("config: flow.scheme must be implicit or semi-implicit");
  const std::string ref = cfg.get_or("flow.reference", "omega0");
  if (ref == "omega0")
    plan.flow.reference = FlowReference::omega_0;
  else if (ref == "omega_eps")
    plan.flow.reference = FlowReference::omega_eps;
  else
    throw std::runtime_error("config: flow.reference must be omega0 or omega_eps");
  plan.flow.newton_tol = cfg.get_double_or("flow.newton_tol", 1e-11);
  plan.flow.newton_max_iter = int(cfg.get_size_or("flow.newton_max_iter", 40));
  plan.flow.dt_floor = cfg.get_double_or("flow.dt_floor", 1e-6);
  plan.init_F = cfg.get_or("init.F", "ke");
  if (plan.init_F != "ke" && plan.init_F != "const")
    throw std::runtime_error("config: init.F must be ke or const");
  if (need_ladder) {
    plan.eps_ladder = cfg.has("eps_ladder") ? cfg.get_double_list("eps_ladder")
                                            : cfg.get_double_list("cascade.eps_ladder");
    plan.delta = cfg.get_double_or("cascade.delta", 0.05);
    plan.a0 = cfg.has("a0") ? cfg.get_double("a0") : cfg.get_double_or("cascade.a0", 0.1);
    plan.alpha =
        cfg.has("alpha") ? cfg.get_double("alpha") : cfg.get_double_or("cascade.alpha", 0.25);
  } else {
    plan.eps_ladder = {cfg.get_double_or("eps", 1e-3)};
    plan.delta = cfg.get_double_or("cascade.delta", 0.05);
    plan.a0 = plan.flow.T / 2.0;  // unused by single runs
  }
  return plan;
}

int cmd_polar_check(const std::vector<double>& betas, const std::vector<double>& epss,
                    double rho_max, double step, const std::string& outdir) {
  fs::create_directories(outdir);
  nlohmann::json cert;
  bool all_ok = true;
  nlohmann::json entries = nlohmann::json::array();
  for (double b : betas)
    for (double e : epss) {
      PolarChart chart = integrate_polar(b, e, rho_max, step);
      ComparisonReport cmp = comparison_check(chart);
      PinchingReport pinch = quasi_isometry_certificate(chart);
      char name[96];
      std::snprintf(name, sizeof(name), "polar_beta_%g_eps_%g.csv", b, e);
      write_polar_csv(chart, (fs::path(outdir) / name).string());
      const bool ok = cmp.u_in_range && cmp.v_lower_bound && pinch.certified;
      all_ok = all_ok && ok;
      entries.push_back({{"beta", b},
                         {"eps", e},
                         {"pass", ok},
                         {"pinch_lower", pinch.lower},
                         {"pinch_upper", pinch.upper},
                         {"min_margin_one_minus_u", cmp.min_margin_one_minus_u},
                         {"min_margin_v", cmp.min_margin_v},
                         {"csv", name}});
    }
  cert["entries"] = entries;
  cert["pass"] = all_ok;
  std::ofstream out(fs::path(outdir) / "polar_certificate.json");
  out << cert.dump(2) << "\n";
  std::printf("polar-check: %zu charts, %s\n", size_t(betas.size() * epss.size()),
              all_ok ? "all bounds hold" : "BOUNDS VIOLATED");
  return all_ok ? 0 : 1;
}

int cmd_run_flow(const std::string& config_path) {
  Config cfg;
  CascadePlan plan;
  try {
    cfg = Config::parse_file(config_path);
    plan = plan_from_config(cfg, false);
    plan.validate();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: config: %s\n", e.what());
    return 2;
  }
  const fs::path outdir = cfg.get_or("output.dir", "coneflow_run");
  const auto t0 = std::chrono::steady_clock::now();
  try {
    fs::create_directories(outdir);
    const double eps = plan.eps_ladder[0];
    ConeGeometry geom = rung_geometry(plan, eps);
    RadialField F = (plan.init_F == "const")
                        ? RadialField{std::vector<double>(geom.grid.size(), 0.0),
                                      FieldKind::log_density}
                        : ke_log_density(geom.grid, plan.beta);
    SmoothingResult sm = smoothing_pipeline(geom, F, plan.delta);
    Trajectory traj = run_flow(geom, plan.flow, sm.phi_hat, plan.delta);
    WeakFlowCertificate cert = weak_flow_certificate(traj, geom, plan.delta, plan.alpha);
    RungResult rung;
    rung.eps = eps;
    rung.grid = geom.grid;
    rung.smoothing = sm;
    rung.trajectory = std::move(traj);
    rung.certificate = cert;
    EstimateReport rep = collect_report(rung, geom);

    write_trajectory_csv(rung.trajectory, outdir / "trajectory.csv");
    write_estimates_json(rep, sm, eps, outdir / "estimates.json");
    write_certificate_json(cert, outdir / "certificate.json");

    RunManifest man;
    man.config_echo = cfg;
    man.artifact_version = kVersion;
    man.run_id = run_id_of(cfg);
    man.created_utc = utc_timestamp_now();
    man.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    man.output_paths = {"trajectory.csv", "estimates.json", "certificate.json"};
    man.write(outdir / "manifest.json");

    bool invariants = cert.pass();
    for (const auto& d : rung.trajectory.steps)
      if (std::fabs(d.area / kTotalArea - 1.0) > 1e-6) invariants = false;
    std::printf("run-flow: T = %g reached, run id %s, %s\n", plan.flow.T, man.run_id.c_str(),
                invariants ? "invariants held" : "INVARIANT VIOLATION");
    return invariants ? 0 : 1;
  } catch (const FlowError& e) {
    std::fprintf(stderr, "error: solver: %s (t = %.17g)\n", e.what(), e.t_fail);
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}

int cmd_cascade(const std::string& config_path, std::size_t jobs) {
  Config cfg;
  CascadePlan plan;
  try {
    cfg = Config::parse_file(config_path);
    plan = plan_from_config(cfg, true);
    plan.validate();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: config: %s\n", e.what());
    return 2;
  }
  const fs::path outdir = cfg.get_or("output.dir", "coneflow_cascade");
  const auto t0 = std::chrono::steady_clock::now();
  try {
    CascadeRecord rec = run_cascade(plan, jobs);
    Verdict v = verdict(rec);
    write_cascade_record(rec, v, outdir);
    RunManifest man;
    man.config_echo = cfg;
    man.artifact_version = kVersion;
    man.run_id = run_id_of(cfg);
    man.created_utc = utc_timestamp_now();
    man.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& r : rec.rungs) {
      char sub[64];
      std::snprintf(sub, sizeof(sub), "rung_%02zu_eps_%g", size_t(&r - rec.rungs.data()), r.eps);
      man.output_paths.push_back(sub);
    }
    man.output_paths.push_back("verdict.json");
    man.write(outdir / "manifest.json");
    for (const auto& c : v.checks)
      std::printf("  [%s] %s: %s\n", c.pass ? "pass" : "FAIL", c.name.c_str(), c.detail.c_str());
    std::printf("cascade: %zu rungs, verdict %s, run id %s\n", rec.rungs.size(),
                v.pass ? "pass" : "FAIL", man.run_id.c_str());
    return v.pass ? 0 : 1;
  } catch (const FlowError& e) {
    std::fprintf(stderr, "error: solver: %s (t = %.17g)\n", e.what(), e.t_fail);
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coneflow: regularized conical Ricci-flow lab on the two-point football"};
  app.require_subcommand(1);

  auto* polar = app.add_subcommand("polar-check", "certify the polar normal form bounds");
  std::vector<double> betas{0.5};
  std::vector<double> epss{1e-3};
  double rho_max = 1.0, step = 1e-3;
  std::string polar_out = "polar_out";
  polar->add_option("--beta", betas, "cone angle parameter(s)")->expected(-1);
  polar->add_option("--eps", epss, "regularization value(s), repeatable")->expected(-1);
  polar->add_option("--rho-max", rho_max, "chart radius");
  polar->add_option("--step", step, "integrator step");
  polar->add_option("--out", polar_out, "output directory");

  auto* runf = app.add_subcommand("run-flow", "smooth the initial metric and run one flow");
  std::string run_config;
  runf->add_option("--config", run_config, "key=value config file")->required();

  auto* casc = app.add_subcommand("cascade", "run the regularization ladder and verdict");
  std::string casc_config;
  std::size_t jobs = default_jobs();
  casc->add_option("--config", casc_config, "key=value config file")->required();
  casc->add_option("--jobs", jobs, "concurrent rungs (default: CONEFLOW_JOBS or 1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return 0;  // --help
    std::fprintf(stderr, "error: arguments: %s\n", e.what());
    return 2;
  }

  try {
    if (polar->parsed()) {
      for (double b : betas)
        if (!(b > 0.0) || b > 1.0) {
          std::fprintf(stderr, "error: arguments: beta must lie in (0,1]\n");
          return 2;
        }
      for (double e : epss)
        if (e < 0.0) {
          std::fprintf(stderr, "error: arguments: eps must be nonnegative\n");
          return 2;
        }
      return cmd_polar_check(betas, epss, rho_max, step, polar_out);
    }
    if (runf->parsed()) return cmd_run_flow(run_config);
    if (casc->parsed()) return cmd_cascade(casc_config, jobs);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 2;
}

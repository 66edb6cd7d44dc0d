// conveyor: command-line front end for simulations, orbit searches,
// continuation, figure data and self-checks.
//
// Exit codes: 0 ok, 1 a verify check failed, 2 bad flags, 3 numerical failure.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "conveyor/conveyor.hpp"

#ifndef CONVEYOR_VERSION
#define CONVEYOR_VERSION "dev"
#endif

using namespace conveyor;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by every subcommand.
struct Common {
  std::string envelope = "lorentzian";
  double z0 = 0.37;
  double f0 = 0.8;
  double b = 100.0;
  double k_pi = 2.66;
  double wavelength_nm = 580.0;
  double rtol = 1e-10;
  double atol = 1e-12;
  std::string out;
  bool dry_run = false;
  CLI::Option* z0_opt = nullptr;
  CLI::Option* envelope_opt = nullptr;
};

void add_common(CLI::App* sub, Common& c, bool with_envelope = true) {
  if (with_envelope)
    c.envelope_opt = sub->add_option("--envelope", c.envelope, "plane | lorentzian | gaussian")
                         ->check(CLI::IsMember({"plane", "lorentzian", "gaussian"}))
                         ->capture_default_str();
  c.z0_opt = sub->add_option("--z0", c.z0, "envelope width in wavelengths")->capture_default_str();
  sub->add_option("--f0", c.f0, "force scale F0 in wavelength^2/s")->capture_default_str();
  sub->add_option("--b", c.b, "conveyor rate b in rad/s")->capture_default_str();
  sub->add_option("--k-pi", c.k_pi, "wavenumber k in units of pi per wavelength")->capture_default_str();
  sub->add_option("--wavelength-nm", c.wavelength_nm, "wavelength in nm (reporting only)")->capture_default_str();
  sub->add_option("--rtol", c.rtol, "integrator relative tolerance")->capture_default_str();
  sub->add_option("--atol", c.atol, "integrator absolute tolerance")->capture_default_str();
  sub->add_option("--out", c.out, "output CSV path");
  sub->add_flag("--dry-run", c.dry_run, "print the manifest and exit");
}

ConveyorParams build_params(const Common& c, std::optional<EnvelopeKind> forced = std::nullopt) {
  const EnvelopeKind kind = forced ? *forced : parse_envelope_kind(c.envelope);
  if (!forced && kind == EnvelopeKind::Plane && c.z0_opt && c.z0_opt->count() > 0)
    throw UsageError("--z0 has no meaning for the plane envelope (f == 1); drop it or pick another envelope");
  ConveyorParams p;
  p.f0 = c.f0;
  p.b = c.b;
  p.k = c.k_pi * std::numbers::pi;
  p.wavelength_nm = c.wavelength_nm;
  if (kind == EnvelopeKind::Plane) {
    p.envelope = EnvelopeSpec::plane();
  } else {
    if (!(c.z0 > 0.0)) throw UsageError("--z0 must be positive");
    p.envelope = {kind, c.z0};
  }
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return p;
}

IntegratorConfig build_config(const Common& c) {
  IntegratorConfig cfg;
  cfg.rtol = c.rtol;
  cfg.atol = c.atol;
  if (!(cfg.rtol > 0.0) || !(cfg.atol > 0.0)) throw UsageError("--rtol and --atol must be positive");
  return cfg;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Csv {
 public:
  Csv(const std::string& path, const std::string& header) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open " + path);
    out_ << header << '\n';
  }
  void row(std::initializer_list<double> values) {
    bool first = true;
    for (double v : values) {
      if (!first) out_ << ',';
      out_ << fmt(v);
      first = false;
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

json params_json(const ConveyorParams& p) {
  json j;
  j["envelope"] = std::string(to_string(p.envelope.kind));
  if (p.envelope.kind != EnvelopeKind::Plane) j["z0_lambda"] = p.envelope.z0;
  j["f0"] = p.f0;
  j["f0_unit"] = "wavelength^2/s";
  j["f0_unit_note"] = "the reference parameter set prints F0 as 0.8 pm/s; it is interpreted here as 0.8 lambda^2/s, "
                      "which keeps z' = F_z dimensionally consistent";
  j["b_rad_per_s"] = p.b;
  j["k_rad_per_lambda"] = p.k;
  j["k_over_pi"] = p.k / std::numbers::pi;
  j["wavelength_nm"] = p.wavelength_nm;
  j["period_s"] = p.period();
  return j;
}

json config_json(const IntegratorConfig& cfg, double T) {
  const auto ctl = resolve(cfg, T);
  return {{"method", "dormand-prince 5(4), dense output"},
          {"rtol", ctl.rtol},
          {"atol", ctl.atol},
          {"max_step", ctl.max_step},
          {"initial_step", ctl.initial_step}};
}

class Manifest {
 public:
  Manifest(std::string command, const ConveyorParams& p, const IntegratorConfig& cfg) : start_(clock::now()) {
    j_["command"] = std::move(command);
    j_["tool_version"] = CONVEYOR_VERSION;
    j_["parameters"] = params_json(p);
    j_["integrator"] = config_json(cfg, p.period());
    j_["outputs"] = json::array();
  }
  void output(const std::string& path) { j_["outputs"].push_back(path); }
  json& extra() { return j_["details"]; }

  // Prints to stdout in dry-run mode, otherwise writes next to the first output.
  void finish(bool dry_run) {
    if (dry_run) {
      j_["dry_run"] = true;
      std::cout << j_.dump(2) << '\n';
      return;
    }
    j_["wall_clock_s"] = std::chrono::duration<double>(clock::now() - start_).count();
    const std::string path = j_["outputs"].empty() ? std::string("conveyor.manifest.json")
                                                   : j_["outputs"][0].get<std::string>() + ".manifest.json";
    std::ofstream f(path, std::ios::binary);
    f << j_.dump(2) << '\n';
  }

 private:
  using clock = std::chrono::steady_clock;
  json j_;
  clock::time_point start_;
};

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return v;
}

void write_path_rows(Csv& csv, const ConveyorParams& p, const Trajectory& path, double stride) {
  auto emit = [&](double t, double z) { csv.row({t, z, force(p, t, z), potential(p, t, z)}); };
  if (stride <= 0.0) {
    for (const auto& s : path.samples()) emit(s.t, s.z);
    return;
  }
  const double t0 = path.t_begin(), t1 = path.t_end();
  const auto n = static_cast<long long>(std::floor((t1 - t0) / stride * (1.0 + 1e-12)));
  for (long long i = 0; i <= n; ++i) {
    const double t = std::min(t1, t0 + static_cast<double>(i) * stride);
    emit(t, path.at(t));
  }
  if (t0 + static_cast<double>(n) * stride < t1 * (1.0 - 1e-15)) emit(t1, path.z_end());
}

// ---- simulate ---------------------------------------------------------------

struct SimulateFlags {
  Common c;
  double zi = 1.0;
  double t_end = 5.0;
  double stride = 0.0;
};

int cmd_simulate(const SimulateFlags& f) {
  const auto p = build_params(f.c);
  const auto cfg = build_config(f.c);
  if (!(f.t_end > 0.0)) throw UsageError("--t-end must be positive");
  if (f.stride < 0.0) throw UsageError("--stride must be non-negative");
  const std::string out = f.c.out.empty() ? "trajectory.csv" : f.c.out;
  Manifest m("simulate", p, cfg);
  m.output(out);
  m.extra() = {{"z_i", f.zi}, {"t_end_s", f.t_end}, {"stride_s", f.stride}, {"columns", "t_s,z_lambda,dzdt,V"}};
  if (f.c.dry_run) {
    m.finish(true);
    return 0;
  }
  const auto path = integrate(p, f.zi, 0.0, f.t_end, cfg);
  Csv csv(out, "t_s,z_lambda,dzdt,V");
  write_path_rows(csv, p, path, f.stride);
  m.extra()["steps"] = path.step_count();
  m.extra()["z_end"] = path.z_end();
  m.finish(false);
  return 0;
}

// ---- find-periodic ------------------------------------------------------------

struct FindFlags {
  Common c;
  std::optional<double> z_lo, z_hi;
  int n_grid = 64;
};

std::pair<double, double> default_range(EnvelopeKind kind) {
  return kind == EnvelopeKind::Lorentzian ? std::pair{-4.5, 4.5} : std::pair{-1.0, 1.0};
}

int cmd_find_periodic(const FindFlags& f) {
  const auto p = build_params(f.c);
  const auto cfg = build_config(f.c);
  const auto [dlo, dhi] = default_range(p.envelope.kind);
  const double lo = f.z_lo.value_or(dlo), hi = f.z_hi.value_or(dhi);
  if (lo > hi) throw UsageError("--z-lo must not exceed --z-hi");
  if (f.n_grid < 2) throw UsageError("--n-grid must be at least 2");
  const std::string out = f.c.out.empty() ? "orbits.csv" : f.c.out;
  Manifest m("find-periodic", p, cfg);
  m.output(out);
  m.extra() = {{"z_lo", lo}, {"z_hi", hi}, {"n_grid", f.n_grid}, {"columns", "z_star,multiplier,residual,sup_norm"}};
  if (f.c.dry_run) {
    m.finish(true);
    return 0;
  }

  Csv csv(out, "z_star,multiplier,residual,sup_norm");
  ScanReport rep;
  if (lo == hi) {
    std::cerr << "warning: empty scan range [" << fmt(lo) << ", " << fmt(hi) << "]; no orbits searched\n";
  } else {
    rep = scan_report(p, lo, hi, f.n_grid, cfg);
    if (rep.certified.empty()) std::cerr << "warning: no certified periodic orbit in the scanned range\n";
  }
  for (const auto& o : rep.certified) csv.row({o.z_star, o.multiplier, o.residual, o.sup_norm});
  m.extra()["certified"] = rep.certified.size();
  m.extra()["force_free_candidates"] = rep.degenerate.size();
  if (!rep.certified.empty()) m.extra()["boundedness_audit"] = boundedness_audit(rep.certified);
  m.finish(false);
  return 0;
}

// ---- continue -----------------------------------------------------------------

int cmd_continue(const Common& c) {
  const auto p = build_params(c);
  const auto cfg = build_config(c);
  const std::string out = c.out.empty() ? "branch.csv" : c.out;
  Manifest m("continue", p, cfg);
  m.output(out);
  const ContinuationOptions copts;
  m.extra() = {{"lambda_start", copts.lambda_start},
               {"initial_step", copts.initial_step},
               {"max_step", copts.max_step},
               {"min_step", copts.min_step},
               {"columns", "lambda_h,z0,residual,sup_norm"}};
  if (c.dry_run) {
    m.finish(true);
    return 0;
  }
  auto write = [&](const ContinuationTrace& trace) {
    Csv csv(out, "lambda_h,z0,residual,sup_norm");
    for (const auto& s : trace.steps) csv.row({s.lambda_h, s.z0, s.residual, s.sup_norm});
    m.extra()["converged"] = trace.converged;
    m.extra()["attempts"] = trace.attempts;
    if (!trace.steps.empty()) m.extra()["rho_audit"] = rho_audit(trace);
    m.finish(false);
  };
  try {
    write(continue_to_one(p, cfg, copts));
  } catch (const ContinuationStall& e) {
    write(e.trace());
    throw;
  }
  return 0;
}

// ---- reproduce ------------------------------------------------------------------

struct ReproduceFlags {
  Common c;
  std::string figure;
  std::optional<double> t_end;
  double stride = 0.0;
};

struct Family {
  std::vector<double> starts;
  double settle;  // seconds integrated before the recorded window
  double window;  // seconds recorded
};

int reproduce_trajectories(const ReproduceFlags& f, EnvelopeKind kind, const Family& fam, const std::string& out) {
  const auto p = build_params(f.c, kind);
  const auto cfg = build_config(f.c);
  Manifest m("reproduce " + f.figure, p, cfg);
  m.output(out);
  m.extra() = {{"initial_conditions", fam.starts},
               {"settle_s", fam.settle},
               {"window_s", fam.window},
               {"stride_s", f.stride},
               {"columns", "z_i,t_s,z_lambda,dzdt,V"}};
  if (f.c.dry_run) {
    m.finish(true);
    return 0;
  }

  std::vector<std::optional<Trajectory>> paths(fam.starts.size());
  parallel_for(paths.size(), [&](std::size_t i) {
    const double z_settled = fam.settle > 0.0 ? advance(p, fam.starts[i], 0.0, fam.settle, cfg) : fam.starts[i];
    paths[i] = integrate(p, z_settled, fam.settle, fam.settle + fam.window, cfg);
  });
  std::ofstream os(out, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + out);
  os << "z_i,t_s,z_lambda,dzdt,V\n";
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto& path = *paths[i];
    auto emit = [&](double t, double z) {
      os << fmt(fam.starts[i]) << ',' << fmt(t) << ',' << fmt(z) << ',' << fmt(force(p, t, z)) << ','
         << fmt(potential(p, t, z)) << '\n';
    };
    if (f.stride <= 0.0) {
      for (const auto& s : path.samples()) emit(s.t, s.z);
    } else {
      for (double t = path.t_begin(); t <= path.t_end(); t += f.stride) emit(t, path.at(t));
    }
  }
  json finals = json::array();
  for (const auto& path : paths) finals.push_back(path->z_end());
  m.extra()["z_final"] = finals;
  m.finish(false);
  return 0;
}

int reproduce_potential(const ReproduceFlags& f, EnvelopeKind kind, double half_width, const std::string& out) {
  const auto p = build_params(f.c, kind);
  const auto cfg = build_config(f.c);
  Manifest m("reproduce " + f.figure, p, cfg);
  m.output(out);
  m.extra() = {{"t_s", 0.0}, {"z_range", {-half_width, half_width}}, {"points", 2001}, {"columns", "z_lambda,V"}};
  if (f.c.dry_run) {
    m.finish(true);
    return 0;
  }
  Csv csv(out, "z_lambda,V");
  for (double z : linspace(-half_width, half_width, 2001)) csv.row({z, potential(p, 0.0, z)});
  // the dotted convergence line of the figure
  const auto orbit = find_periodic(p, 0.0, cfg);
  m.extra()["convergence_z_star"] = orbit.z_star;
  m.finish(false);
  return 0;
}

int reproduce_plane_limit(const ReproduceFlags& f, const std::string& out) {
  const auto p = build_params(f.c, EnvelopeKind::Plane);
  const auto cfg = build_config(f.c);
  const double t = f.t_end.value_or(1500.0);
  if (!(t > 0.0)) throw UsageError("--t-end must be positive");
  Manifest m("reproduce plane-limit", p, cfg);
  m.output(out);
  m.extra() = {{"z_i", 0.0}, {"t_s", t}, {"columns", "t_s,z_analytic,z_numeric,v_c"}};
  if (f.c.dry_run) {
    m.finish(true);
    return 0;
  }
  const auto sol = make_plane_solution(p, 0.0);
  const double za = plane_solution(sol, t);
  const double zn = advance(p, 0.0, 0.0, t, cfg);
  Csv csv(out, "t_s,z_analytic,z_numeric,v_c");
  csv.row({t, za, zn, drift_velocity(p).v_c});
  m.extra()["regime"] = std::string(to_string(sol.regime));
  m.finish(false);
  return 0;
}

int cmd_reproduce(const ReproduceFlags& f) {
  const std::string out = f.c.out.empty() ? f.figure + ".csv" : f.c.out;
  if (f.t_end && !(*f.t_end > 0.0)) throw UsageError("--t-end must be positive");
  const double T = 4.0 * std::numbers::pi / f.c.b;
  if (f.figure == "fig1") return reproduce_trajectories(f, EnvelopeKind::Lorentzian, {linspace(-4.5, 4.5, 10), 0.0, f.t_end.value_or(5.0)}, out);
  if (f.figure == "fig2")
    return reproduce_trajectories(f, EnvelopeKind::Lorentzian, {linspace(-4.5, 4.5, 10), f.t_end.value_or(1500.0), 4.0 * T}, out);
  if (f.figure == "fig3") return reproduce_trajectories(f, EnvelopeKind::Gaussian, {linspace(-3.0, 3.0, 13), 0.0, f.t_end.value_or(5.0)}, out);
  if (f.figure == "fig4")
    return reproduce_trajectories(f, EnvelopeKind::Gaussian, {linspace(-1.0, 1.0, 9), f.t_end.value_or(1500.0), 4.0 * T}, out);
  if (f.figure == "pot1") return reproduce_potential(f, EnvelopeKind::Lorentzian, 4.5, out);
  if (f.figure == "pot2") return reproduce_potential(f, EnvelopeKind::Gaussian, 3.0, out);
  return reproduce_plane_limit(f, out);
}

// ---- verify ---------------------------------------------------------------------

int cmd_verify(const Common& c) {
  const auto cfg = build_config(c);
  const auto base = build_params(c, EnvelopeKind::Lorentzian);
  const std::string out = c.out.empty() ? "verify.json" : c.out;
  json report;
  report["tool_version"] = CONVEYOR_VERSION;
  report["parameters"] = params_json(base);
  report["checks"] = json::array();
  if (c.dry_run) {
    report["dry_run"] = true;
    std::cout << report.dump(2) << '\n';
    return 0;
  }
  const auto start = std::chrono::steady_clock::now();
  bool all = true;
  auto check = [&](std::string name, bool pass, json detail) {
    all = all && pass;
    report["checks"].push_back({{"name", std::move(name)}, {"pass", pass}, {"detail", std::move(detail)}});
  };

  for (auto kind : {EnvelopeKind::Plane, EnvelopeKind::Lorentzian, EnvelopeKind::Gaussian}) {
    const auto p = build_params(c, kind);
    const auto s = fixed_point_scan(p, -25.0, 25.0, 1001);
    check("fixed_point_scan/" + std::string(to_string(kind)), s.empty(),
          {{"fixed_points", s.fixed_points.size()}, {"underflow_flags", s.underflow_flags.size()}});
  }
  for (auto kind : {EnvelopeKind::Lorentzian, EnvelopeKind::Gaussian}) {
    const auto p = build_params(c, kind);
    const std::string tag(to_string(kind));
    const auto orbit = find_periodic(p, 0.0, cfg);
    const auto e = identity_energy(orbit);
    const auto fi = identity_force(orbit);
    const auto mc = multiplier_cross_check(orbit);
    check("identity_energy/" + tag, e.rel_residual < 1e-6, {{"lhs", e.lhs}, {"rhs", e.rhs}, {"rel_residual", e.rel_residual}});
    check("identity_force/" + tag, fi.rel_residual < 1e-6, {{"lhs", fi.lhs}, {"rhs", fi.rhs}, {"rel_residual", fi.rel_residual}});
    check("multiplier_cross_check/" + tag, mc.rel_error < 1e-4,
          {{"variational", mc.variational}, {"finite_difference", mc.finite_difference}, {"rel_error", mc.rel_error}});
  }
  const auto beta = beta_bound_property(base.period(), 100);
  check("linear_bvp_beta_bound", beta.violations == 0 && beta.max_boundary_error < 1e-12,
        {{"cases", beta.cases},
         {"violations", beta.violations},
         {"beta", linear_bvp_beta(base.period())},
         {"max_ratio", beta.max_ratio},
         {"max_boundary_error", beta.max_boundary_error}});

  report["all_pass"] = all;
  report["wall_clock_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ofstream(out, std::ios::binary) << report.dump(2) << '\n';
  for (const auto& ch : report["checks"])
    std::cout << (ch["pass"].get<bool>() ? "PASS " : "FAIL ") << ch["name"].get<std::string>() << '\n';
  return all ? 0 : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optical conveyor belt dynamics: trajectories, periodic orbits and checks", "conveyor"};
  app.set_version_flag("--version", CONVEYOR_VERSION);
  app.require_subcommand(1);

  SimulateFlags sim;
  auto* s_sim = app.add_subcommand("simulate", "integrate one trajectory and write t_s,z_lambda,dzdt,V");
  add_common(s_sim, sim.c);
  s_sim->add_option("--zi", sim.zi, "initial position in wavelengths")->capture_default_str();
  s_sim->add_option("--t-end", sim.t_end, "final time in seconds")->capture_default_str();
  s_sim->add_option("--stride", sim.stride, "output spacing in seconds; 0 writes every integrator step")
      ->capture_default_str();

  FindFlags fp;
  auto* s_find = app.add_subcommand("find-periodic", "scan for certified T-periodic orbits");
  add_common(s_find, fp.c);
  s_find->add_option("--z-lo", fp.z_lo, "lower end of the scan range");
  s_find->add_option("--z-hi", fp.z_hi, "upper end of the scan range");
  s_find->add_option("--n-grid", fp.n_grid, "number of grid points")->capture_default_str();

  Common cont;
  auto* s_cont = app.add_subcommand("continue", "follow the homotopy branch from lambda_h = 0.01 to 1");
  add_common(s_cont, cont);

  ReproduceFlags rep;
  auto* s_rep = app.add_subcommand("reproduce", "emit the data series behind a figure");
  add_common(s_rep, rep.c, false);
  s_rep->add_option("figure", rep.figure, "fig1 | fig2 | fig3 | fig4 | pot1 | pot2 | plane-limit")
      ->required()
      ->check(CLI::IsMember({"fig1", "fig2", "fig3", "fig4", "pot1", "pot2", "plane-limit"}));
  s_rep->add_option("--t-end", rep.t_end, "horizon (fig1/fig3), settling time (fig2/fig4) or evaluation time (plane-limit)");
  s_rep->add_option("--stride", rep.stride, "output spacing in seconds; 0 writes every integrator step");

  Common ver;
  auto* s_ver = app.add_subcommand("verify", "run the numerical certificates; exit 0 iff all pass");
  add_common(s_ver, ver, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*s_sim) return cmd_simulate(sim);
    if (*s_find) return cmd_find_periodic(fp);
    if (*s_cont) return cmd_continue(cont);
    if (*s_rep) return cmd_reproduce(rep);
    if (*s_ver) return cmd_verify(ver);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const StepSizeUnderflow& e) {
    std::cerr << "integration failed: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const NoConvergence& e) {
    std::cerr << "integration failed: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ContinuationStall& e) {
    std::cerr << "integration failed: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}

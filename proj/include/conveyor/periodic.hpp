#pragma once

// T-periodic solutions as fixed points of the period map P(z0) = z(T; 0, z0).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "conveyor/integrate.hpp"
#include "conveyor/model.hpp"
#include "conveyor/parallel.hpp"

namespace conveyor {

class NoConvergence : public std::runtime_error {
 public:
  NoConvergence(int iterations, double last_residual)
      : std::runtime_error("periodic shooting did not converge after " + std::to_string(iterations) +
                           " iterations (last |R| = " + std::to_string(last_residual) + ")"),
        iterations_(iterations),
        last_residual_(last_residual) {}
  int iterations() const { return iterations_; }
  double last_residual() const { return last_residual_; }

 private:
  int iterations_;
  double last_residual_;
};

class EmptyAudit : public std::invalid_argument {
 public:
  EmptyAudit() : std::invalid_argument("audit over an empty set") {}
};

struct ShootingOptions {
  double residual_tol = 1e-9;   // certificate on |P(z) - z|
  double location_tol = 1e-7;   // bound on |R| / |1 - mu|, the distance to the true fixed point
  int max_newton = 50;
  int max_halvings = 20;
  int max_bisection = 200;
  int relax_periods = 100000;   // forward iterations of P tried by find_periodic after Newton fails
};

/// Fixed point of a period map together with its multiplier dP/dz0.
struct PeriodMapRoot {
  double z0 = 0.0;
  double image = 0.0;
  double multiplier = 1.0;
  int evaluations = 0;
  bool bisected = false;
  double residual() const { return std::abs(image - z0); }
};

struct Bracket {
  double lo;
  double hi;
};

namespace detail {

struct MapEval {
  double z;
  double image;
  double multiplier;
  double r() const { return image - z; }
  double dr() const { return multiplier - 1.0; }
};

class BracketTracker {
 public:
  explicit BracketTracker(std::optional<Bracket> initial) {
    if (initial) {
      have_ = true;
      lo_ = std::min(initial->lo, initial->hi);
      hi_ = std::max(initial->lo, initial->hi);
    }
  }

  void seed(double z_lo, double r_lo, double z_hi, double r_hi) {
    lo_ = z_lo;
    r_lo_ = r_lo;
    hi_ = z_hi;
    r_hi_ = r_hi;
    seeded_ = true;
  }

  void observe(const MapEval& e) {
    const double r = e.r();
    if (have_ && seeded_) {
      if (e.z > lo_ && e.z < hi_) {
        if ((r < 0.0) == (r_lo_ < 0.0)) {
          lo_ = e.z;
          r_lo_ = r;
        } else {
          hi_ = e.z;
          r_hi_ = r;
        }
      }
      return;
    }
    if (!have_) {
      // Pair the newest point with the nearest earlier point of opposite sign.
      std::optional<MapEval> best;
      for (const auto& old : history_)
        if ((old.r() < 0.0) != (r < 0.0) && (!best || std::abs(old.z - e.z) < std::abs(best->z - e.z))) best = old;
      history_.push_back(e);
      if (best && r != 0.0 && best->r() != 0.0) {
        have_ = true;
        const MapEval a = best->z < e.z ? *best : e;
        const MapEval b = best->z < e.z ? e : *best;
        seed(a.z, a.r(), b.z, b.r());
      }
    }
  }

  bool usable() const { return have_ && seeded_; }
  bool needs_seed() const { return have_ && !seeded_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double r_lo() const { return r_lo_; }
  bool contains(double z) const { return z > lo_ && z < hi_; }

 private:
  bool have_ = false;
  bool seeded_ = false;
  double lo_ = 0.0, hi_ = 0.0, r_lo_ = 0.0, r_hi_ = 0.0;
  std::vector<MapEval> history_;
};

}  // namespace detail

/// Damped Newton iteration on R(z) = P(z) - z with R' = dP/dz0 - 1 from the
/// variational equation. A sign change of R, either supplied or discovered
/// along the way, confines the iterates and enables a bisection fallback.
template <class Rhs, class RhsDz>
PeriodMapRoot solve_period_map(Rhs&& rhs, RhsDz&& rhs_dz, double period, double guess, const IntegratorConfig& cfg,
                               const ShootingOptions& opts = {}, std::optional<Bracket> bracket = std::nullopt,
                               double max_newton_step = std::numeric_limits<double>::infinity()) {
  int evaluations = 0;
  auto eval = [&](double z) {
    ++evaluations;
    const auto fw = flow_with_sensitivity(rhs, rhs_dz, z, period, cfg);
    return detail::MapEval{z, fw.z, fw.derivative};
  };
  auto accepted = [&](const detail::MapEval& e) {
    const double r = std::abs(e.r());
    return r < opts.residual_tol && (r == 0.0 || r <= opts.location_tol * std::abs(e.dr()));
  };
  // Once accepted, a few more Newton steps while |R| keeps shrinking pin the
  // root down to the integration noise floor.
  auto result = [&](detail::MapEval e, bool bisected) {
    for (int polish = 0; polish < 4 && e.r() != 0.0 && e.dr() != 0.0; ++polish) {
      const double step = -e.r() / e.dr();
      if (std::abs(step) <= 1e-14 * (1.0 + std::abs(e.z))) break;
      const auto next = eval(e.z + step);
      if (!(std::abs(next.r()) < std::abs(e.r()))) break;
      e = next;
    }
    return PeriodMapRoot{e.z, e.image, e.multiplier, evaluations, bisected};
  };

  detail::BracketTracker tracker(bracket);
  if (tracker.needs_seed()) {
    const auto a = eval(bracket->lo), b = eval(bracket->hi);
    if (accepted(a)) return result(a, false);
    if (accepted(b)) return result(b, false);
    if ((a.r() < 0.0) == (b.r() < 0.0)) throw std::invalid_argument("solve_period_map: bracket without sign change");
    tracker.seed(std::min(a.z, b.z), a.z < b.z ? a.r() : b.r(), std::max(a.z, b.z), a.z < b.z ? b.r() : a.r());
  }

  detail::MapEval cur = eval(guess);
  tracker.observe(cur);
  int newton_steps = 0;
  for (; newton_steps < opts.max_newton; ++newton_steps) {
    if (accepted(cur)) return result(cur, false);
    const double dr = cur.dr();
    if (dr == 0.0 || !std::isfinite(dr) || !std::isfinite(cur.r())) break;
    double step = std::clamp(-cur.r() / dr, -max_newton_step, max_newton_step);
    if (tracker.usable() && !tracker.contains(cur.z + step)) {
      cur = eval(0.5 * (tracker.lo() + tracker.hi()));
      tracker.observe(cur);
      continue;
    }
    bool improved = false;
    for (int halving = 0; halving <= opts.max_halvings; ++halving) {
      const auto trial = eval(cur.z + step);
      tracker.observe(trial);
      if (std::abs(trial.r()) < std::abs(cur.r()) || accepted(trial)) {
        cur = trial;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  if (accepted(cur)) return result(cur, false);

  if (tracker.usable()) {
    double lo = tracker.lo(), hi = tracker.hi();
    bool lo_negative = tracker.r_lo() < 0.0;
    for (int i = 0; i < opts.max_bisection; ++i) {
      const auto mid = eval(0.5 * (lo + hi));
      const double r = std::abs(mid.r());
      if (accepted(mid) || (r < opts.residual_tol && 0.5 * (hi - lo) <= opts.location_tol)) return result(mid, true);
      if (mid.r() == 0.0) return result(mid, true);
      if ((mid.r() < 0.0) == lo_negative)
        lo = mid.z;
      else
        hi = mid.z;
      cur = mid;
    }
  }
  throw NoConvergence(newton_steps, std::abs(cur.r()));
}

/// A certified fixed point of the period map with one period of its orbit.
struct PeriodicOrbit {
  double z_star = 0.0;
  double period = 0.0;
  double multiplier = 1.0;
  double residual = 0.0;     // |P(z_star) - z_star|
  double sup_norm = 0.0;     // max |z(t)| over [0, T]
  double max_abs_force = 0.0;
  bool force_free = false;   // neutral and force-free: stationary, not a robust orbit
  Trajectory path;

  /// Periodic extension z(t + nT) = z(t).
  double at(double t) const {
    double phase = t - std::floor(t / period) * period;
    phase = std::clamp(phase, 0.0, period);
    return path.at(phase);
  }
};

namespace detail {

template <class Rhs>
void path_extrema(const Trajectory& path, Rhs&& rhs, double& sup_norm, double& max_rhs) {
  sup_norm = 0.0;
  max_rhs = 0.0;
  const auto s = path.samples();
  for (std::size_t i = 0; i < s.size(); ++i) {
    sup_norm = std::max(sup_norm, std::abs(s[i].z));
    max_rhs = std::max(max_rhs, std::abs(rhs(s[i].t, s[i].z)));
    if (i + 1 == s.size()) break;
    constexpr int sub = 8;
    for (int j = 1; j < sub; ++j) {
      const double t = s[i].t + (s[i + 1].t - s[i].t) * j / sub;
      const double z = path.at(t);
      sup_norm = std::max(sup_norm, std::abs(z));
      max_rhs = std::max(max_rhs, std::abs(rhs(t, z)));
    }
  }
}

}  // namespace detail

/// Builds the orbit record for a converged root, re-checking the residual on
/// the plain (non-variational) flow and polishing it if needed.
inline PeriodicOrbit make_orbit(const ConveyorParams& p, const PeriodMapRoot& root, const IntegratorConfig& cfg,
                                const ShootingOptions& opts = {}) {
  const double T = p.period();
  double z = root.z0;
  Trajectory path = integrate(p, z, 0.0, T, cfg);
  for (int polish = 0; polish < 3 && std::abs(path.z_end() - z) >= opts.residual_tol; ++polish) {
    const double dr = root.multiplier - 1.0;
    if (dr == 0.0) break;
    z -= (path.z_end() - z) / dr;
    path = integrate(p, z, 0.0, T, cfg);
  }
  PeriodicOrbit orbit{z, T, root.multiplier, std::abs(path.z_end() - z), 0.0, 0.0, false, std::move(path)};
  if (orbit.residual >= opts.residual_tol) throw NoConvergence(root.evaluations, orbit.residual);
  detail::path_extrema(orbit.path, [&p](double t, double zz) { return force(p, t, zz); }, orbit.sup_norm,
                       orbit.max_abs_force);
  orbit.force_free = std::abs(orbit.multiplier - 1.0) < 1e-6 && orbit.max_abs_force < 1e-9;
  return orbit;
}

inline PeriodMapRoot solve_conveyor_period_map(const ConveyorParams& p, double guess, const IntegratorConfig& cfg,
                                               const ShootingOptions& opts, std::optional<Bracket> bracket) {
  return solve_period_map([&p](double t, double z) { return force(p, t, z); },
                          [&p](double t, double z) { return force_dz(p, t, z); }, p.period(), guess, cfg, opts,
                          bracket, std::numbers::pi / p.k);
}

/// Newton shooting from `z_guess`. When Newton fails, or only reaches a
/// force-free stationary point, the period map is iterated forward from the
/// guess and Newton is restarted once the iterates contract geometrically.
/// Throws NoConvergence when neither stage yields an orbit.
inline PeriodicOrbit find_periodic(const ConveyorParams& p, double z_guess, const IntegratorConfig& cfg = {},
                                   const ShootingOptions& opts = {}) {
  p.validate();
  std::optional<PeriodicOrbit> newton;
  int evaluations = 0;
  try {
    newton = make_orbit(p, solve_conveyor_period_map(p, z_guess, cfg, opts, std::nullopt), cfg, opts);
    if (!newton->force_free) return *std::move(newton);
  } catch (const NoConvergence& e) {
    evaluations = e.iterations();
  }

  double z = z_guess;
  double r_prev = 0.0;
  double r = 0.0;
  int last_attempt = -1000;
  for (int n = 0; n < opts.relax_periods; ++n) {
    const double image = flow_T(p, z, cfg);
    r = image - z;
    if (r == 0.0) break;
    if (n > 0) {
      const double ratio = r / r_prev;
      const double remaining = std::abs(r) * ratio / (1.0 - ratio);
      if (ratio > 0.0 && ratio < 1.0 && remaining < 0.05 && n - last_attempt >= 50) {
        last_attempt = n;
        try {
          auto orbit = make_orbit(p, solve_conveyor_period_map(p, image, cfg, opts, std::nullopt), cfg, opts);
          if (!orbit.force_free) return orbit;
        } catch (const NoConvergence&) {
        }
      }
    }
    z = image;
    r_prev = r;
  }
  if (newton) return *std::move(newton);
  throw NoConvergence(evaluations, std::abs(r));
}

struct ScanReport {
  std::vector<PeriodicOrbit> certified;   // sorted by z_star
  std::vector<PeriodicOrbit> degenerate;  // force-free candidates
};

inline constexpr double kOrbitDedupTol = 1e-6;

namespace detail {

inline std::vector<PeriodicOrbit> dedupe(std::vector<PeriodicOrbit> orbits) {
  std::sort(orbits.begin(), orbits.end(), [](const auto& a, const auto& b) { return a.z_star < b.z_star; });
  std::vector<PeriodicOrbit> out;
  for (auto& o : orbits) {
    if (!out.empty() && std::abs(o.z_star - out.back().z_star) < kOrbitDedupTol) {
      if (o.residual < out.back().residual) out.back() = std::move(o);
      continue;
    }
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace detail

/// Global search on a uniform grid: every sign change of R is solved inside
/// its bracket, and Newton is started from every grid point. Only orbits with
/// z_star inside [z_lo, z_hi] are reported.
inline ScanReport scan_report(const ConveyorParams& p, double z_lo, double z_hi, int n_grid,
                              const IntegratorConfig& cfg = {}, const ShootingOptions& opts = {}) {
  p.validate();
  if (!(z_lo < z_hi)) throw std::invalid_argument("scan_orbits requires z_lo < z_hi");
  if (n_grid < 2) throw std::invalid_argument("scan_orbits requires n_grid >= 2");
  const auto n = static_cast<std::size_t>(n_grid);
  std::vector<double> grid(n), residual(n);
  for (std::size_t i = 0; i < n; ++i) grid[i] = z_lo + (z_hi - z_lo) * static_cast<double>(i) / (n - 1);
  parallel_for(n, [&](std::size_t i) { residual[i] = flow_T(p, grid[i], cfg) - grid[i]; });

  struct Task {
    double guess;
    std::optional<Bracket> bracket;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i + 1 < n; ++i)
    if ((residual[i] < 0.0 && residual[i + 1] > 0.0) || (residual[i] > 0.0 && residual[i + 1] < 0.0))
      tasks.push_back({0.5 * (grid[i] + grid[i + 1]), Bracket{grid[i], grid[i + 1]}});
  for (double g : grid) tasks.push_back({g, std::nullopt});

  std::vector<std::optional<PeriodicOrbit>> found(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t i) {
    try {
      found[i] = make_orbit(p, solve_conveyor_period_map(p, tasks[i].guess, cfg, opts, tasks[i].bracket), cfg, opts);
    } catch (const NoConvergence&) {
    } catch (const StepSizeUnderflow&) {
    }
  });

  std::vector<PeriodicOrbit> certified, degenerate;
  const double slack = kOrbitDedupTol;
  for (auto& o : found) {
    if (!o || o->z_star < z_lo - slack || o->z_star > z_hi + slack) continue;
    (o->force_free ? degenerate : certified).push_back(std::move(*o));
  }
  return {detail::dedupe(std::move(certified)), detail::dedupe(std::move(degenerate))};
}

inline std::vector<PeriodicOrbit> scan_orbits(const ConveyorParams& p, double z_lo, double z_hi, int n_grid,
                                              const IntegratorConfig& cfg = {}, const ShootingOptions& opts = {}) {
  return scan_report(p, z_lo, z_hi, n_grid, cfg, opts).certified;
}

struct BasinOutcome {
  double z_i;
  double z_final;
  bool converged;
  double distance;  // to the nearest orbit at the same phase; +inf without orbits
};

inline constexpr double kBasinTol = 1e-3;

inline std::vector<BasinOutcome> basin_probe(const ConveyorParams& p, const std::vector<double>& initial_conditions,
                                             double horizon, const std::vector<PeriodicOrbit>& orbits,
                                             const IntegratorConfig& cfg = {}) {
  if (!(horizon >= 10.0 * p.period() * (1.0 - 1e-12))) throw std::invalid_argument("basin_probe requires horizon >= 10T");
  std::vector<BasinOutcome> out(initial_conditions.size());
  parallel_for(out.size(), [&](std::size_t i) {
    const double zi = initial_conditions[i];
    const double zf = advance(p, zi, 0.0, horizon, cfg);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& o : orbits) best = std::min(best, std::abs(zf - o.at(horizon)));
    out[i] = {zi, zf, best < kBasinTol, best};
  });
  return out;
}

/// Overload that locates the orbits itself on a 64-point grid padded by one
/// wavelength around the initial conditions.
inline std::vector<BasinOutcome> basin_probe(const ConveyorParams& p, const std::vector<double>& initial_conditions,
                                             double horizon, const IntegratorConfig& cfg = {}) {
  if (initial_conditions.empty()) return {};
  const auto [lo, hi] = std::minmax_element(initial_conditions.begin(), initial_conditions.end());
  return basin_probe(p, initial_conditions, horizon, scan_orbits(p, *lo - 1.0, *hi + 1.0, 64, cfg), cfg);
}

/// Empirical stand-in for the a-priori bound on periodic solutions: the
/// largest sup-norm over the given orbits.
inline double boundedness_audit(const std::vector<PeriodicOrbit>& orbits) {
  if (orbits.empty()) throw EmptyAudit();
  double d = 0.0;
  for (const auto& o : orbits) d = std::max(d, o.sup_norm);
  return d;
}

struct MultiplierCheck {
  double variational;
  double finite_difference;
  double rel_error;
};

inline MultiplierCheck multiplier_cross_check(const PeriodicOrbit& orbit, double h = 1e-6) {
  const auto& p = orbit.path.params();
  const auto& cfg = orbit.path.config();
  const double fd = (flow_T(p, orbit.z_star + h, cfg) - flow_T(p, orbit.z_star - h, cfg)) / (2.0 * h);
  const double rel = std::abs(orbit.multiplier - fd) / std::max(std::abs(fd), std::numeric_limits<double>::min());
  return {orbit.multiplier, fd, rel};
}

}  // namespace conveyor

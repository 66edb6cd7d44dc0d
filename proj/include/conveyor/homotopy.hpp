#pragma once

// Continuation in the homotopy parameter lambda_h for the auxiliary periodic
// problem
//
//   z' = -(1 - lambda_h) z + lambda_h F_z(t, z),   z(0) = z(T),
//
// which is linear and uniquely solvable (z = 0) at lambda_h = 0 and is the
// conveyor equation at lambda_h = 1. Also the closed-form solver of the
// linear periodic problem y' = -y + q(t), y(0) - y(T) = c0.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "conveyor/integrate.hpp"
#include "conveyor/model.hpp"
#include "conveyor/periodic.hpp"

namespace conveyor {

inline double homotopy_rhs(const ConveyorParams& p, double lambda_h, double t, double z) {
  return -(1.0 - lambda_h) * z + lambda_h * force(p, t, z);
}

inline double homotopy_rhs_dz(const ConveyorParams& p, double lambda_h, double t, double z) {
  return -(1.0 - lambda_h) + lambda_h * force_dz(p, t, z);
}

struct LambdaSolution {
  double lambda_h = 0.0;
  double z0 = 0.0;
  double residual = 0.0;
  double multiplier = 0.0;
  double sup_norm = 0.0;
  int evaluations = 0;
  Trajectory path;
};

/// Newton shooting on the period map of the lambda_h-problem.
inline LambdaSolution solve_at_lambda(const ConveyorParams& p, double lambda_h, double z_guess,
                                      const IntegratorConfig& cfg = {}, const ShootingOptions& opts = {}) {
  if (!(lambda_h >= 0.0 && lambda_h <= 1.0)) throw std::invalid_argument("lambda_h must lie in [0, 1]");
  auto rhs = [&p, lambda_h](double t, double z) { return homotopy_rhs(p, lambda_h, t, z); };
  auto rhs_dz = [&p, lambda_h](double t, double z) { return homotopy_rhs_dz(p, lambda_h, t, z); };
  const double T = p.period();
  const PeriodMapRoot root = solve_period_map(rhs, rhs_dz, T, z_guess, cfg, opts, std::nullopt, std::numbers::pi / p.k);
  Trajectory path = integrate(p, rhs, root.z0, 0.0, T, cfg);
  const double residual = std::abs(path.z_end() - root.z0);
  if (residual >= opts.residual_tol) throw NoConvergence(root.evaluations, residual);
  double sup_norm = 0.0, max_rhs = 0.0;
  detail::path_extrema(path, rhs, sup_norm, max_rhs);
  return {lambda_h, root.z0, residual, root.multiplier, sup_norm, root.evaluations, std::move(path)};
}

struct ContinuationStep {
  double lambda_h;
  double z0;
  double residual;
  double sup_norm;
};

struct ContinuationTrace {
  std::vector<ContinuationStep> steps;
  bool converged = false;
  int attempts = 0;  // accepted plus rejected lambda-steps
  double final_z0() const { return steps.back().z0; }
};

class ContinuationStall : public std::runtime_error {
 public:
  explicit ContinuationStall(ContinuationTrace partial)
      : std::runtime_error("continuation stalled: lambda step underflow"), trace_(std::move(partial)) {}
  const ContinuationTrace& trace() const { return trace_; }

 private:
  ContinuationTrace trace_;
};

struct ContinuationOptions {
  double lambda_start = 0.01;
  double initial_step = 0.02;
  double max_step = 0.1;
  double min_step = 1e-6;
  double grow = 1.5;
  double z_seed = 0.0;
};

/// Follows z0(lambda_h) from lambda_start to 1 with a trivial predictor.
/// Failed corrector solves halve the step; successes grow it by `grow`.
inline ContinuationTrace continue_to_one(const ConveyorParams& p, const IntegratorConfig& cfg = {},
                                         const ContinuationOptions& copts = {}, const ShootingOptions& opts = {}) {
  p.validate();
  ContinuationTrace trace;
  auto record = [&trace](const LambdaSolution& s) {
    trace.steps.push_back({s.lambda_h, s.z0, s.residual, s.sup_norm});
  };

  double lambda_h = copts.lambda_start;
  double step = copts.initial_step;
  double z = copts.z_seed;
  ++trace.attempts;
  try {
    const auto first = solve_at_lambda(p, lambda_h, z, cfg, opts);
    record(first);
    z = first.z0;
  } catch (const NoConvergence&) {
    throw ContinuationStall(trace);
  }

  while (lambda_h < 1.0) {
    if (step < copts.min_step) throw ContinuationStall(trace);
    const double next = std::min(1.0, lambda_h + step);
    ++trace.attempts;
    try {
      const auto sol = solve_at_lambda(p, next, z, cfg, opts);
      record(sol);
      lambda_h = next;
      z = sol.z0;
      step = std::min(copts.max_step, step * copts.grow);
    } catch (const NoConvergence&) {
      step *= 0.5;
    } catch (const StepSizeUnderflow&) {
      step *= 0.5;
    }
  }
  trace.converged = true;
  return trace;
}

/// Largest sup-norm along the branch: an empirical bound on the family.
inline double rho_audit(const ContinuationTrace& trace) {
  if (trace.steps.empty()) throw EmptyAudit();
  double rho = 0.0;
  for (const auto& s : trace.steps) rho = std::max(rho, s.sup_norm);
  return rho;
}

/// Piecewise-linear samples of a function on [t_front, t_back].
struct SampledFunction {
  std::vector<double> t;
  std::vector<double> v;

  double span() const { return t.back() - t.front(); }
  double sup_norm() const {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  }
};

/// L1 norm of the piecewise-linear interpolant, exact per segment.
inline double l1_norm(const SampledFunction& q) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < q.t.size(); ++i) {
    const double h = q.t[i + 1] - q.t[i];
    const double a = q.v[i], b = q.v[i + 1];
    if ((a >= 0.0) == (b >= 0.0)) {
      total += 0.5 * h * std::abs(a + b);
    } else {
      // Crosses zero inside the segment: two triangles.
      total += 0.5 * h * (a * a + b * b) / (std::abs(a) + std::abs(b));
    }
  }
  return total;
}

namespace detail {

// Exact integral of e^{-(h - s)} q(s) over s in [0, h] for q linear from a to b.
inline double exp_weighted_segment(double h, double a, double b) {
  const double one_minus_e = -std::expm1(-h);
  // int_0^h e^{-(h-s)} s/h ds = 1 - (1 - e^{-h})/h, by series for short segments.
  const double w_lin = h > 1e-3 ? 1.0 - one_minus_e / h : h * (0.5 - h * (1.0 / 6.0 - h * (1.0 / 24.0 - h / 120.0)));
  return a * one_minus_e + (b - a) * w_lin;
}

}  // namespace detail

/// Solves y' = -y + q(t) with y(0) - y(T) = c0, q piecewise linear, via the
/// variation-of-constants formula; T is the span of the samples.
inline SampledFunction linear_bvp(const SampledFunction& q, double c0) {
  if (q.t.size() < 2 || q.t.size() != q.v.size()) throw std::invalid_argument("linear_bvp needs >= 2 matching samples");
  const std::size_t n = q.t.size();
  std::vector<double> partial(n, 0.0);  // int_0^{t_i} e^{-(t_i - s)} q(s) ds
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = q.t[i + 1] - q.t[i];
    if (!(h > 0.0)) throw std::invalid_argument("linear_bvp: sample times must increase");
    partial[i + 1] = std::exp(-h) * partial[i] + detail::exp_weighted_segment(h, q.v[i], q.v[i + 1]);
  }
  const double T = q.span();
  const double decay = std::exp(-T);
  const double y_T = (decay * c0 + partial[n - 1]) / (-std::expm1(-T));
  const double y_0 = y_T + c0;
  SampledFunction y{q.t, std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) y.v[i] = std::exp(-(q.t[i] - q.t.front())) * y_0 + partial[i];
  y.v[n - 1] = y_T;
  return y;
}

/// Stability constant of the linear problem: sup|y| <= beta (|c0| + |q|_L1).
inline double linear_bvp_beta(double T) { return 1.0 + 1.0 / (-std::expm1(-T)); }

struct BetaBoundReport {
  int cases = 0;
  int violations = 0;
  double max_ratio = 0.0;           // max of sup|y| / (beta (|c0| + |q|_L1))
  double max_boundary_error = 0.0;  // max |y(0) - y(T) - c0|
};

/// Randomized check of the stability bound with smooth random forcings.
inline BetaBoundReport beta_bound_property(double T, int cases, unsigned seed = 12345, std::size_t samples = 2001) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-5.0, 5.0);
  std::uniform_int_distribution<int> modes(1, 6);
  BetaBoundReport rep;
  const double beta = linear_bvp_beta(T);
  for (int c = 0; c < cases; ++c) {
    const int m = modes(rng);
    std::vector<double> a(m + 1), b(m + 1);
    for (int j = 0; j <= m; ++j) {
      a[j] = coef(rng);
      b[j] = coef(rng);
    }
    const double c0 = coef(rng);
    SampledFunction q{std::vector<double>(samples), std::vector<double>(samples)};
    for (std::size_t i = 0; i < samples; ++i) {
      const double t = T * static_cast<double>(i) / static_cast<double>(samples - 1);
      double v = a[0];
      for (int j = 1; j <= m; ++j) v += a[j] * std::cos(2.0 * std::numbers::pi * j * t / T) + b[j] * std::sin(2.0 * std::numbers::pi * j * t / T);
      q.t[i] = t;
      q.v[i] = v;
    }
    const SampledFunction y = linear_bvp(q, c0);
    const double bound = beta * (std::abs(c0) + l1_norm(q));
    const double ratio = y.sup_norm() / bound;
    rep.max_ratio = std::max(rep.max_ratio, ratio);
    rep.max_boundary_error = std::max(rep.max_boundary_error, std::abs(y.v.front() - y.v.back() - c0));
    if (ratio > 1.0) ++rep.violations;
    ++rep.cases;
  }
  return rep;
}

}  // namespace conveyor

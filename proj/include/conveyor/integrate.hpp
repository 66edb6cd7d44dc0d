#pragma once

// Adaptive Dormand-Prince 5(4) integration with a PI step controller and the
// free 4th-order continuous extension (Hairer, Norsett & Wanner, DOPRI5).

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "conveyor/model.hpp"

namespace conveyor {

class StepSizeUnderflow : public std::runtime_error {
 public:
  StepSizeUnderflow(double t, double h)
      : std::runtime_error("step size underflow at t = " + std::to_string(t) + " (h = " + std::to_string(h) + ")"),
        t_(t),
        h_(h) {}
  double time() const { return t_; }
  double step() const { return h_; }

 private:
  double t_;
  double h_;
};

struct IntegratorConfig {
  double rtol = 1e-10;
  double atol = 1e-12;
  std::optional<double> max_step;      // defaults to T/20
  std::optional<double> initial_step;  // defaults to T/1000
};

/// Config with the period-dependent defaults filled in and checked.
struct StepControl {
  double rtol;
  double atol;
  double max_step;
  double initial_step;
};

inline StepControl resolve(const IntegratorConfig& cfg, double period) {
  if (!(cfg.rtol > 0.0) || !(cfg.atol > 0.0)) throw std::invalid_argument("rtol and atol must be positive");
  StepControl c{cfg.rtol, cfg.atol, cfg.max_step.value_or(period / 20.0), cfg.initial_step.value_or(period / 1000.0)};
  if (!(c.max_step > 0.0) || c.max_step > period / 4.0 * (1.0 + 1e-12))
    throw std::invalid_argument("max_step must lie in (0, T/4] to resolve the forcing");
  if (!(c.initial_step > 0.0)) throw std::invalid_argument("initial_step must be positive");
  c.initial_step = std::min(c.initial_step, c.max_step);
  return c;
}

template <std::size_t N>
using State = std::array<double, N>;

namespace dopri5 {

inline constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
inline constexpr double a21 = 1.0 / 5.0;
inline constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
inline constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
inline constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                        a54 = -212.0 / 729.0;
inline constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                        a65 = -5103.0 / 18656.0;
inline constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0, a75 = -2187.0 / 6784.0,
                        a76 = 11.0 / 84.0;
inline constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                        e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

/// Data handed to the observer after every accepted step.
template <std::size_t N>
struct AcceptedStep {
  double t0;
  double t1;  // exact end time of the step
  double h;   // signed step
  const State<N>& y0;
  const State<N>& y1;
  const std::array<State<N>, 7>& k;
};

/// Integrates y' = rhs(t, y) from t0 to t1 (either direction) and returns
/// y(t1). `observer(AcceptedStep)` is called after every accepted step.
template <std::size_t N, class Rhs, class Observer>
State<N> run(Rhs&& rhs, State<N> y, double t0, double t1, const StepControl& ctl, Observer&& observer) {
  if (t0 == t1) return y;
  const double span = std::abs(t1 - t0);
  const double dir = t1 > t0 ? 1.0 : -1.0;
  const double h_floor = 1e-14 * span;
  constexpr double safe = 0.9, facmin = 0.2, facmax = 10.0, beta = 0.04;
  constexpr double expo1 = 0.2 - beta * 0.75;

  std::array<State<N>, 7> k{};
  State<N> ytmp{}, y1{};
  double t = t0;
  double h = std::min(ctl.initial_step, span);
  double facold = 1e-4;
  bool last_rejected = false;

  k[0] = rhs(t, y);
  while (dir * (t1 - t) > 0.0) {
    if (h < h_floor) throw StepSizeUnderflow(t, h);
    bool last = false;
    if (h >= std::abs(t1 - t) * (1.0 - 1e-13)) {
      h = std::abs(t1 - t);
      last = true;
    }
    const double hs = dir * h;

    for (std::size_t i = 0; i < N; ++i) ytmp[i] = y[i] + hs * a21 * k[0][i];
    k[1] = rhs(t + c2 * hs, ytmp);
    for (std::size_t i = 0; i < N; ++i) ytmp[i] = y[i] + hs * (a31 * k[0][i] + a32 * k[1][i]);
    k[2] = rhs(t + c3 * hs, ytmp);
    for (std::size_t i = 0; i < N; ++i) ytmp[i] = y[i] + hs * (a41 * k[0][i] + a42 * k[1][i] + a43 * k[2][i]);
    k[3] = rhs(t + c4 * hs, ytmp);
    for (std::size_t i = 0; i < N; ++i)
      ytmp[i] = y[i] + hs * (a51 * k[0][i] + a52 * k[1][i] + a53 * k[2][i] + a54 * k[3][i]);
    k[4] = rhs(t + c5 * hs, ytmp);
    for (std::size_t i = 0; i < N; ++i)
      ytmp[i] = y[i] + hs * (a61 * k[0][i] + a62 * k[1][i] + a63 * k[2][i] + a64 * k[3][i] + a65 * k[4][i]);
    const double t_new = last ? t1 : t + hs;
    k[5] = rhs(t + hs, ytmp);
    for (std::size_t i = 0; i < N; ++i)
      y1[i] = y[i] + hs * (a71 * k[0][i] + a73 * k[2][i] + a74 * k[3][i] + a75 * k[4][i] + a76 * k[5][i]);
    k[6] = rhs(t_new, y1);

    double err = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sk = ctl.atol + ctl.rtol * std::max(std::abs(y[i]), std::abs(y1[i]));
      const double ei =
          hs * (e1 * k[0][i] + e3 * k[2][i] + e4 * k[3][i] + e5 * k[4][i] + e6 * k[5][i] + e7 * k[6][i]);
      err += (ei / sk) * (ei / sk);
    }
    err = std::sqrt(err / static_cast<double>(N));
    if (!std::isfinite(err)) err = std::numeric_limits<double>::max();

    const double fac11 = std::pow(err, expo1);
    if (err <= 1.0) {
      double fac = fac11 / std::pow(facold, beta);
      fac = std::clamp(fac / safe, 1.0 / facmax, 1.0 / facmin);
      double h_new = std::min(h / fac, ctl.max_step);
      if (last_rejected) h_new = std::min(h_new, h);
      facold = std::max(err, 1e-4);
      observer(AcceptedStep<N>{t, t_new, hs, y, y1, k});
      y = y1;
      k[0] = k[6];
      t = t_new;
      last_rejected = false;
      if (last) break;
      h = h_new;
    } else {
      h = h / std::min(1.0 / facmin, fac11 / safe);
      last_rejected = true;
    }
  }
  return y;
}

template <std::size_t N, class Rhs>
State<N> run(Rhs&& rhs, State<N> y, double t0, double t1, const StepControl& ctl) {
  return run<N>(std::forward<Rhs>(rhs), y, t0, t1, ctl, [](const AcceptedStep<N>&) {});
}

}  // namespace dopri5

/// Densely sampled solution z(t) on [t_begin, t_end] with continuous
/// extension between accepted steps.
class Trajectory {
 public:
  struct Sample {
    double t;
    double z;
  };

  Trajectory(ConveyorParams params, IntegratorConfig config) : params_(params), config_(std::move(config)) {}

  const ConveyorParams& params() const { return params_; }
  const IntegratorConfig& config() const { return config_; }
  std::span<const Sample> samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  double t_begin() const { return samples_.front().t; }
  double t_end() const { return samples_.back().t; }
  double z_end() const { return samples_.back().z; }

  /// Dense-output value; exact at sample times.
  double at(double t) const {
    if (samples_.empty()) throw std::logic_error("empty trajectory");
    if (t < t_begin() || t > t_end()) throw std::out_of_range("trajectory query outside [t_begin, t_end]");
    auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                               [](double v, const Sample& s) { return v < s.t; });
    const auto i = static_cast<std::size_t>(std::distance(samples_.begin(), it)) - 1;
    if (samples_[i].t == t || i + 1 == samples_.size()) return samples_[i].z;
    const double h = samples_[i + 1].t - samples_[i].t;
    const double th = (t - samples_[i].t) / h;
    const double th1 = 1.0 - th;
    const auto& r = dense_[i];
    return samples_[i].z + th * (r[0] + th1 * (r[1] + th * (r[2] + th1 * r[3])));
  }

  void append_first(double t, double z) { samples_.push_back({t, z}); }

  void append_step(const dopri5::AcceptedStep<1>& s) {
    using namespace dopri5;
    const double ydiff = s.y1[0] - s.y0[0];
    const double bspl = s.h * s.k[0][0] - ydiff;
    dense_.push_back({ydiff, bspl, ydiff - s.h * s.k[6][0] - bspl,
                      s.h * (d1 * s.k[0][0] + d3 * s.k[2][0] + d4 * s.k[3][0] + d5 * s.k[4][0] + d6 * s.k[5][0] +
                             d7 * s.k[6][0])});
    samples_.push_back({s.t1, s.y1[0]});
  }

  std::size_t step_count() const { return dense_.size(); }

 private:
  ConveyorParams params_;
  IntegratorConfig config_;
  std::vector<Sample> samples_;
  std::vector<std::array<double, 4>> dense_;
};

template <class Rhs>
auto as_system(Rhs& rhs) {
  return [&rhs](double t, const State<1>& y) { return State<1>{rhs(t, y[0])}; };
}

/// Integrates z' = rhs(t, z) on [t0, t1] keeping dense output.
template <class Rhs>
  requires std::invocable<Rhs&, double, double>
Trajectory integrate(const ConveyorParams& p, Rhs&& rhs, double z_i, double t0, double t1,
                     const IntegratorConfig& cfg = {}) {
  if (!(t1 > t0)) throw std::invalid_argument("integrate requires t1 > t0");
  const StepControl ctl = resolve(cfg, p.period());
  Trajectory traj(p, cfg);
  traj.append_first(t0, z_i);
  dopri5::run<1>(as_system(rhs), State<1>{z_i}, t0, t1, ctl,
                 [&traj](const dopri5::AcceptedStep<1>& s) { traj.append_step(s); });
  return traj;
}

/// Integrates the conveyor equation itself.
inline Trajectory integrate(const ConveyorParams& p, double z_i, double t0, double t1,
                            const IntegratorConfig& cfg = {}) {
  return integrate(p, [&p](double t, double z) { return force(p, t, z); }, z_i, t0, t1, cfg);
}

/// z(t1) from z(t0) = z_i without storing the path; t1 may precede t0.
template <class Rhs>
  requires std::invocable<Rhs&, double, double>
double advance(const ConveyorParams& p, Rhs&& rhs, double z_i, double t0, double t1,
               const IntegratorConfig& cfg = {}) {
  const StepControl ctl = resolve(cfg, p.period());
  return dopri5::run<1>(as_system(rhs), State<1>{z_i}, t0, t1, ctl)[0];
}

inline double advance(const ConveyorParams& p, double z_i, double t0, double t1, const IntegratorConfig& cfg = {}) {
  return advance(p, [&p](double t, double z) { return force(p, t, z); }, z_i, t0, t1, cfg);
}

/// Period map P(z0) = z(T; 0, z0).
inline double flow_T(const ConveyorParams& p, double z0, const IntegratorConfig& cfg = {}) {
  return advance(p, z0, 0.0, p.period(), cfg);
}

struct FlowWithSensitivity {
  double z;           // z(T)
  double derivative;  // dz(T)/dz0
};

/// Integrates z' = rhs(t, z) together with w' = rhs_dz(t, z) w, w(0) = 1.
template <class Rhs, class RhsDz>
FlowWithSensitivity flow_with_sensitivity(Rhs&& rhs, RhsDz&& rhs_dz, double z0, double period,
                                          const IntegratorConfig& cfg = {}) {
  const StepControl ctl = resolve(cfg, period);
  auto system = [&](double t, const State<2>& y) { return State<2>{rhs(t, y[0]), rhs_dz(t, y[0]) * y[1]}; };
  const State<2> end = dopri5::run<2>(system, State<2>{z0, 1.0}, 0.0, period, ctl);
  return {end[0], end[1]};
}

inline FlowWithSensitivity flow_T_with_sensitivity(const ConveyorParams& p, double z0,
                                                   const IntegratorConfig& cfg = {}) {
  return flow_with_sensitivity([&p](double t, double z) { return force(p, t, z); },
                               [&p](double t, double z) { return force_dz(p, t, z); }, z0, p.period(), cfg);
}

}  // namespace conveyor

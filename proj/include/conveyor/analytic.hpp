#pragma once

// Closed-form motion for the plane envelope (f == 1), where
//
//   z' = -k F0 sin(2kz - bt).
//
// With psi = kz - bt/2 and u = tan(psi) the equation becomes the Riccati
// equation u' = -b/2 - c u - (b/2) u^2, c = 2 F0 k^2, whose solution is
//
//   z(t) = bt/(2k) - arctan(H(t))/k,
//   H(t) = (c + s tan(s t/2 - arctan((c + b tan(k z_i))/s)))/b,  s = sqrt(b^2 - c^2).
//
// Evaluating H directly needs the arctan branch chosen so the path stays
// continuous. Instead psi is tracked as the polar angle of the linear flow
// (x, y)' = L (x, y), L = [[c/2, b/2], [-b/2, -c/2]], whose direction
// y/x = tan(psi) obeys the same Riccati equation. The accumulated angle is
// the continuous branch in all three regimes: oscillatory (s real, winding),
// rectilinear (b < c, s imaginary, hyperbolic), and degenerate (b == c).

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

#include "conveyor/model.hpp"

namespace conveyor {

class WrongEnvelope : public std::invalid_argument {
 public:
  WrongEnvelope() : std::invalid_argument("closed-form solution requires the plane envelope") {}
};

struct PlaneSolution {
  double z_i = 0.0;
  ConveyorParams params;
  PlaneRegime regime = PlaneRegime::Rectilinear;
  double discriminant = 0.0;  // b^2 - 4 F0^2 k^4
};

inline PlaneSolution make_plane_solution(const ConveyorParams& p, double z_i) {
  if (p.envelope.kind != EnvelopeKind::Plane) throw WrongEnvelope();
  p.validate();
  const double c = locking_threshold(p);
  return {z_i, p, plane_regime(p), (p.b - c) * (p.b + c)};
}

namespace detail {

using Vec2 = std::array<double, 2>;

inline double cross(const Vec2& a, const Vec2& b) { return a[0] * b[1] - a[1] * b[0]; }
inline double dot(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }

/// Signed rotation of the direction of exp(L t) e0 relative to e0.
inline double phase_rotation(const PlaneSolution& s, double t) {
  const auto& p = s.params;
  const double b = p.b;
  const double c = locking_threshold(p);
  const double psi0 = p.k * s.z_i;
  const Vec2 e0{std::cos(psi0), std::sin(psi0)};
  const Vec2 le0{0.5 * c * e0[0] + 0.5 * b * e0[1], -0.5 * b * e0[0] - 0.5 * c * e0[1]};
  auto angle_to = [&e0](const Vec2& v) { return std::atan2(cross(e0, v), dot(e0, v)); };

  switch (s.regime) {
    case PlaneRegime::Oscillatory: {
      // exp(Lt) = cos(wt) I + sin(wt)/w L; each half period turns the vector by exactly -pi.
      const double w = 0.5 * std::sqrt(s.discriminant);
      const double half_turns = std::floor(w * t / std::numbers::pi);
      const double tau = t - half_turns * std::numbers::pi / w;
      const double cw = std::cos(w * tau), sw = std::sin(w * tau) / w;
      double r = angle_to({cw * e0[0] + sw * le0[0], cw * e0[1] + sw * le0[1]});
      // psi decreases monotonically, so the partial turn lies in (-pi, 0].
      if (r > 0.0) r = r > 0.5 * std::numbers::pi ? r - 2.0 * std::numbers::pi : 0.0;
      return r - half_turns * std::numbers::pi;
    }
    case PlaneRegime::Rectilinear: {
      // exp(Lt) is proportional to (1 + e) I + (1 - e)/q L with e = exp(-2q|t|) (sign of L flips for t < 0).
      const double q = 0.5 * std::sqrt(-s.discriminant);
      const double at = std::abs(t);
      const double e = std::exp(-2.0 * q * at);
      const double g = std::copysign(-std::expm1(-2.0 * q * at) / q, t);
      return angle_to({(1.0 + e) * e0[0] + g * le0[0], (1.0 + e) * e0[1] + g * le0[1]});
    }
    case PlaneRegime::Degenerate:
      return angle_to({e0[0] + t * le0[0], e0[1] + t * le0[1]});
  }
  return 0.0;
}

}  // namespace detail

/// z(t) on the continuous branch with z(0) = z_i.
inline double plane_solution(const PlaneSolution& s, double t) {
  if (s.params.envelope.kind != EnvelopeKind::Plane) throw WrongEnvelope();
  if (t == 0.0) return s.z_i;
  const auto& p = s.params;
  return s.z_i + 0.5 * p.b * t / p.k + detail::phase_rotation(s, t) / p.k;
}

/// H(t) evaluated literally with principal arctan; only defined in the
/// oscillatory regime. tan(kz(t) - bt/2) = -H(t) wherever H is finite.
inline double plane_h(const PlaneSolution& s, double t) {
  if (s.regime != PlaneRegime::Oscillatory) throw std::domain_error("H(t) is real only in the oscillatory regime");
  const auto& p = s.params;
  const double c = locking_threshold(p);
  const double root = std::sqrt(s.discriminant);
  return (c + root * std::tan(0.5 * root * t - std::atan((c + p.b * std::tan(s.z_i * p.k)) / root))) / p.b;
}

struct DriftVelocity {
  double v_c;     // conveyor phase velocity b/(2k)
  double v_asym;  // long-time mean velocity
};

inline DriftVelocity drift_velocity(const ConveyorParams& p) {
  if (p.envelope.kind != EnvelopeKind::Plane) throw WrongEnvelope();
  const double v_c = 0.5 * p.b / p.k;
  if (plane_regime(p) != PlaneRegime::Oscillatory) return {v_c, v_c};
  const double c = locking_threshold(p);
  return {v_c, v_c - 0.5 * std::sqrt((p.b - c) * (p.b + c)) / p.k};
}

/// First-order small-F0 expansion about the initial position; meaningful
/// for the plane envelope only.
inline double taylor_small_F0(const ConveyorParams& p, double z_i, double t) {
  return z_i + p.f0 * p.k * (std::cos(2.0 * z_i * p.k) - std::cos(2.0 * z_i * p.k - p.b * t)) / p.b;
}

}  // namespace conveyor

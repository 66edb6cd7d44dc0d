#pragma once

// Certificates on computed orbits: the two energy identities that every
// T-periodic solution must satisfy, and the fixed-point criterion
// f(z) = f'(z) = 0 checked on a grid.

#include <cfloat>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "conveyor/model.hpp"
#include "conveyor/periodic.hpp"
#include "conveyor/quadrature.hpp"

namespace conveyor {

struct IdentityResult {
  double lhs;
  double rhs;
  double rel_residual;
};

inline constexpr double kIdentityQuadTol = 1e-10;

inline IdentityResult make_identity(double lhs, double rhs) {
  return {lhs, rhs, std::abs(lhs - rhs) / (std::abs(lhs) + std::abs(rhs) + 1e-300)};
}

/// int |F_z|^2 dt against -int dV/dt dt over one period (multiply the
/// equation by z' and use periodicity of V).
inline IdentityResult identity_energy(const PeriodicOrbit& orbit, double tol = kIdentityQuadTol) {
  const auto& p = orbit.path.params();
  const double lhs = integrate_along(orbit.path, [&p](double t, double z) {
    const double f = force(p, t, z);
    return f * f;
  }, tol);
  const double rhs = -integrate_along(orbit.path, [&p](double t, double z) { return potential_dt(p, t, z); }, tol);
  return make_identity(lhs, rhs);
}

/// int |F_z|^2 dt against -(b F0 / 2k) int cos^2(kz - bt/2) f'(z) dt; the
/// remaining term is int z' dt, which vanishes on a periodic orbit.
inline IdentityResult identity_force(const PeriodicOrbit& orbit, double tol = kIdentityQuadTol) {
  const auto& p = orbit.path.params();
  const double lhs = integrate_along(orbit.path, [&p](double t, double z) {
    const double f = force(p, t, z);
    return f * f;
  }, tol);
  const double weighted = integrate_along(orbit.path, [&p](double t, double z) {
    const double c = std::cos(p.k * z - 0.5 * p.b * t);
    return c * c * envelope_d1(p.envelope, z);
  }, tol);
  return make_identity(lhs, -0.5 * p.b * p.f0 / p.k * weighted);
}

struct FixedPointScan {
  std::vector<double> fixed_points;     // genuine zeros of f and f'
  std::vector<double> underflow_flags;  // test fired only because f underflowed
  bool empty() const { return fixed_points.empty(); }
};

/// Applies the fixed-point test with the smallest normal double as
/// tolerance at n evenly spaced points of [z_lo, z_hi].
inline FixedPointScan fixed_point_scan(const ConveyorParams& p, double z_lo, double z_hi, int n) {
  if (!(z_hi > z_lo) || n < 2) throw std::invalid_argument("fixed_point_scan needs z_lo < z_hi and n >= 2");
  FixedPointScan out;
  for (int i = 0; i < n; ++i) {
    const double z = z_lo + (z_hi - z_lo) * i / (n - 1);
    switch (fixed_point_verdict(p, z, DBL_MIN)) {
      case FixedPointVerdict::Fixed: out.fixed_points.push_back(z); break;
      case FixedPointVerdict::UnderflowArtifact: out.underflow_flags.push_back(z); break;
      case FixedPointVerdict::NotFixed: break;
    }
  }
  return out;
}

}  // namespace conveyor

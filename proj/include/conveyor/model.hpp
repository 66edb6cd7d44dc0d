#pragma once

// Conveyor-belt force model: axial envelopes, potential, force field and the
// derivatives every other module builds on.
//
// Units: z in wavelengths, t in seconds, k in rad per wavelength, b in rad/s
// and F0 in wavelength^2/s, so that z' = F_z(t, z) is dimensionally closed.

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace conveyor {

enum class EnvelopeKind { Plane, Lorentzian, Gaussian };

inline std::string_view to_string(EnvelopeKind kind) {
  switch (kind) {
    case EnvelopeKind::Plane: return "plane";
    case EnvelopeKind::Lorentzian: return "lorentzian";
    case EnvelopeKind::Gaussian: return "gaussian";
  }
  return "unknown";
}

inline EnvelopeKind parse_envelope_kind(std::string_view name) {
  if (name == "plane") return EnvelopeKind::Plane;
  if (name == "lorentzian") return EnvelopeKind::Lorentzian;
  if (name == "gaussian") return EnvelopeKind::Gaussian;
  throw std::invalid_argument("unknown envelope kind: " + std::string(name));
}

/// Axial strength profile f(z). `z0` is in wavelengths and ignored for Plane.
struct EnvelopeSpec {
  EnvelopeKind kind = EnvelopeKind::Plane;
  double z0 = 1.0;

  static EnvelopeSpec plane() { return {EnvelopeKind::Plane, 1.0}; }
  static EnvelopeSpec lorentzian(double z0) { return checked({EnvelopeKind::Lorentzian, z0}); }
  static EnvelopeSpec gaussian(double z0) { return checked({EnvelopeKind::Gaussian, z0}); }

  void validate() const {
    if (kind != EnvelopeKind::Plane && !(z0 > 0.0 && std::isfinite(z0)))
      throw std::invalid_argument("envelope z0 must be positive and finite");
  }

 private:
  static EnvelopeSpec checked(EnvelopeSpec e) {
    e.validate();
    return e;
  }
};

struct ConveyorParams {
  double f0 = 0.8;              // wavelength^2 / s
  double b = 100.0;             // rad / s
  double k = 2.66 * std::numbers::pi;  // rad / wavelength
  EnvelopeSpec envelope = EnvelopeSpec::lorentzian(0.37);
  double wavelength_nm = 580.0; // reporting only

  /// Forcing period T = 4*pi/b.
  double period() const { return 4.0 * std::numbers::pi / b; }

  void validate() const {
    if (!(f0 >= 0.0 && std::isfinite(f0))) throw std::invalid_argument("f0 must be finite and non-negative");
    if (!(b > 0.0 && std::isfinite(b))) throw std::invalid_argument("b must be positive and finite");
    if (!(k > 0.0 && std::isfinite(k))) throw std::invalid_argument("k must be positive and finite");
    if (!(wavelength_nm > 0.0)) throw std::invalid_argument("wavelength must be positive");
    envelope.validate();
  }
};

/// Reference parameter set: F0 = 0.8, b = 100 rad/s, k = 2.66 pi, z0 = 0.37, 580 nm.
inline ConveyorParams reference_params(EnvelopeKind kind) {
  ConveyorParams p;
  p.envelope = kind == EnvelopeKind::Plane ? EnvelopeSpec::plane() : EnvelopeSpec{kind, 0.37};
  return p;
}

/// f, f' and f'' evaluated together.
struct EnvelopeJet {
  double f;
  double d1;
  double d2;
};

inline EnvelopeJet envelope_jet(const EnvelopeSpec& e, double z) {
  switch (e.kind) {
    case EnvelopeKind::Plane:
      return {1.0, 0.0, 0.0};
    case EnvelopeKind::Lorentzian: {
      const double a2 = e.z0 * e.z0;
      const double den = a2 + z * z;
      const double f = a2 / den;
      return {f, -2.0 * z * a2 / (den * den), a2 * (6.0 * z * z - 2.0 * a2) / (den * den * den)};
    }
    case EnvelopeKind::Gaussian: {
      const double a2 = e.z0 * e.z0;
      const double f = std::exp(-2.0 * z * z / a2);
      return {f, -4.0 * z / a2 * f, (16.0 * z * z / (a2 * a2) - 4.0 / a2) * f};
    }
  }
  return {1.0, 0.0, 0.0};
}

inline double envelope_value(const EnvelopeSpec& e, double z) { return envelope_jet(e, z).f; }
inline double envelope_d1(const EnvelopeSpec& e, double z) { return envelope_jet(e, z).d1; }
inline double envelope_d2(const EnvelopeSpec& e, double z) { return envelope_jet(e, z).d2; }

/// log f(z), finite even where f itself underflows.
inline double log_envelope(const EnvelopeSpec& e, double z) {
  switch (e.kind) {
    case EnvelopeKind::Plane: return 0.0;
    case EnvelopeKind::Lorentzian: return 2.0 * std::log(e.z0) - std::log(e.z0 * e.z0 + z * z);
    case EnvelopeKind::Gaussian: return -2.0 * z * z / (e.z0 * e.z0);
  }
  return 0.0;
}

/// log |f'(z)|; -inf where f' vanishes identically or at z = 0.
inline double log_abs_envelope_d1(const EnvelopeSpec& e, double z) {
  const double az = std::abs(z);
  if (e.kind == EnvelopeKind::Plane || az == 0.0) return -std::numeric_limits<double>::infinity();
  const double a2 = e.z0 * e.z0;
  if (e.kind == EnvelopeKind::Lorentzian) return std::log(2.0 * az * a2) - 2.0 * std::log(a2 + z * z);
  return std::log(4.0 * az / a2) - 2.0 * z * z / a2;
}

/// V(t, z) = F0 f(z) cos^2(kz - bt/2).
inline double potential(const ConveyorParams& p, double t, double z) {
  const double c = std::cos(p.k * z - 0.5 * p.b * t);
  return p.f0 * envelope_value(p.envelope, z) * c * c;
}

/// F_z = dV/dz = -k F0 f sin(2kz - bt) + F0 cos^2(kz - bt/2) f'.
inline double force(const ConveyorParams& p, double t, double z) {
  const double phase = p.k * z - 0.5 * p.b * t;
  const double c = std::cos(phase);
  const double s2 = std::sin(2.0 * phase);
  const EnvelopeJet j = envelope_jet(p.envelope, z);
  return -p.k * p.f0 * j.f * s2 + p.f0 * c * c * j.d1;
}

/// dF_z/dz, the coefficient of the variational equation.
inline double force_dz(const ConveyorParams& p, double t, double z) {
  const double phase = p.k * z - 0.5 * p.b * t;
  const double c = std::cos(phase);
  const double s2 = std::sin(2.0 * phase);
  const double c2 = std::cos(2.0 * phase);
  const EnvelopeJet j = envelope_jet(p.envelope, z);
  return -2.0 * p.k * p.f0 * j.d1 * s2 - 2.0 * p.k * p.k * p.f0 * j.f * c2 + p.f0 * c * c * j.d2;
}

/// dV/dt = (b/2) F0 f(z) sin(2kz - bt).
inline double potential_dt(const ConveyorParams& p, double t, double z) {
  const double phase = p.k * z - 0.5 * p.b * t;
  return 0.5 * p.b * p.f0 * envelope_value(p.envelope, z) * std::sin(2.0 * phase);
}

// A point z is a fixed point of the flow iff f(z) = f'(z) = 0. None of the
// supported envelopes vanish in exact arithmetic, so a positive numerical
// test can only come from decay below the tolerance (or underflow).
enum class FixedPointVerdict { NotFixed, Fixed, UnderflowArtifact };

inline std::string_view to_string(FixedPointVerdict v) {
  switch (v) {
    case FixedPointVerdict::NotFixed: return "not-fixed";
    case FixedPointVerdict::Fixed: return "fixed";
    case FixedPointVerdict::UnderflowArtifact: return "underflow-artifact";
  }
  return "unknown";
}

inline bool fixed_point_test(const ConveyorParams& p, double z, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("fixed_point_test: tol must be positive");
  const EnvelopeJet j = envelope_jet(p.envelope, z);
  return std::abs(j.f) <= tol && std::abs(j.d1) <= tol;
}

inline FixedPointVerdict fixed_point_verdict(const ConveyorParams& p, double z, double tol) {
  if (!fixed_point_test(p, z, tol)) return FixedPointVerdict::NotFixed;
  // log f is finite for every supported kind: f > 0 analytically.
  if (std::isfinite(log_envelope(p.envelope, z))) return FixedPointVerdict::UnderflowArtifact;
  return FixedPointVerdict::Fixed;
}

enum class PlaneRegime { Rectilinear, Oscillatory, Degenerate };

inline std::string_view to_string(PlaneRegime r) {
  switch (r) {
    case PlaneRegime::Rectilinear: return "rectilinear";
    case PlaneRegime::Oscillatory: return "oscillatory";
    case PlaneRegime::Degenerate: return "degenerate";
  }
  return "unknown";
}

/// Critical forcing rate 2 F0 k^2 separating phase-locked and slipping motion.
inline double locking_threshold(const ConveyorParams& p) { return 2.0 * p.f0 * p.k * p.k; }

inline PlaneRegime plane_regime(const ConveyorParams& p) {
  const double c = locking_threshold(p);
  if (std::abs(p.b - c) <= 1e-12 * p.b) return PlaneRegime::Degenerate;
  return p.b < c ? PlaneRegime::Rectilinear : PlaneRegime::Oscillatory;
}

/// One row of the decay-ratio probe along z_n -> infinity, v_n = z_n + shift.
struct AdmissibilityRow {
  double z;
  double log_f2_ratio;   // log |f(v)^2 / f'(z)|
  double log_fp2_ratio;  // log |f'(v)^2 / f'(z)|
};

/// Evaluates the two ratios whose vanishing is required of admissible
/// envelopes. Everything is computed in log space so the Gaussian tail does
/// not underflow. Both columns must decrease without bound.
inline std::vector<AdmissibilityRow> admissibility_probe(const EnvelopeSpec& e,
                                                         const std::vector<double>& z_points,
                                                         double shift = 0.1) {
  if (e.kind == EnvelopeKind::Plane)
    throw std::invalid_argument("admissibility_probe: plane envelope has f' == 0");
  std::vector<AdmissibilityRow> rows;
  rows.reserve(z_points.size());
  for (double z : z_points) {
    const double v = z + shift;
    const double log_fpz = log_abs_envelope_d1(e, z);
    rows.push_back({z, 2.0 * log_envelope(e, v) - log_fpz, 2.0 * log_abs_envelope_d1(e, v) - log_fpz});
  }
  return rows;
}

}  // namespace conveyor

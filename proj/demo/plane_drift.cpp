// Small tour of the library: the plane-wave drift, the trapped orbit of the
// Lorentzian envelope and the homotopy branch that reaches it.

#include <cstdio>

#include "conveyor/conveyor.hpp"

using namespace conveyor;

int main() {
  const auto plane = reference_params(EnvelopeKind::Plane);
  const auto sol = make_plane_solution(plane, 0.0);
  std::printf("plane wave (%s): v_c = %.4f, z(1500 s) = %.1f wavelengths\n", to_string(sol.regime).data(),
              drift_velocity(plane).v_c, plane_solution(sol, 1500.0));

  for (auto kind : {EnvelopeKind::Lorentzian, EnvelopeKind::Gaussian}) {
    const auto p = reference_params(kind);
    const auto orbit = find_periodic(p, 0.0);
    const auto trace = continue_to_one(p);
    std::printf("%-10s z* = %.9f  mu = %.6f  residual = %.1e  homotopy end = %.9f (%zu steps)\n",
                to_string(kind).data(), orbit.z_star, orbit.multiplier, orbit.residual, trace.final_z0(),
                trace.steps.size());
  }
}

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "conveyor/analytic.hpp"
#include "conveyor/integrate.hpp"

using namespace conveyor;

namespace {

ConveyorParams plane_with_b(double b) {
  auto p = reference_params(EnvelopeKind::Plane);
  p.b = b;
  return p;
}

double plane_force(const ConveyorParams& p, double t, double z) { return -p.k * p.f0 * std::sin(2.0 * p.k * z - p.b * t); }

}  // namespace

TEST(PlaneSolution, StartsAtInitialPoint) {
  for (double b : {100.0, 200.0}) {
    const auto s = make_plane_solution(plane_with_b(b), 0.31);
    EXPECT_EQ(plane_solution(s, 0.0), 0.31);
    EXPECT_NEAR(plane_solution(s, 1e-12), 0.31, 1e-10);
  }
}

TEST(PlaneSolution, RejectsOtherEnvelopes) {
  EXPECT_THROW(make_plane_solution(reference_params(EnvelopeKind::Lorentzian), 0.0), WrongEnvelope);
  EXPECT_THROW(drift_velocity(reference_params(EnvelopeKind::Gaussian)), WrongEnvelope);
}

TEST(PlaneSolution, RegimeAndDiscriminant) {
  const auto r = make_plane_solution(plane_with_b(100.0), 0.0);
  EXPECT_EQ(r.regime, PlaneRegime::Rectilinear);
  EXPECT_LT(r.discriminant, 0.0);
  const auto o = make_plane_solution(plane_with_b(200.0), 0.0);
  EXPECT_EQ(o.regime, PlaneRegime::Oscillatory);
  EXPECT_GT(o.discriminant, 0.0);
}

TEST(PlaneSolution, LongRunDrift) {
  const auto s = make_plane_solution(reference_params(EnvelopeKind::Plane), 0.0);
  const double z = plane_solution(s, 1500.0);
  EXPECT_NEAR(z, 8974.836487187152, 1e-8);
  EXPECT_GE(z, 8910.0);
  EXPECT_LE(z, 9090.0);
}

TEST(PlaneSolution, SatisfiesTheOde) {
  for (double b : {100.0, 200.0, 111.7333966405566}) {
    const auto p = plane_with_b(b);
    for (double zi : {0.0, 0.21, -0.6}) {
      const auto s = make_plane_solution(p, zi);
      for (int i = 1; i <= 200; ++i) {
        const double t = 0.0137 * i;
        const double h = 1e-6;
        const double dz = (plane_solution(s, t + h) - plane_solution(s, t - h)) / (2.0 * h);
        const double f = plane_force(p, t, plane_solution(s, t));
        EXPECT_NEAR(dz, f, 1e-6 * std::max(1.0, std::abs(f))) << "b=" << b << " zi=" << zi << " t=" << t;
      }
    }
  }
}

TEST(PlaneSolution, ContinuousAcrossBranchSeams) {
  const auto p = plane_with_b(200.0);
  const auto s = make_plane_solution(p, 0.05);
  const double h = 1e-6;
  // |z'| <= k F0 bounds the Lipschitz constant.
  const double c = p.k * p.f0 * 1.01;
  for (int i = 0; i < 20000; ++i) {
    const double t = 1e-4 * i;
    EXPECT_LE(std::abs(plane_solution(s, t + h) - plane_solution(s, t)), c * h) << t;
  }
}

TEST(PlaneSolution, AgreesWithIntegratorOverTenPeriods) {
  for (double b : {100.0, 200.0}) {
    const auto p = plane_with_b(b);
    const auto s = make_plane_solution(p, 0.17);
    const auto path = integrate(p, 0.17, 0.0, 10.0 * p.period());
    double gap = 0.0;
    for (const auto& x : path.samples()) gap = std::max(gap, std::abs(x.z - plane_solution(s, x.t)));
    EXPECT_LT(gap, 1e-6) << b;
  }
}

TEST(PlaneSolution, BackwardTime) {
  for (double b : {100.0, 200.0}) {
    const auto p = plane_with_b(b);
    const auto s = make_plane_solution(p, 0.4);
    EXPECT_NEAR(plane_solution(s, -0.3), advance(p, 0.4, 0.0, -0.3), 1e-7);
  }
}

TEST(PlaneSolution, LiteralHMatchesTangent) {
  const auto p = plane_with_b(200.0);
  const auto s = make_plane_solution(p, 0.1);
  int checked = 0;
  for (int i = 1; i < 300; ++i) {
    const double t = 0.00331 * i;
    const double h = plane_h(s, t);
    if (std::abs(h) > 50.0) continue;  // near a pole of tan
    const double tz = std::tan(p.k * plane_solution(s, t) - 0.5 * p.b * t);
    EXPECT_NEAR(tz, -h, 1e-8 * (1.0 + std::abs(h)));
    ++checked;
  }
  EXPECT_GT(checked, 250);
  EXPECT_THROW(plane_h(make_plane_solution(plane_with_b(100.0), 0.0), 0.1), std::domain_error);
}

TEST(PlaneSolution, RectilinearStaysNearConveyorLine) {
  const auto p = reference_params(EnvelopeKind::Plane);
  const double v_c = drift_velocity(p).v_c;
  // From the principal branch (|k z_i| < pi/2) the offset is the arctan term alone.
  const auto s = make_plane_solution(p, 0.0);
  for (double t : {0.01, 0.1, 1.0, 10.0, 100.0, 1000.0}) EXPECT_LT(std::abs(plane_solution(s, t) - v_c * t), 1.0 / p.k);
  // Elsewhere the start adds at most one more branch: the offset stays within pi/k.
  for (double zi : {0.2, -0.35, 3.1}) {
    const auto si = make_plane_solution(p, zi);
    for (double t : {0.1, 1.0, 100.0}) EXPECT_LT(std::abs(plane_solution(si, t) - (zi + v_c * t)), std::numbers::pi / p.k);
  }
  // mean velocity over n periods approaches v_c like 1/n
  double prev = 1e300;
  for (int n : {10, 100, 1000}) {
    const double tn = n * p.period();
    const double err = std::abs(plane_solution(s, tn) / tn - v_c);
    EXPECT_LT(err, prev);
    EXPECT_LT(err * n, 1.0 / (p.k * p.period()));
    prev = err;
  }
}

TEST(Drift, ConveyorSpeed) {
  const auto d = drift_velocity(reference_params(EnvelopeKind::Plane));
  EXPECT_NEAR(d.v_c, 5.983268537289298, 1e-13);
  EXPECT_EQ(d.v_asym, d.v_c);
  EXPECT_NEAR(d.v_c, 5.98, 0.005);
}

TEST(Drift, OscillatorySlopeMatchesFit) {
  const auto p = plane_with_b(200.0);
  const auto d = drift_velocity(p);
  EXPECT_NEAR(d.v_asym, 2.041586147695308, 1e-12);
  // least-squares slope of the integrated path over 100 periods
  const auto path = integrate(p, 0.0, 0.0, 100.0 * p.period());
  double st = 0, sz = 0, stt = 0, stz = 0;
  const auto samples = path.samples();
  const int n = 5000;
  for (int i = 0; i < n; ++i) {
    const double t = path.t_end() * i / (n - 1), z = path.at(t);
    st += t;
    sz += z;
    stt += t * t;
    stz += t * z;
  }
  const double slope = (n * stz - st * sz) / (n * stt - st * st);
  EXPECT_NEAR(slope, d.v_asym, 0.01 * d.v_asym);
  EXPECT_GT(samples.size(), 2u);
}

TEST(Drift, WeakForceHasNoDrift) {
  auto p = plane_with_b(200.0);
  p.f0 = 1e-6;
  EXPECT_NEAR(drift_velocity(p).v_asym, 0.0, 1e-6);
}

TEST(Taylor, Identities) {
  auto p = reference_params(EnvelopeKind::Plane);
  p.f0 = 0.0;
  EXPECT_EQ(taylor_small_F0(p, 0.3, 0.77), 0.3);
  p.f0 = 1e-3;
  for (int n : {1, 2, 5}) {
    EXPECT_NEAR(taylor_small_F0(p, 0.3, 2.0 * std::numbers::pi * n / p.b), 0.3, 1e-15);
  }
}

TEST(Taylor, AmplitudeBoundAndAgreement) {
  auto p = reference_params(EnvelopeKind::Plane);
  p.f0 = 1e-3;
  double lo = 1e300, hi = -1e300;
  const auto path = integrate(p, 0.2, 0.0, p.period(), IntegratorConfig{1e-13, 1e-15});
  double err = 0.0;
  for (const auto& s : path.samples()) {
    const double z = taylor_small_F0(p, 0.2, s.t);
    lo = std::min(lo, z);
    hi = std::max(hi, z);
    err = std::max(err, std::abs(z - s.z));
  }
  EXPECT_LE(hi - lo, 2.0 * p.f0 * p.k / p.b * (1.0 + 1e-12));
  EXPECT_NEAR(2.0 * p.f0 * p.k / p.b, 1.67e-4, 1e-6);
  EXPECT_LT(err, 1e-5);
}

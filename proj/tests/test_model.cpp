#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "conveyor/model.hpp"

using namespace conveyor;

namespace {

const double kPi = std::numbers::pi;

ConveyorParams with_envelope(EnvelopeSpec e) {
  ConveyorParams p;
  p.envelope = e;
  return p;
}

double central(auto&& g, double x, double h) { return (g(x + h) - g(x - h)) / (2.0 * h); }

}  // namespace

TEST(Envelope, HalfPeakAndRayleighValues) {
  const auto lor = EnvelopeSpec::lorentzian(0.37);
  EXPECT_DOUBLE_EQ(envelope_value(lor, 0.37), 0.5);
  EXPECT_DOUBLE_EQ(envelope_value(lor, -0.37), 0.5);
  EXPECT_DOUBLE_EQ(envelope_value(EnvelopeSpec::plane(), 123.4), 1.0);
  EXPECT_NEAR(envelope_value(EnvelopeSpec::gaussian(0.37), 0.37), 0.1353352832366127, 1e-15);
}

TEST(Envelope, FirstDerivativeValues) {
  for (auto e : {EnvelopeSpec::plane(), EnvelopeSpec::lorentzian(0.37), EnvelopeSpec::gaussian(0.37)})
    EXPECT_EQ(envelope_d1(e, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(envelope_d1(EnvelopeSpec::lorentzian(1.0), 1.0), -0.5);
  EXPECT_NEAR(envelope_d1(EnvelopeSpec::gaussian(1.0), 1.0), -0.5413411329464508, 1e-15);
}

TEST(Envelope, DerivativesMatchFiniteDifferences) {
  for (auto e : {EnvelopeSpec::lorentzian(0.37), EnvelopeSpec::gaussian(0.37), EnvelopeSpec::lorentzian(1.0)}) {
    for (double z : {-0.9, -0.3, 0.05, 0.2, 0.5, 1.1}) {
      const double fd1 = central([&](double x) { return envelope_value(e, x); }, z, 1e-6);
      const double fd2 = central([&](double x) { return envelope_d1(e, x); }, z, 1e-6);
      EXPECT_NEAR(envelope_d1(e, z), fd1, 1e-6 * std::max(1.0, std::abs(fd1))) << to_string(e.kind) << " z=" << z;
      EXPECT_NEAR(envelope_d2(e, z), fd2, 1e-5 * std::max(1.0, std::abs(fd2))) << to_string(e.kind) << " z=" << z;
    }
  }
}

TEST(Envelope, Parity) {
  for (auto e : {EnvelopeSpec::lorentzian(0.37), EnvelopeSpec::gaussian(0.37)}) {
    for (double z : {0.1, 0.37, 1.0, 2.5}) {
      EXPECT_EQ(envelope_value(e, -z), envelope_value(e, z));
      EXPECT_EQ(envelope_d1(e, -z), -envelope_d1(e, z));
    }
  }
}

TEST(Envelope, DecaysAlongTheAxis) {
  for (auto e : {EnvelopeSpec::lorentzian(0.37), EnvelopeSpec::gaussian(0.37)}) {
    double prev_f = 2.0, prev_d = 2.0;
    for (double z : {10.0, 100.0, 1000.0, 10000.0}) {
      const double f = envelope_value(e, z), d = std::abs(envelope_d1(e, z));
      EXPECT_LE(f, prev_f);
      EXPECT_LE(d, prev_d);
      prev_f = f;
      prev_d = d;
    }
    EXPECT_LT(prev_f, 1e-8);
  }
}

TEST(Envelope, InvalidWidthRejected) {
  EXPECT_THROW(EnvelopeSpec::lorentzian(0.0), std::invalid_argument);
  EXPECT_THROW(EnvelopeSpec::gaussian(-1.0), std::invalid_argument);
  EXPECT_THROW(parse_envelope_kind("bessel"), std::invalid_argument);
  EXPECT_EQ(parse_envelope_kind("gaussian"), EnvelopeKind::Gaussian);
}

TEST(Field, ReferenceValues) {
  const auto p = reference_params(EnvelopeKind::Lorentzian);
  EXPECT_DOUBLE_EQ(potential(p, 0.0, 0.0), 0.8);
  EXPECT_NEAR(potential(p, 0.0, 0.37), 0.3990152699233614, 1e-14);
  // kz - bt/2 = pi/2
  EXPECT_NEAR(potential(p, 0.0, 0.5 * kPi / p.k), 0.0, 1e-16);

  const auto plane = reference_params(EnvelopeKind::Plane);
  EXPECT_EQ(force(plane, 0.0, 0.0), 0.0);
  const double z_quarter = 0.25 * kPi / plane.k;  // 2kz - bt = pi/2
  EXPECT_NEAR(force(plane, 0.0, z_quarter), -6.685309166839080, 1e-13);
  EXPECT_NEAR(force_dz(plane, 0.0, 0.0), -111.7333966405566, 1e-11);
  EXPECT_NEAR(potential_dt(plane, 0.0, z_quarter), 40.0, 1e-12);
  EXPECT_EQ(potential_dt(p, 0.0, 0.0), 0.0);
}

TEST(Field, FarFieldJacobianVanishes) {
  const auto p = reference_params(EnvelopeKind::Lorentzian);
  EXPECT_NEAR(force_dz(p, 0.3, 1e6), 0.0, 1e-9);
}

TEST(Field, PeriodicInTime) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ut(-10.0, 10.0), uz(-5.0, 5.0);
  for (auto kind : {EnvelopeKind::Plane, EnvelopeKind::Lorentzian, EnvelopeKind::Gaussian}) {
    const auto p = reference_params(kind);
    const double T = p.period();
    for (int i = 0; i < 1000; ++i) {
      const double t = ut(rng), z = uz(rng);
      const double f = force(p, t, z);
      EXPECT_LT(std::abs(force(p, t + T, z) - f), 1e-12 * (1.0 + std::abs(f)));
    }
  }
}

TEST(Field, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ut(0.0, 0.2), uz(-1.5, 1.5);
  for (auto kind : {EnvelopeKind::Plane, EnvelopeKind::Lorentzian, EnvelopeKind::Gaussian}) {
    const auto p = reference_params(kind);
    int checked = 0;
    for (int i = 0; i < 300; ++i) {
      const double t = ut(rng), z = uz(rng);
      const double fz = central([&](double x) { return potential(p, t, x); }, z, 1e-6);
      const double ft = central([&](double s) { return potential(p, s, z); }, t, 1e-6);
      const double fj = central([&](double x) { return force(p, t, x); }, z, 1e-6);
      // relative comparison away from zeros
      if (std::abs(fz) > 1e-2) {
        EXPECT_LT(std::abs(force(p, t, z) - fz) / std::abs(fz), 1e-6);
        ++checked;
      }
      if (std::abs(ft) > 1e-1) EXPECT_LT(std::abs(potential_dt(p, t, z) - ft) / std::abs(ft), 1e-6);
      if (std::abs(fj) > 1e-1) EXPECT_LT(std::abs(force_dz(p, t, z) - fj) / std::abs(fj), 1e-5);
    }
    EXPECT_GT(checked, 50);
  }
}

TEST(Field, PotentialRange) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ut(-1.0, 1.0), uz(-8.0, 8.0);
  for (auto kind : {EnvelopeKind::Plane, EnvelopeKind::Lorentzian, EnvelopeKind::Gaussian}) {
    const auto p = reference_params(kind);
    for (int i = 0; i < 500; ++i) {
      const double t = ut(rng), z = uz(rng);
      const double v = potential(p, t, z);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, p.f0 * envelope_value(p.envelope, z) * (1.0 + 1e-15));
    }
  }
}

TEST(Params, PeriodAndValidation) {
  ConveyorParams p;
  EXPECT_NEAR(p.period(), 0.1256637061435917, 1e-16);
  p.b = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = ConveyorParams{};
  p.f0 = -1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(FixedPoints, NoneForBoundedEnvelopes) {
  EXPECT_FALSE(fixed_point_test(reference_params(EnvelopeKind::Plane), 3.0, 1e-3));
  for (double z : {0.0, 10.0, 1e4}) EXPECT_FALSE(fixed_point_test(reference_params(EnvelopeKind::Lorentzian), z, 1e-300));
  EXPECT_THROW(fixed_point_test(reference_params(EnvelopeKind::Plane), 0.0, 0.0), std::invalid_argument);
}

TEST(FixedPoints, GaussianUnderflowIsFlaggedNotFixed) {
  const auto p = reference_params(EnvelopeKind::Gaussian);
  EXPECT_TRUE(fixed_point_test(p, 50.0, 1e-300));
  EXPECT_EQ(fixed_point_verdict(p, 50.0, 1e-300), FixedPointVerdict::UnderflowArtifact);
  EXPECT_EQ(fixed_point_verdict(p, 0.5, 1e-300), FixedPointVerdict::NotFixed);
}

TEST(Regime, ThresholdSplit) {
  auto p = reference_params(EnvelopeKind::Plane);
  EXPECT_NEAR(locking_threshold(p), 111.7333966405566, 1e-11);
  EXPECT_EQ(plane_regime(p), PlaneRegime::Rectilinear);
  p.b = 200.0;
  EXPECT_EQ(plane_regime(p), PlaneRegime::Oscillatory);
  p.b = locking_threshold(p);
  EXPECT_EQ(plane_regime(p), PlaneRegime::Degenerate);
}

TEST(Admissibility, RatiosDecreaseWithoutBound) {
  std::vector<double> zs;
  for (double z = 10.0; z <= 1e4 * 1.0001; z *= std::sqrt(10.0)) zs.push_back(z);
  for (auto e : {EnvelopeSpec::lorentzian(0.37), EnvelopeSpec::gaussian(0.37)}) {
    const auto rows = admissibility_probe(e, zs);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      EXPECT_LT(rows[i].log_f2_ratio, rows[i - 1].log_f2_ratio);
      EXPECT_LT(rows[i].log_fp2_ratio, rows[i - 1].log_fp2_ratio);
    }
    EXPECT_LT(rows.back().log_f2_ratio, -10.0);
    EXPECT_TRUE(std::isfinite(rows.back().log_fp2_ratio));
  }
  EXPECT_THROW(admissibility_probe(EnvelopeSpec::plane(), zs), std::invalid_argument);
}

TEST(Admissibility, LorentzianRatiosAlsoVanishInLinearSpace) {
  const auto e = EnvelopeSpec::lorentzian(0.37);
  double prev = 1e300;
  for (double z : {10.0, 100.0, 1000.0, 10000.0}) {
    const double r = std::pow(envelope_value(e, z + 0.1), 2) / std::abs(envelope_d1(e, z));
    EXPECT_LT(r, prev);
    prev = r;
  }
  EXPECT_LT(prev, 1e-3);
}

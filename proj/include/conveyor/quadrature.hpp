#pragma once

// Adaptive Gauss-Lobatto quadrature (4-point Lobatto rule with its 7-point
// Kronrod extension as error estimate), applied piecewise on the steps of a
// trajectory so the integrand is smooth on every panel.

#include <cmath>
#include <stdexcept>

#include "conveyor/integrate.hpp"

namespace conveyor {

namespace detail {

inline constexpr double kLobAlpha = 0.816496580927726;   // sqrt(2/3)
inline constexpr double kLobBeta = 0.447213595499958;    // 1/sqrt(5)

template <class F>
double lobatto_step(F& f, double a, double b, double fa, double fb, double scale, double tol, int depth) {
  const double h = 0.5 * (b - a);
  const double m = 0.5 * (a + b);
  const double mll = m - kLobAlpha * h, ml = m - kLobBeta * h, mr = m + kLobBeta * h, mrr = m + kLobAlpha * h;
  const double fmll = f(mll), fml = f(ml), fm = f(m), fmr = f(mr), fmrr = f(mrr);
  const double i2 = h / 6.0 * (fa + fb + 5.0 * (fml + fmr));
  const double i1 = h / 1470.0 * (77.0 * (fa + fb) + 432.0 * (fmll + fmrr) + 625.0 * (fml + fmr) + 672.0 * fm);
  if (std::abs(i1 - i2) <= tol * scale || depth >= 40 || mll <= a || b <= mrr) return i1;
  return lobatto_step(f, a, mll, fa, fmll, scale, tol, depth + 1) +
         lobatto_step(f, mll, ml, fmll, fml, scale, tol, depth + 1) +
         lobatto_step(f, ml, m, fml, fm, scale, tol, depth + 1) +
         lobatto_step(f, m, mr, fm, fmr, scale, tol, depth + 1) +
         lobatto_step(f, mr, mrr, fmr, fmrr, scale, tol, depth + 1) +
         lobatto_step(f, mrr, b, fmrr, fb, scale, tol, depth + 1);
}

}  // namespace detail

/// Integral of f over [a, b]. `scale` is the magnitude the tolerance is
/// relative to; by default a coarse estimate of the integral of |f|.
template <class F>
double adaptive_lobatto(F&& f, double a, double b, double tol = 1e-10, double scale = -1.0) {
  if (!(tol > 0.0)) throw std::invalid_argument("quadrature tolerance must be positive");
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b);
  if (scale < 0.0) {
    scale = 0.0;
    constexpr int n = 12;
    for (int i = 0; i <= n; ++i) scale += std::abs(f(a + (b - a) * i / n));
    scale *= std::abs(b - a) / (n + 1);
  }
  return detail::lobatto_step(f, a, b, fa, fb, scale, tol, 0);
}

/// Integral of g(t, z(t)) over the trajectory, one adaptive panel per step.
template <class G>
double integrate_along(const Trajectory& path, G&& g, double tol = 1e-10) {
  const auto s = path.samples();
  auto h = [&](double t) { return g(t, path.at(t)); };
  double scale = 0.0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const double tm = 0.5 * (s[i].t + s[i + 1].t);
    scale += (s[i + 1].t - s[i].t) * (std::abs(g(s[i].t, s[i].z)) + 2.0 * std::abs(h(tm)) + std::abs(g(s[i + 1].t, s[i + 1].z))) / 4.0;
  }
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    total += detail::lobatto_step(h, s[i].t, s[i + 1].t, g(s[i].t, s[i].z), g(s[i + 1].t, s[i + 1].z), scale, tol, 0);
  }
  return total;
}

}  // namespace conveyor

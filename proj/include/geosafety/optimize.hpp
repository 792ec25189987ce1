#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace geosafety {

struct ScalarMinimum {
  double x = 0.0;
  double fx = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Brent's method (golden-section steps with parabolic interpolation) on
/// [lo, hi]. Terminates when the bracket half-width is below
/// 2 * (sqrt(eps) * |x| + tol / 3).
template <typename F>
ScalarMinimum brent_minimize(F&& f, double lo, double hi, double tol, int max_iter = 200) {
  constexpr double kGolden = 0.3819660112501051;  // (3 - sqrt(5)) / 2
  const double rel = std::sqrt(std::numeric_limits<double>::epsilon());

  double a = lo;
  double b = hi;
  double x = a + kGolden * (b - a);
  double w = x;
  double v = x;
  double fx = f(x);
  double fw = fx;
  double fv = fx;
  double d = 0.0;
  double e = 0.0;

  ScalarMinimum out;
  for (int iter = 0; iter < max_iter; ++iter) {
    const double mid = 0.5 * (a + b);
    const double tol1 = rel * std::abs(x) + tol / 3.0;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - mid) <= tol2 - 0.5 * (b - a)) {
      out.converged = true;
      out.iterations = iter;
      break;
    }
    bool golden = true;
    if (std::abs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double etemp = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * etemp) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = (mid >= x) ? tol1 : -tol1;
        golden = false;
      }
    }
    if (golden) {
      e = (x >= mid) ? a - x : b - x;
      d = kGolden * e;
    }
    const double u = (std::abs(d) >= tol1) ? x + d : x + (d > 0.0 ? tol1 : -tol1);
    const double fu = f(u);
    if (fu <= fx) {
      if (u >= x) a = x; else b = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
    out.iterations = iter + 1;
  }
  out.x = x;
  out.fx = fx;
  return out;
}

/// Root of g on [lo, hi] given g(lo) < 0 < g(hi) (or the reverse), by
/// bisection safeguarded secant steps (Illinois variant). Stops when the
/// bracket shrinks to a few ulps or g hits zero.
template <typename G>
double bracketed_root(G&& g, double lo, double hi, double g_lo, double g_hi, int max_iter = 200) {
  int side = 0;
  for (int iter = 0; iter < max_iter; ++iter) {
    double x = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
    if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
    const double gx = g(x);
    if (gx == 0.0) return x;
    if ((gx < 0.0) == (g_lo < 0.0)) {
      lo = x;
      g_lo = gx;
      if (side == -1) g_hi *= 0.5;
      side = -1;
    } else {
      hi = x;
      g_hi = gx;
      if (side == 1) g_lo *= 0.5;
      side = 1;
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x))) {
      break;
    }
  }
  return std::abs(g_lo) < std::abs(g_hi) ? lo : hi;
}

}  // namespace geosafety

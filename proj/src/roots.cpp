#include "nps/roots.hpp"

#include <algorithm>
#include <cmath>

namespace nps {

bool bracket_expand(const std::function<double(double)>& f, double& lo,
                    double& hi, double& flo, double& fhi, int max_expand,
                    double lo_limit, double hi_limit) {
  flo = f(lo);
  fhi = f(hi);
  for (int i = 0; i < max_expand; ++i) {
    if (flo == 0.0 || fhi == 0.0 || (flo < 0.0) != (fhi < 0.0)) return true;
    const double w = hi - lo;
    if (std::fabs(flo) < std::fabs(fhi)) {
      lo = std::max(lo_limit, lo - w);
      flo = f(lo);
    } else {
      hi = std::min(hi_limit, hi + w);
      fhi = f(hi);
    }
  }
  return (flo < 0.0) != (fhi < 0.0);
}

RootResult brent(const std::function<double(double)>& f, double lo, double hi,
                 double xtol, int max_iter) {
  RootResult res;
  double a = lo, b = hi, fa = f(a), fb = f(b);
  res.iterations = 2;
  if (fa == 0.0) return {a, 0.0, res.iterations, true};
  if (fb == 0.0) return {b, 0.0, res.iterations, true};
  if ((fa < 0.0) == (fb < 0.0)) return {b, fb, res.iterations, false};
  double c = a, fc = fa, d = b - a, e = d;
  for (int it = 0; it < max_iter; ++it) {
    if ((fb < 0.0) == (fc < 0.0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::fabs(fc) < std::fabs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol1 = 2.0 * 1e-16 * std::fabs(b) + 0.5 * xtol;
    const double xm = 0.5 * (c - b);
    if (std::fabs(xm) <= tol1 || fb == 0.0) {
      res.x = b;
      res.fx = fb;
      res.converged = true;
      return res;
    }
    if (std::fabs(e) >= tol1 && std::fabs(fa) > std::fabs(fb)) {
      double p, q, r;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        q = fa / fc;
        r = fb / fc;
        p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0));
        q = (q - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::fabs(p);
      if (2.0 * p < std::min(3.0 * xm * q - std::fabs(tol1 * q),
                             std::fabs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += (std::fabs(d) > tol1) ? d : (xm > 0.0 ? tol1 : -tol1);
    fb = f(b);
    ++res.iterations;
  }
  res.x = b;
  res.fx = fb;
  res.converged = false;
  return res;
}

RootResult newton_bracketed(const std::function<double(double)>& f,
                            const std::function<double(double)>& df, double x0,
                            double lo, double hi, double xtol, int max_iter) {
  RootResult res;
  double flo = f(lo), fhi = f(hi);
  res.iterations = 2;
  if ((flo < 0.0) == (fhi < 0.0)) {
    // No sign change: fall back to plain Newton without safeguards.
    double x = x0;
    for (int it = 0; it < max_iter; ++it) {
      const double fx = f(x), dfx = df(x);
      ++res.iterations;
      if (dfx == 0.0) break;
      const double step = fx / dfx;
      x -= step;
      if (std::fabs(step) <= xtol) {
        return {x, f(x), res.iterations, true};
      }
    }
    return {x, f(x), res.iterations, false};
  }
  if (flo > 0.0) {
    std::swap(lo, hi);
    std::swap(flo, fhi);
  }
  // Invariant: f(lo) <= 0 <= f(hi) (lo/hi need not be ordered).
  double x = x0;
  if (!((x > std::min(lo, hi)) && (x < std::max(lo, hi)))) x = 0.5 * (lo + hi);
  for (int it = 0; it < max_iter; ++it) {
    const double fx = f(x);
    ++res.iterations;
    if (fx <= 0.0)
      lo = x;
    else
      hi = x;
    if (std::fabs(hi - lo) <= xtol || fx == 0.0) {
      return {x, fx, res.iterations, true};
    }
    const double dfx = df(x);
    double next = (dfx != 0.0) ? x - fx / dfx : 0.5 * (lo + hi);
    const double lo_ = std::min(lo, hi), hi_ = std::max(lo, hi);
    if (!(next > lo_ && next < hi_)) next = 0.5 * (lo + hi);
    if (std::fabs(next - x) <= 0.25 * xtol) {
      return {next, f(next), res.iterations + 1, true};
    }
    x = next;
  }
  res.x = x;
  res.fx = f(x);
  res.converged = false;
  return res;
}

}  // namespace nps

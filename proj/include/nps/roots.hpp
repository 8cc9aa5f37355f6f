#ifndef NPS_ROOTS_HPP
#define NPS_ROOTS_HPP

// Scalar root finding: bracket expansion, Brent's method, and a
// derivative-assisted Newton iteration safeguarded by a maintained bracket.

#include <functional>
#include <utility>

namespace nps {

struct RootResult {
  double x = 0.0;
  double fx = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Expands [lo, hi] geometrically about its center until f changes sign.
// Returns false if no sign change is found within max_expand doublings.
bool bracket_expand(const std::function<double(double)>& f, double& lo,
                    double& hi, double& flo, double& fhi, int max_expand = 60,
                    double lo_limit = -1e308, double hi_limit = 1e308);

// Brent's method on a bracketing interval [lo, hi] (f(lo)*f(hi) <= 0).
RootResult brent(const std::function<double(double)>& f, double lo, double hi,
                 double xtol, int max_iter = 200);

// Newton from x0 with derivative, clipped to a bracket that is updated each
// step; falls back to bisection when Newton leaves the bracket or stalls.
RootResult newton_bracketed(const std::function<double(double)>& f,
                            const std::function<double(double)>& df, double x0,
                            double lo, double hi, double xtol,
                            int max_iter = 100);

}  // namespace nps

#endif

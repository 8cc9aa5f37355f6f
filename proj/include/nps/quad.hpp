#ifndef NPS_QUAD_HPP
#define NPS_QUAD_HPP

// Adaptive Gauss-Kronrod (G7/K15) quadrature on a finite interval with an
// absolute-error target. Bisects intervals whose Kronrod/Gauss discrepancy
// exceeds their share of the budget.

#include <functional>

namespace nps {

struct QuadResult {
  double value = 0.0;
  double abs_err = 0.0;  // accumulated error estimate
  long evals = 0;
  bool converged = false;
};

QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                     double abs_tol, int max_depth = 52);

}  // namespace nps

#endif

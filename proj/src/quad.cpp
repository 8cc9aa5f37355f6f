#include "nps/quad.hpp"

#include <cmath>

namespace nps {

namespace {

// 15-point Kronrod nodes on [-1,1] (odd-indexed nodes are the embedded G7).
const double xgk[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};

const double wgk[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};

const double wg[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

struct Panel {
  double kronrod;
  double err;
};

Panel gk15(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double gauss = fc * wg[3];
  double kron = fc * wgk[7];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * xgk[j];
    const double fsum = f(c - dx) + f(c + dx);
    kron += wgk[j] * fsum;
    if (j % 2 == 1) gauss += wg[j / 2] * fsum;
  }
  kron *= h;
  gauss *= h;
  return {kron, std::fabs(kron - gauss)};
}

void refine(const std::function<double(double)>& f, double a, double b,
            double tol, int depth, QuadResult& out) {
  Panel p = gk15(f, a, b);
  out.evals += 15;
  if (p.err <= tol || depth <= 0 || out.evals > 4000000) {
    out.value += p.kronrod;
    out.abs_err += p.err;
    return;
  }
  const double m = 0.5 * (a + b);
  refine(f, a, m, 0.5 * tol, depth - 1, out);
  refine(f, m, b, 0.5 * tol, depth - 1, out);
}

}  // namespace

QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                     double abs_tol, int max_depth) {
  QuadResult out;
  if (a == b) {
    out.converged = true;
    return out;
  }
  refine(f, a, b, abs_tol, max_depth, out);
  out.converged = (out.abs_err <= abs_tol);
  return out;
}

}  // namespace nps

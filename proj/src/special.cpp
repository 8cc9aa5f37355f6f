#include "nps/special.hpp"

#include <cmath>
#include <stdexcept>

namespace nps {

double normal_pdf(double z) { return inv_sqrt_2pi * std::exp(-0.5 * z * z); }

double log_normal_pdf(double z) { return -0.5 * z * z - log_sqrt_2pi; }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / sqrt2); }

double erfcx_pos(double x) {
  if (x < 0.0) throw std::domain_error("erfcx_pos: negative argument");
  if (x < 25.0) return std::exp(x * x) * std::erfc(x);
  // Asymptotic series erfcx(x) ~ 1/(x sqrt(pi)) * sum (-1)^k (2k-1)!!/(2x^2)^k.
  const double r = 1.0 / (2.0 * x * x);
  double term = 1.0, sum = 1.0;
  for (int k = 1; k <= 10; ++k) {
    term *= -(2 * k - 1) * r;
    sum += term;
    if (std::fabs(term) < 1e-18 * sum) break;
  }
  return sum / (x * std::sqrt(pi));
}

double log_normal_cdf(double z) {
  if (z >= 0.0) return std::log1p(-normal_cdf(-z));
  if (z > -1.0) return std::log(normal_cdf(z));
  // Phi(z) = 0.5 erfcx(-z/sqrt2) exp(-z^2/2) for z < 0.
  return -0.5 * z * z + std::log(0.5 * erfcx_pos(-z / sqrt2));
}

double inv_mills(double z) {
  if (z > -1.0) return normal_pdf(z) / normal_cdf(z);
  // phi/Phi = sqrt(2/pi) / erfcx(-z/sqrt2); exact in the far left tail.
  return std::sqrt(2.0 / pi) / erfcx_pos(-z / sqrt2);
}

namespace {

// Wichura's AS 241 (PPND16) rational approximations.
double ppnd16(double p) {
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) *
                    r +
                4.5921953931549871457e4) *
                   r +
               1.3731693765509461125e4) *
                  r +
              1.9715909503065514427e3) *
                 r +
             1.3314166789178437745e2) *
                r +
            3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) *
                    r +
                2.1213794301586595867e4) *
                   r +
               5.3941960214247511077e3) *
                  r +
              6.8718700749205790830e2) *
                 r +
             4.2313330701600911252e1) *
                r +
            1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) *
                    r +
                2.41780725177450611770e-1) *
                   r +
               1.27045825245236838258e0) *
                  r +
              3.64784832476320460504e0) *
                 r +
             5.76949722146069140550e0) *
                r +
            4.63033784615654529590e0) *
               r +
           1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) *
                    r +
                1.51986665636164571966e-2) *
                   r +
               1.48103976427480074590e-1) *
                  r +
              6.89767334985100004550e-1) *
                 r +
             1.67638483018380384940e0) *
                r +
            2.05319162663775882187e0) *
               r +
           1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) *
                    r +
                1.24266094738807843860e-3) *
                   r +
               2.65321895265761230930e-2) *
                  r +
              2.96560571828504891230e-1) *
                 r +
             1.78482653991729133580e0) *
                r +
            5.46378491116411436990e0) *
               r +
           6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) *
                    r +
                1.84631831751005468180e-5) *
                   r +
               7.86869131145613259100e-4) *
                  r +
              1.48753612908506148525e-2) *
                 r +
             1.36929880922735805310e-1) *
                r +
            5.99832206555887937690e-1) *
               r +
           1.0);
  }
  return (q < 0.0) ? -val : val;
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("normal_quantile: p outside (0,1)");
  double z = ppnd16(p);
  // One Newton step in the extreme tails tightens the rational fit against
  // the erfc-based cdf.
  if (p < 1e-8 || p > 1.0 - 1e-8) {
    double tail = (z < 0.0) ? normal_cdf(z) - p : normal_cdf(-z) - (1.0 - p);
    double sign = (z < 0.0) ? 1.0 : -1.0;
    z -= sign * tail / normal_pdf(z);
  }
  return z;
}

namespace {

double gamma_q_series(double a, double x) {
  // 1 - P(a,x) with P from the power series; valid for x < a+1.
  double ap = a, sum = 1.0 / a, del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  double logp = -x + a * std::log(x) - std::lgamma(a);
  return 1.0 - sum * std::exp(logp);
}

double gamma_q_cf(double a, double x) {
  // Lentz continued fraction for Q(a,x); valid for x >= a+1.
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_q(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw std::domain_error("gamma_q: bad arguments");
  if (x == 0.0) return 1.0;
  return (x < a + 1.0) ? gamma_q_series(a, x) : gamma_q_cf(a, x);
}

double chi2_sf(double x, double dof) { return gamma_q(0.5 * dof, 0.5 * x); }

}  // namespace nps

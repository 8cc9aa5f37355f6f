#ifndef NPS_SPECIAL_HPP
#define NPS_SPECIAL_HPP

// Scalar special functions for the normal kernel: pdf/cdf in linear and log
// space, the scaled complementary error function, the inverse Mills ratio,
// the normal quantile, and the regularized incomplete gamma tail used by the
// chi-square goodness-of-fit helper.

namespace nps {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double sqrt2 = 1.41421356237309504880;
inline constexpr double sqrt_2pi = 2.50662827463100050242;
inline constexpr double inv_sqrt_2pi = 0.39894228040143267794;
inline constexpr double log_sqrt_2pi = 0.91893853320467274178;

double normal_pdf(double z);
double log_normal_pdf(double z);

// Phi(z) via erfc; full relative accuracy in the lower tail down to the
// smallest normal double (z about -38).
double normal_cdf(double z);

// log Phi(z), finite for all finite z (uses erfcx below the underflow point).
double log_normal_cdf(double z);

// exp(x^2) * erfc(x) for x >= 0 without overflow.
double erfcx_pos(double x);

// phi(z)/Phi(z), stable for arbitrarily negative z.
double inv_mills(double z);

// Phi^{-1}(p) for p in (0,1); relative error ~1e-15 (rational approximation
// with a polish step in the extreme tails).
double normal_quantile(double p);

// Regularized upper incomplete gamma Q(a, x); chi2_sf(x, k) = Q(k/2, x/2).
double gamma_q(double a, double x);
double chi2_sf(double x, double dof);

}  // namespace nps

#endif

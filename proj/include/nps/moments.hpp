#pragma once

#include "nps/nps_model.hpp"

namespace nps {

enum class MomentMethod { quantile_integral, series, approximation, monte_carlo };

struct MomentSummary {
  double m1 = 0.0, m2 = 0.0, m3 = 0.0, m4 = 0.0;  // raw moments E(Y^k)
  double variance = 0.0;
  double skewness = 0.0;   // mu3 / sigma^3
  double kurtosis = 0.0;   // mu4 / sigma^4
  MomentMethod method = MomentMethod::quantile_integral;
  double est_error = 0.0;
};

// Equicorrelated normal orthant: P(X_i <= shift for all i) with
// X ~ N(0, I_dim + offdiag * 11^T), evaluated through the exchangeable
// one-factor reduction as integral phi(z) Phi(shift - sqrt(c) z)^dim dz.
// Nonnegative offdiag only (every series use has c in {1/3, 1/2, 1});
// absolute error below 1e-12.
struct OrthantSpec {
  long dim = 0;
  double offdiag = 0.0;
  double shift = 0.0;
};

double orthant_prob(const OrthantSpec& spec);

// Raw moment E(Y^k) as the quantile integral over u in (eps, 1-eps) with
// eps = 1e-12; the truncated endpoint mass is bounded analytically and
// folded into est_error (written through if the pointer is non-null).
double raw_moment_quantile(const NpsModel& model, int k,
                           double* est_error = nullptr);

// First four raw moments plus variance / skewness / kurtosis from the
// quantile-integral method.
MomentSummary moments_quantile_integral(const NpsModel& model, int kmax = 4);

// Order-statistic series for the mean and the mgf (proper theta only).
// Both reduce to the standard (mu=0, sigma=1) series and map back by the
// affine transform; the series is truncated once the residual count tail
// cannot move the result by more than tol.
double mean_series(const NpsModel& model, double tol);
double mgf_series(const NpsModel& model, double t, double tol);

// First-order closed-form approximations of E(Y) and E(Y^2) for the
// geometric, Poisson and binomial families; est_error records the observed
// gap against the quantile-integral values. Skewness/kurtosis fields are
// NaN (the approximation provides only two moments).
MomentSummary approx_moments(const NpsModel& model);

}  // namespace nps

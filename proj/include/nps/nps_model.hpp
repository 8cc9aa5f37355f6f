#pragma once

#include "nps/power_series.hpp"
#include "nps/rng.hpp"

namespace nps {

// The NPS distribution: law of max(X_1..X_N) with X_i iid normal(mu, sigma^2)
// and N a zero-truncated power-series count with parameter theta. Extended
// theta values outside the proper count domain still define a valid density
// through the same closed forms; the proper() flag records which case holds.
class NpsModel {
 public:
  NpsModel(PowerSeries family, double mu, double sigma, double theta);

  const PowerSeries& family() const { return family_; }
  double mu() const { return mu_; }
  double sigma() const { return sigma_; }
  double theta() const { return theta_; }
  bool proper() const { return proper_; }

  double standardize(double y) const { return (y - mu_) / sigma_; }

  double cdf(double y) const;
  double survival(double y) const;
  double logpdf(double y) const;
  double pdf(double y) const;
  // pdf/survival; +infinity once survival underflows to zero.
  double hazard(double y) const;

  // Closed-form inversion on the proper domain, bracketed root-solve on
  // extended theta; |cdf(quantile(g)) - g| <= 1e-10 either way.
  double quantile(double gamma) const;

  double sample_inverse(Rng& rng) const;
  // Draws N from the count pmf, then the max of N normals. Proper theta only.
  double sample_compound(Rng& rng) const;

  // Order-statistics mixture sum_{n} pmf(n) n Phi^{n-1} phi / sigma,
  // truncated once the residual tail is below tol. Proper theta only.
  double mixture_pdf(double y, double tol) const;

  // Distribution of -Y: same family with reflected theta and location -mu.
  // Throws std::domain_error for the negative binomial (no reflection maps
  // its proper-only domain into itself).
  NpsModel reflected() const;
  static double reflected_theta(const PowerSeries& family, double theta);

 private:
  PowerSeries family_;
  double mu_, sigma_, theta_;
  bool proper_;
};

// theta -> 0+ limit of the cdf: Phi(z)^c with c the family's minimum support
// index (1 for every family except negative binomial, where it is k).
double limit_theta_zero_cdf(const PowerSeries& family, double mu, double sigma,
                            double y);

}  // namespace nps

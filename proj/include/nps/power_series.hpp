#pragma once

#include <cstdint>
#include <string>

#include "nps/rng.hpp"

namespace nps {

// Hard cap on term-by-term series loops (mixture densities, count sampling,
// order-statistic series, posterior sums). Runtime-settable so batch tools
// can raise it for extreme parameter values; defaults to 10^6 terms.
long series_cap();
void set_series_cap(long cap);

enum class Family { geometric, poisson, logarithmic, binomial, negbinomial };

// Zero-truncated power-series family: pmf(n) = a_n theta^n / C(theta) for
// n >= 1, with C(theta) = sum_{n>=1} a_n theta^n. The five concrete members
// are geometric, Poisson, logarithmic, binomial(m) and negative binomial(k).
//
// "Proper" theta values make the pmf a genuine distribution; the "extended"
// domain is the larger set on which the derived max-stable density formulas
// remain valid even though N itself is no longer a proper count variable.
// theta = 0 is excluded everywhere; the normal limit has a dedicated path in
// the model layer.
class PowerSeries {
 public:
  static PowerSeries geometric();
  static PowerSeries poisson();
  static PowerSeries logarithmic();
  static PowerSeries binomial(int m);
  static PowerSeries negbinomial(int k);

  // Accepts "geometric", "poisson", "logarithmic", "binomial:M",
  // "negbinomial:K". Throws std::invalid_argument on anything else.
  static PowerSeries parse(const std::string& text);

  Family family() const { return family_; }
  int shape() const { return shape_; }          // m or k; 0 for shapeless
  std::string name() const;                     // canonical parseable name

  long cmin() const;                            // min n with a_n > 0
  double sup_proper() const;                    // s: upper end of proper domain
  bool theta_proper(double theta) const;
  bool theta_extended(double theta) const;      // never includes 0

  double log_an(long n) const;                  // -inf where a_n = 0
  double an(long n) const;

  // Closed-form series function and derivatives, valid on the extended
  // domain (negative binomial additionally needs t in (0,1)). Overflowing
  // evaluations throw std::overflow_error rather than returning infinity.
  double C(double t) const;
  double dC(double t) const;
  double d2C(double t) const;
  double d3C(double t) const;
  double log_dC(double t) const;                // log C'(t), requires C'(t) > 0
  double Cinv(double u) const;                  // C(Cinv(u)) = u

  // Stable derivative ratios C''(t)/C'(t) and C'''(t)/C'(t). These appear
  // throughout the score, information and posterior-moment formulas and
  // avoid the overflow of forming numerator and denominator separately.
  double d2C_over_dC(double t) const;
  double d3C_over_dC(double t) const;

  double log_C(double theta) const;             // proper theta only
  double log_theta_over_C(double theta) const;  // extended theta
  double dlog_theta_over_C(double theta) const; // d/dtheta of the above
  double en(double theta) const;                // E[N] = theta C'(theta)/C(theta)
  double var_n(double theta) const;

  double pmf(long n, double theta) const;       // proper theta only
  double log_pmf(long n, double theta) const;
  // Sequential cdf inversion; stops once residual tail mass < 1e-12, hard
  // cap 10^6 (throws std::runtime_error if reached).
  long sample_n(double theta, Rng& rng) const;

 private:
  PowerSeries(Family f, int shape) : family_(f), shape_(shape) {}
  void require_proper(double theta) const;
  void require_extended(double theta) const;

  Family family_;
  int shape_;
};

}  // namespace nps

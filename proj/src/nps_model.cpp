#include "nps/nps_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "nps/special.hpp"

namespace nps {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

NpsModel::NpsModel(PowerSeries family, double mu, double sigma, double theta)
    : family_(std::move(family)), mu_(mu), sigma_(sigma), theta_(theta) {
  if (!std::isfinite(mu)) throw std::domain_error("mu must be finite");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::domain_error("sigma must be positive and finite");
  }
  if (!family_.theta_extended(theta)) {
    throw std::domain_error("theta=" + std::to_string(theta) +
                            " outside extended domain of " + family_.name());
  }
  proper_ = family_.theta_proper(theta);
}

// cdf = C(theta Phi)/C(theta), written per family so both tails keep full
// relative accuracy (the naive ratio cancels near 1 for negative theta and
// loses the lower tail for theta near the upper end of the domain).
double NpsModel::cdf(double y) const {
  const double z = standardize(y);
  const double phi_z = normal_cdf(z);
  const double th = theta_;
  switch (family_.family()) {
    case Family::geometric:
      return phi_z * (1.0 - th) / (1.0 - th * phi_z);
    case Family::poisson:
      return std::expm1(th * phi_z) / std::expm1(th);
    case Family::logarithmic:
      return std::log1p(-th * phi_z) / std::log1p(-th);
    case Family::binomial: {
      const double m = family_.shape();
      return std::expm1(m * std::log1p(th * phi_z)) /
             std::expm1(m * std::log1p(th));
    }
    case Family::negbinomial: {
      const double k = family_.shape();
      if (phi_z == 0.0) return 0.0;
      return std::exp(k * (std::log(phi_z) + std::log1p(-th) -
                           std::log1p(-th * phi_z)));
    }
  }
  return 0.0;
}

double NpsModel::survival(double y) const {
  const double z = standardize(y);
  const double p = normal_cdf(z);    // Phi(z)
  const double q = normal_cdf(-z);   // Phi(-z), accurate in the upper tail
  const double th = theta_;
  switch (family_.family()) {
    case Family::geometric:
      return q / (1.0 - th * p);
    case Family::poisson:
      return std::exp(th * p) * std::expm1(th * q) / std::expm1(th);
    case Family::logarithmic:
      return std::log1p(-th * q / (1.0 - th * p)) / std::log1p(-th);
    case Family::binomial: {
      const double m = family_.shape();
      const double w = th * q / (1.0 + th * p);
      return std::exp(m * std::log1p(th * p)) * std::expm1(m * std::log1p(w)) /
             std::expm1(m * std::log1p(th));
    }
    case Family::negbinomial: {
      const double k = family_.shape();
      if (p == 0.0) return 1.0;
      return -std::expm1(k * (std::log(p) + std::log1p(-th) -
                              std::log1p(-th * p)));
    }
  }
  return 0.0;
}

double NpsModel::logpdf(double y) const {
  const double z = standardize(y);
  const double t = theta_ * normal_cdf(z);
  double log_dc;
  if (t == 0.0) {
    // theta Phi underflowed; C'(0) = a_1 (zero for negbinomial with k > 1).
    const double a1 = family_.an(1);
    log_dc = a1 > 0.0 ? std::log(a1) : -kInf;
  } else {
    log_dc = family_.log_dC(t);
  }
  return family_.log_theta_over_C(theta_) + log_normal_pdf(z) -
         std::log(sigma_) + log_dc;
}

double NpsModel::pdf(double y) const {
  const double lp = logpdf(y);
  return lp == -kInf ? 0.0 : std::exp(lp);
}

double NpsModel::hazard(double y) const {
  const double s = survival(y);
  if (s <= 0.0) return kInf;
  return pdf(y) / s;
}

double NpsModel::quantile(double gamma) const {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::domain_error("quantile needs gamma in (0,1)");
  }
  // The stable cdf forms invert in closed form across the full extended
  // domain; each branch solves C(theta Phi) = gamma C(theta) for Phi
  // without ever forming C itself.
  double p;
  switch (family_.family()) {
    case Family::geometric:
      p = gamma / (1.0 - theta_ * (1.0 - gamma));
      break;
    case Family::poisson: {
      const double den = std::expm1(theta_);
      if (!std::isfinite(den)) {
        throw std::overflow_error("quantile: series function overflow");
      }
      p = std::log1p(gamma * den) / theta_;
      break;
    }
    case Family::logarithmic:
      p = -std::expm1(gamma * std::log1p(-theta_)) / theta_;
      break;
    case Family::binomial: {
      const double m = static_cast<double>(family_.shape());
      const double den = std::expm1(m * std::log1p(theta_));
      if (!std::isfinite(den)) {
        throw std::overflow_error("quantile: series function overflow");
      }
      p = std::expm1(std::log1p(gamma * den) / m) / theta_;
      break;
    }
    case Family::negbinomial: {
      const double g =
          std::exp(std::log(gamma) / static_cast<double>(family_.shape()));
      p = g / (1.0 - theta_ * (1.0 - g));
      break;
    }
    default:
      throw std::logic_error("quantile: unhandled family");
  }
  // Keep p strictly inside (0,1): rounding can push it onto an endpoint
  // when gamma is within a few ulp of the boundary.
  p = std::clamp(p, std::numeric_limits<double>::min(),
                 1.0 - std::numeric_limits<double>::epsilon() / 2.0);
  double y = mu_ + sigma_ * normal_quantile(p);
  // Newton polish against the stable cdf so the roundtrip holds to 1e-10
  // even where the closed-form chain has lost a few digits.
  for (int it = 0; it < 3; ++it) {
    const double r = cdf(y) - gamma;
    if (std::fabs(r) <= 1e-13) break;
    const double d = pdf(y);
    if (!(d > 0.0)) break;
    double step = r / d;
    step = std::clamp(step, -sigma_, sigma_);
    y -= step;
  }
  return y;
}

double NpsModel::sample_inverse(Rng& rng) const {
  return quantile(rng.uniform());
}

double NpsModel::sample_compound(Rng& rng) const {
  if (!proper_) {
    throw std::domain_error(
        "sample_compound needs theta in the proper domain");
  }
  const long n = family_.sample_n(theta_, rng);
  double best = -kInf;
  for (long i = 0; i < n; ++i) {
    best = std::max(best, rng.normal());
  }
  return mu_ + sigma_ * best;
}

double NpsModel::mixture_pdf(double y, double tol) const {
  if (!proper_) {
    throw std::domain_error("mixture_pdf needs theta in the proper domain");
  }
  if (!(tol > 0.0)) throw std::domain_error("mixture_pdf needs tol > 0");
  const double z = standardize(y);
  const double p = normal_cdf(z);
  const double base = normal_pdf(z) / sigma_;
  if (base == 0.0) return 0.0;
  long n = family_.cmin();
  // term(n) = pmf(n) * n * Phi^{n-1}; advance by the exact one-step ratio.
  double term = family_.pmf(n, theta_) * static_cast<double>(n) *
                std::pow(p, static_cast<double>(n - 1));
  double sum = term;
  const long cap = series_cap();
  while (true) {
    double aratio = 0.0;  // a_{n+1}/a_n
    switch (family_.family()) {
      case Family::geometric: aratio = 1.0; break;
      case Family::poisson: aratio = 1.0 / (n + 1.0); break;
      case Family::logarithmic: aratio = n / (n + 1.0); break;
      case Family::binomial:
        aratio = n >= family_.shape()
                     ? 0.0
                     : (family_.shape() - n) / (n + 1.0);
        break;
      case Family::negbinomial:
        aratio = n / (n - family_.shape() + 1.0);
        break;
    }
    const double ratio = aratio * theta_ * p * (n + 1.0) / n;
    if (ratio <= 0.0) break;  // finite support exhausted
    // Ratios are non-increasing for every family once n >= cmin, so the
    // remaining tail is bounded by a geometric series when ratio < 1.
    if (ratio < 1.0 && term * ratio / (1.0 - ratio) < 0.5 * tol / base) break;
    if (n >= cap) {
      throw std::runtime_error("mixture_pdf: series truncation cap reached");
    }
    term *= ratio;
    sum += term;
    ++n;
  }
  return base * sum;
}

double NpsModel::reflected_theta(const PowerSeries& family, double theta) {
  switch (family.family()) {
    case Family::geometric:
    case Family::logarithmic:
      return theta / (theta - 1.0);
    case Family::poisson:
      return -theta;
    case Family::binomial:
      return -theta / (1.0 + theta);
    case Family::negbinomial:
      throw std::domain_error(
          "negbinomial has no reflection within its theta domain");
  }
  return 0.0;
}

NpsModel NpsModel::reflected() const {
  return NpsModel(family_, -mu_, sigma_, reflected_theta(family_, theta_));
}

double limit_theta_zero_cdf(const PowerSeries& family, double mu, double sigma,
                            double y) {
  const double p = normal_cdf((y - mu) / sigma);
  return std::pow(p, static_cast<double>(family.cmin()));
}

}  // namespace nps

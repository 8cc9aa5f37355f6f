#include "nps/power_series.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nps {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

std::atomic<long> g_series_cap{1000000};

double checked(double v, const char* what) {
  if (!std::isfinite(v)) throw std::overflow_error(what);
  return v;
}
}  // namespace

long series_cap() { return g_series_cap.load(std::memory_order_relaxed); }

void set_series_cap(long cap) {
  if (cap < 1000) throw std::invalid_argument("series cap must be >= 1000");
  g_series_cap.store(cap, std::memory_order_relaxed);
}

PowerSeries PowerSeries::geometric() { return {Family::geometric, 0}; }
PowerSeries PowerSeries::poisson() { return {Family::poisson, 0}; }
PowerSeries PowerSeries::logarithmic() { return {Family::logarithmic, 0}; }

PowerSeries PowerSeries::binomial(int m) {
  if (m < 1) throw std::invalid_argument("binomial family needs m >= 1");
  return {Family::binomial, m};
}

PowerSeries PowerSeries::negbinomial(int k) {
  if (k < 1) throw std::invalid_argument("negbinomial family needs k >= 1");
  return {Family::negbinomial, k};
}

PowerSeries PowerSeries::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string base = text.substr(0, colon);
  int shape = 0;
  if (colon != std::string::npos) {
    try {
      std::size_t used = 0;
      shape = std::stoi(text.substr(colon + 1), &used);
      if (colon + 1 + used != text.size()) throw std::invalid_argument("trail");
    } catch (const std::exception&) {
      throw std::invalid_argument("bad family shape in '" + text + "'");
    }
  }
  if (base == "geometric" || base == "poisson" || base == "logarithmic") {
    if (colon != std::string::npos) {
      throw std::invalid_argument("family '" + base + "' takes no shape");
    }
    if (base == "geometric") return geometric();
    if (base == "poisson") return poisson();
    return logarithmic();
  }
  if (base == "binomial") {
    if (colon == std::string::npos) {
      throw std::invalid_argument("binomial needs a shape, e.g. binomial:3");
    }
    return binomial(shape);
  }
  if (base == "negbinomial") {
    if (colon == std::string::npos) {
      throw std::invalid_argument("negbinomial needs a shape, e.g. negbinomial:2");
    }
    return negbinomial(shape);
  }
  throw std::invalid_argument("unknown power-series family '" + text + "'");
}

std::string PowerSeries::name() const {
  switch (family_) {
    case Family::geometric: return "geometric";
    case Family::poisson: return "poisson";
    case Family::logarithmic: return "logarithmic";
    case Family::binomial: return "binomial:" + std::to_string(shape_);
    case Family::negbinomial: return "negbinomial:" + std::to_string(shape_);
  }
  return "?";
}

long PowerSeries::cmin() const {
  return family_ == Family::negbinomial ? shape_ : 1;
}

double PowerSeries::sup_proper() const {
  switch (family_) {
    case Family::geometric:
    case Family::logarithmic:
    case Family::negbinomial: return 1.0;
    case Family::poisson:
    case Family::binomial: return kInf;
  }
  return kInf;
}

bool PowerSeries::theta_proper(double theta) const {
  return std::isfinite(theta) && theta > 0.0 && theta < sup_proper();
}

bool PowerSeries::theta_extended(double theta) const {
  if (!std::isfinite(theta) || theta == 0.0) return false;
  switch (family_) {
    case Family::geometric: return theta < 1.0;
    case Family::poisson: return true;
    case Family::logarithmic: return theta < 1.0;
    case Family::binomial: return theta > -1.0;
    case Family::negbinomial: return theta > 0.0 && theta < 1.0;
  }
  return false;
}

void PowerSeries::require_proper(double theta) const {
  if (!theta_proper(theta)) {
    throw std::domain_error("theta=" + std::to_string(theta) +
                            " outside proper domain of " + name());
  }
}

void PowerSeries::require_extended(double theta) const {
  if (!theta_extended(theta)) {
    throw std::domain_error("theta=" + std::to_string(theta) +
                            " outside extended domain of " + name());
  }
}

double PowerSeries::log_an(long n) const {
  if (n < 1) return -kInf;
  switch (family_) {
    case Family::geometric:
      return 0.0;
    case Family::poisson:
      return -std::lgamma(static_cast<double>(n) + 1.0);
    case Family::logarithmic:
      return -std::log(static_cast<double>(n));
    case Family::binomial: {
      if (n > shape_) return -kInf;
      const double m = shape_, x = static_cast<double>(n);
      return std::lgamma(m + 1.0) - std::lgamma(x + 1.0) - std::lgamma(m - x + 1.0);
    }
    case Family::negbinomial: {
      if (n < shape_) return -kInf;
      const double k = shape_, x = static_cast<double>(n);
      // a_n = C(n-1, k-1)
      return std::lgamma(x) - std::lgamma(k) - std::lgamma(x - k + 1.0);
    }
  }
  return -kInf;
}

double PowerSeries::an(long n) const {
  const double la = log_an(n);
  return la == -kInf ? 0.0 : std::exp(la);
}

double PowerSeries::C(double t) const {
  require_extended(t);
  switch (family_) {
    case Family::geometric: return t / (1.0 - t);
    case Family::poisson: return checked(std::expm1(t), "C overflow (poisson)");
    case Family::logarithmic: return -std::log1p(-t);
    case Family::binomial:
      return checked(std::expm1(shape_ * std::log1p(t)), "C overflow (binomial)");
    case Family::negbinomial:
      return checked(std::exp(shape_ * (std::log(t) - std::log1p(-t))),
                     "C overflow (negbinomial)");
  }
  return 0.0;
}

double PowerSeries::dC(double t) const {
  require_extended(t);
  switch (family_) {
    case Family::geometric: {
      const double q = 1.0 - t;
      return 1.0 / (q * q);
    }
    case Family::poisson:
      return checked(std::exp(t), "dC overflow (poisson)");
    case Family::logarithmic:
      return 1.0 / (1.0 - t);
    case Family::binomial:
      return checked(shape_ * std::exp((shape_ - 1) * std::log1p(t)),
                     "dC overflow (binomial)");
    case Family::negbinomial:
      return checked(std::exp(log_dC(t)), "dC overflow (negbinomial)");
  }
  return 0.0;
}

double PowerSeries::d2C(double t) const {
  require_extended(t);
  switch (family_) {
    case Family::geometric: {
      const double q = 1.0 - t;
      return 2.0 / (q * q * q);
    }
    case Family::poisson:
      return checked(std::exp(t), "d2C overflow (poisson)");
    case Family::logarithmic: {
      const double q = 1.0 - t;
      return 1.0 / (q * q);
    }
    case Family::binomial: {
      const double m = shape_;
      return checked(m * (m - 1.0) * std::exp((m - 2.0) * std::log1p(t)),
                     "d2C overflow (binomial)");
    }
    case Family::negbinomial: {
      const double k = shape_;
      return checked(k * (k - 1.0 + 2.0 * t) *
                         std::exp((k - 2.0) * std::log(t) -
                                  (k + 2.0) * std::log1p(-t)),
                     "d2C overflow (negbinomial)");
    }
  }
  return 0.0;
}

double PowerSeries::d3C(double t) const {
  require_extended(t);
  switch (family_) {
    case Family::geometric: {
      const double q = 1.0 - t;
      return 6.0 / (q * q * q * q);
    }
    case Family::poisson:
      return checked(std::exp(t), "d3C overflow (poisson)");
    case Family::logarithmic: {
      const double q = 1.0 - t;
      return 2.0 / (q * q * q);
    }
    case Family::binomial: {
      const double m = shape_;
      return checked(m * (m - 1.0) * (m - 2.0) *
                         std::exp((m - 3.0) * std::log1p(t)),
                     "d3C overflow (binomial)");
    }
    case Family::negbinomial: {
      const double k = shape_;
      const double bracket =
          k * k + 6.0 * k * t + 6.0 * t * t - 3.0 * k - 6.0 * t + 2.0;
      return checked(k * bracket *
                         std::exp((k - 3.0) * std::log(t) -
                                  (k + 3.0) * std::log1p(-t)),
                     "d3C overflow (negbinomial)");
    }
  }
  return 0.0;
}

double PowerSeries::log_dC(double t) const {
  require_extended(t);
  switch (family_) {
    case Family::geometric:
      return -2.0 * std::log1p(-t);
    case Family::poisson:
      return t;
    case Family::logarithmic:
      return -std::log1p(-t);
    case Family::binomial:
      return std::log(static_cast<double>(shape_)) +
             (shape_ - 1.0) * std::log1p(t);
    case Family::negbinomial: {
      const double k = shape_;
      return std::log(k) + (k - 1.0) * std::log(t) - (k + 1.0) * std::log1p(-t);
    }
  }
  return 0.0;
}

double PowerSeries::d2C_over_dC(double t) const {
  switch (family_) {
    case Family::geometric:
      if (t >= 1.0) throw std::domain_error("d2C_over_dC: t out of range");
      return 2.0 / (1.0 - t);
    case Family::poisson:
      return 1.0;
    case Family::logarithmic:
      if (t >= 1.0) throw std::domain_error("d2C_over_dC: t out of range");
      return 1.0 / (1.0 - t);
    case Family::binomial:
      if (t <= -1.0) throw std::domain_error("d2C_over_dC: t out of range");
      return (shape_ - 1.0) / (1.0 + t);
    case Family::negbinomial: {
      if (t <= 0.0 || t >= 1.0) {
        throw std::domain_error("d2C_over_dC: t out of range");
      }
      const double k = shape_;
      return (k - 1.0 + 2.0 * t) / (t * (1.0 - t));
    }
  }
  return 0.0;
}

double PowerSeries::d3C_over_dC(double t) const {
  switch (family_) {
    case Family::geometric:
      if (t >= 1.0) throw std::domain_error("d3C_over_dC: t out of range");
      return 6.0 / ((1.0 - t) * (1.0 - t));
    case Family::poisson:
      return 1.0;
    case Family::logarithmic:
      if (t >= 1.0) throw std::domain_error("d3C_over_dC: t out of range");
      return 2.0 / ((1.0 - t) * (1.0 - t));
    case Family::binomial:
      if (t <= -1.0) throw std::domain_error("d3C_over_dC: t out of range");
      return (shape_ - 1.0) * (shape_ - 2.0) / ((1.0 + t) * (1.0 + t));
    case Family::negbinomial: {
      if (t <= 0.0 || t >= 1.0) {
        throw std::domain_error("d3C_over_dC: t out of range");
      }
      const double k = shape_;
      const double num =
          k * k + 6.0 * k * t + 6.0 * t * t - 3.0 * k - 6.0 * t + 2.0;
      return num / (t * t * (1.0 - t) * (1.0 - t));
    }
  }
  return 0.0;
}

double PowerSeries::Cinv(double u) const {
  switch (family_) {
    case Family::geometric:
      if (u <= -1.0) throw std::domain_error("Cinv: u out of range (geometric)");
      return u / (1.0 + u);
    case Family::poisson:
      if (u <= -1.0) throw std::domain_error("Cinv: u out of range (poisson)");
      return std::log1p(u);
    case Family::logarithmic:
      return -std::expm1(-u);
    case Family::binomial:
      if (u <= -1.0) throw std::domain_error("Cinv: u out of range (binomial)");
      return std::expm1(std::log1p(u) / shape_);
    case Family::negbinomial: {
      if (u <= 0.0) throw std::domain_error("Cinv: u out of range (negbinomial)");
      const double v = std::exp(std::log(u) / shape_);
      return v / (1.0 + v);
    }
  }
  return 0.0;
}

double PowerSeries::log_C(double theta) const {
  require_proper(theta);
  switch (family_) {
    case Family::geometric:
      return std::log(theta) - std::log1p(-theta);
    case Family::poisson:
      return std::log(std::expm1(theta));
    case Family::logarithmic:
      return std::log(-std::log1p(-theta));
    case Family::binomial:
      return std::log(std::expm1(shape_ * std::log1p(theta)));
    case Family::negbinomial:
      return shape_ * (std::log(theta) - std::log1p(-theta));
  }
  return 0.0;
}

double PowerSeries::log_theta_over_C(double theta) const {
  require_extended(theta);
  switch (family_) {
    case Family::geometric:
      return std::log1p(-theta);
    case Family::poisson:
      return std::log(theta / std::expm1(theta));
    case Family::logarithmic:
      return std::log(theta / (-std::log1p(-theta)));
    case Family::binomial:
      return std::log(theta / std::expm1(shape_ * std::log1p(theta)));
    case Family::negbinomial:
      return (1.0 - shape_) * std::log(theta) + shape_ * std::log1p(-theta);
  }
  return 0.0;
}

double PowerSeries::dlog_theta_over_C(double theta) const {
  require_extended(theta);
  switch (family_) {
    case Family::geometric:
      return -1.0 / (1.0 - theta);
    case Family::negbinomial:
      return (1.0 - shape_) / theta - shape_ / (1.0 - theta);
    default:
      break;
  }
  // Remaining families: d/dtheta [log theta - log C]. Direct evaluation
  // cancels catastrophically near 0, so switch to the series of C/theta =
  // a1 + a2 t + a3 t^2 + a4 t^3 there (truncation error O(t^4)).
  if (std::fabs(theta) < 1e-3) {
    double a1 = 0, a2 = 0, a3 = 0, a4 = 0;
    switch (family_) {
      case Family::poisson:
        a1 = 1.0; a2 = 0.5; a3 = 1.0 / 6.0; a4 = 1.0 / 24.0;
        break;
      case Family::logarithmic:
        a1 = 1.0; a2 = 0.5; a3 = 1.0 / 3.0; a4 = 0.25;
        break;
      case Family::binomial: {
        const double m = shape_;
        a1 = m;
        a2 = m * (m - 1.0) / 2.0;
        a3 = m * (m - 1.0) * (m - 2.0) / 6.0;
        a4 = m * (m - 1.0) * (m - 2.0) * (m - 3.0) / 24.0;
        break;
      }
      default: break;
    }
    const double num = a2 + 2.0 * a3 * theta + 3.0 * a4 * theta * theta;
    const double den = a1 + theta * (a2 + theta * (a3 + theta * a4));
    return -num / den;
  }
  switch (family_) {
    case Family::poisson:
      return 1.0 / theta - 1.0 / (-std::expm1(-theta));
    case Family::logarithmic:
      return 1.0 / theta - 1.0 / ((1.0 - theta) * (-std::log1p(-theta)));
    case Family::binomial: {
      const double m = shape_;
      return 1.0 / theta -
             m / ((1.0 + theta) * (-std::expm1(-m * std::log1p(theta))));
    }
    default:
      break;
  }
  return 0.0;
}

double PowerSeries::en(double theta) const {
  require_extended(theta);
  switch (family_) {
    case Family::geometric:
      return 1.0 / (1.0 - theta);
    case Family::poisson:
      return theta / (-std::expm1(-theta));
    case Family::logarithmic:
      return theta / ((1.0 - theta) * (-std::log1p(-theta)));
    case Family::binomial: {
      const double m = shape_;
      return m * theta /
             ((1.0 + theta) * (-std::expm1(-m * std::log1p(theta))));
    }
    case Family::negbinomial:
      return shape_ / (1.0 - theta);
  }
  return 0.0;
}

double PowerSeries::var_n(double theta) const {
  const double e1 = en(theta);
  // Var N = E N * (1 + theta C''/C' - E N); theta C''/C' in closed form.
  double r = 0.0;
  switch (family_) {
    case Family::geometric: r = 2.0 * theta / (1.0 - theta); break;
    case Family::poisson: r = theta; break;
    case Family::logarithmic: r = theta / (1.0 - theta); break;
    case Family::binomial: r = theta * (shape_ - 1.0) / (1.0 + theta); break;
    case Family::negbinomial:
      r = (shape_ - 1.0 + 2.0 * theta) / (1.0 - theta);
      break;
  }
  return e1 * (1.0 + r - e1);
}

double PowerSeries::log_pmf(long n, double theta) const {
  require_proper(theta);
  if (n < 1) throw std::domain_error("pmf needs n >= 1");
  const double la = log_an(n);
  if (la == -kInf) return -kInf;
  return la + static_cast<double>(n) * std::log(theta) - log_C(theta);
}

double PowerSeries::pmf(long n, double theta) const {
  const double lp = log_pmf(n, theta);
  return lp == -kInf ? 0.0 : std::exp(lp);
}

long PowerSeries::sample_n(double theta, Rng& rng) const {
  require_proper(theta);
  const double u = rng.uniform();
  long n = cmin();
  double p = pmf(n, theta);
  double cum = p;
  const long cap = series_cap();
  while (u > cum && 1.0 - cum >= 1e-12) {
    if (n >= cap) {
      throw std::runtime_error("sample_n: series truncation cap reached");
    }
    // One-step pmf recurrence p(n+1) = p(n) * theta * a_{n+1}/a_n.
    double ratio = 0.0;
    switch (family_) {
      case Family::geometric: ratio = theta; break;
      case Family::poisson: ratio = theta / (n + 1.0); break;
      case Family::logarithmic: ratio = theta * n / (n + 1.0); break;
      case Family::binomial:
        ratio = n >= shape_ ? 0.0 : theta * (shape_ - n) / (n + 1.0);
        break;
      case Family::negbinomial:
        ratio = theta * n / (n - shape_ + 1.0);
        break;
    }
    if (ratio <= 0.0) break;  // support exhausted (binomial n = m)
    p *= ratio;
    cum += p;
    ++n;
  }
  return n;
}

}  // namespace nps

#include "nps/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nps/quad.hpp"
#include "nps/rng.hpp"
#include "nps/special.hpp"

namespace nps::oracle {

namespace {

double binom_coeff(int k, int j) {
  double c = 1.0;
  for (int i = 0; i < j; ++i) c = c * (k - i) / (i + 1);
  return c;
}

// Bound on the pdf mass (times |y|^k) beyond |z| = 12. The density is
// exp(log(theta/C)) * phi(z) * C'(theta Phi(z)) / sigma, and C' is increasing
// on every family's extended argument range, so C' is bounded by its value
// at the ends of [min(theta,0), max(theta,0)].
double tail_bound(const NpsModel& model, int k) {
  const auto& fam = model.family();
  const double th = model.theta();
  const double a1 = fam.an(1);
  double cmax = a1;
  // C'(theta) can overflow for large theta; treat that as a huge bound.
  try {
    cmax = std::max(cmax, fam.dC(th));
  } catch (const std::overflow_error&) {
    return std::numeric_limits<double>::infinity();
  }
  const double pref = std::exp(fam.log_theta_over_C(th)) * std::max(cmax, 1e-300);
  // integral_{|z|>12} |mu + sigma z|^k phi(z) dz expanded binomially;
  // integral_{12}^inf z^j phi dz = 2^{(j-1)/2}/sqrt(2pi) * Gamma((j+1)/2) * Q((j+1)/2, 72).
  double tails = 0.0;
  for (int j = 0; j <= k; ++j) {
    const double a = (j + 1.0) / 2.0;
    const double gj = std::exp(std::lgamma(a)) * gamma_q(a, 72.0);
    const double zj = std::pow(2.0, (j - 1.0) / 2.0) / sqrt_2pi * 2.0 * gj;
    tails += binom_coeff(k, j) * std::pow(std::fabs(model.mu()), k - j) *
             std::pow(model.sigma(), j) * zj;
  }
  return std::fabs(pref) * tails;
}

}  // namespace

OracleReport integrate_pdf(const NpsModel& model, int k) {
  if (k < 0) throw std::domain_error("integrate_pdf needs k >= 0");
  const double lo = model.mu() - 12.0 * model.sigma();
  const double hi = model.mu() + 12.0 * model.sigma();
  const double scale = std::pow(std::fabs(model.mu()) + 12.0 * model.sigma(), k);
  const double tol = 1e-10 * std::max(1.0, scale);
  auto integrand = [&](double y) {
    return std::pow(y, k) * model.pdf(y);
  };
  const auto q = integrate(integrand, lo, hi, tol);
  OracleReport rep;
  rep.quantity = "moment_" + std::to_string(k) + "_quadrature";
  rep.value = q.value;
  rep.error_estimate = q.abs_err + tail_bound(model, k);
  rep.method = Method::quadrature;
  rep.converged = q.converged;
  return rep;
}

std::array<OracleReport, 4> mc_moments(const NpsModel& model, long n_draws,
                                       std::uint64_t seed) {
  if (n_draws < 1000) throw std::domain_error("mc_moments needs n_draws >= 1000");
  Rng rng(seed);
  const bool compound = model.proper();
  std::array<double, 4> sum{};
  std::array<double, 4> sumsq{};
  for (long i = 0; i < n_draws; ++i) {
    const double y = compound ? model.sample_compound(rng)
                              : model.sample_inverse(rng);
    double p = 1.0;
    for (int k = 0; k < 4; ++k) {
      p *= y;
      sum[k] += p;
      sumsq[k] += p * p;
    }
  }
  std::array<OracleReport, 4> out;
  const char* route = compound ? "compound" : "inverse";
  for (int k = 0; k < 4; ++k) {
    const double mean = sum[k] / n_draws;
    const double var = std::max(0.0, sumsq[k] / n_draws - mean * mean);
    out[k].quantity =
        "moment_" + std::to_string(k + 1) + "_mc_" + route;
    out[k].value = mean;
    out[k].error_estimate = std::sqrt(var / n_draws);
    out[k].method = Method::monte_carlo;
    out[k].converged = true;
  }
  return out;
}

OracleReport posterior_sums(const PowerSeries& family, double theta_star,
                            int r) {
  if (!(theta_star > 0.0) || !family.theta_extended(theta_star)) {
    throw std::domain_error("posterior_sums needs theta_star in (0, s)");
  }
  if (r < 0) throw std::domain_error("posterior_sums needs r >= 0");
  const double log_t = std::log(theta_star);
  double num = 0.0, den = 0.0;
  const long cap = series_cap();
  long z = family.cmin();
  for (;; ++z) {
    if (z > cap) {
      throw std::runtime_error("posterior_sums: truncation cap reached");
    }
    const double la = family.log_an(z);
    if (la == -std::numeric_limits<double>::infinity()) {
      if (z > family.cmin()) break;  // finite support exhausted (binomial)
      continue;
    }
    const double w = std::exp(la + std::log(static_cast<double>(z)) +
                              (z - 1.0) * log_t);
    den += w;
    num += std::pow(static_cast<double>(z), r) * w;
    const double zr = std::pow(static_cast<double>(z), r);
    if (w * zr < 1e-17 * std::max(num, 1e-300) && w < 1e-17 * den && z > 4) {
      break;
    }
  }
  OracleReport rep;
  rep.quantity = "posterior_moment_" + std::to_string(r);
  rep.value = num / den;
  rep.error_estimate = 1e-14 * std::fabs(rep.value);
  rep.method = Method::truncated_sum;
  rep.converged = true;
  return rep;
}

std::vector<double> fd_grad(const ScalarFn& fn, std::vector<double> x,
                            double h) {
  if (!(h > 0.0)) throw std::domain_error("fd_grad needs h > 0");
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const double hi = h * std::max(1.0, std::fabs(xi));
    x[i] = xi + hi;
    const double fp = fn(x);
    x[i] = xi - hi;
    const double fm = fn(x);
    x[i] = xi;
    g[i] = (fp - fm) / (2.0 * hi);
  }
  return g;
}

std::vector<std::vector<double>> fd_hess(const ScalarFn& fn,
                                         std::vector<double> x, double h) {
  if (!(h > 0.0)) throw std::domain_error("fd_hess needs h > 0");
  const std::size_t d = x.size();
  std::vector<std::vector<double>> hess(d, std::vector<double>(d, 0.0));
  const double f0 = fn(x);
  std::vector<double> step(d);
  for (std::size_t i = 0; i < d; ++i) {
    step[i] = h * std::max(1.0, std::fabs(x[i]));
  }
  for (std::size_t i = 0; i < d; ++i) {
    const double xi = x[i];
    x[i] = xi + step[i];
    const double fp = fn(x);
    x[i] = xi - step[i];
    const double fm = fn(x);
    x[i] = xi;
    hess[i][i] = (fp - 2.0 * f0 + fm) / (step[i] * step[i]);
    for (std::size_t j = i + 1; j < d; ++j) {
      const double xj = x[j];
      x[i] = xi + step[i];
      x[j] = xj + step[j];
      const double fpp = fn(x);
      x[j] = xj - step[j];
      const double fpm = fn(x);
      x[i] = xi - step[i];
      const double fmm = fn(x);
      x[j] = xj + step[j];
      const double fmp = fn(x);
      x[i] = xi;
      x[j] = xj;
      hess[i][j] = hess[j][i] =
          (fpp - fpm - fmp + fmm) / (4.0 * step[i] * step[j]);
    }
  }
  return hess;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw std::domain_error("ks_two_sample needs at least 2 points per sample");
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double d = 0.0;
  std::size_t ia = 0, ib = 0;
  while (ia < a.size() && ib < b.size()) {
    const double x = std::min(a[ia], b[ib]);
    while (ia < a.size() && a[ia] <= x) ++ia;
    while (ib < b.size() && b[ib] <= x) ++ib;
    d = std::max(d, std::fabs(ia / na - ib / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  const double lambda = (ne + 0.12 + 0.11 / ne) * d;
  // Asymptotic tail Q(lambda) = 2 sum (-1)^{j-1} exp(-2 j^2 lambda^2).
  double p = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    p += 2.0 * sign * term;
    if (term < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace nps::oracle

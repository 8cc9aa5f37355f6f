#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "nps/nps_model.hpp"
#include "nps/power_series.hpp"

namespace nps::oracle {

// Brute-force verifiers, intentionally independent of the closed forms they
// check: quadrature only sees the pdf primitive, posterior sums only the
// pmf coefficients, Monte Carlo only the samplers.

enum class Method { quadrature, monte_carlo, truncated_sum, finite_difference, ks_test };

struct OracleReport {
  std::string quantity;
  double value = 0.0;
  double error_estimate = 0.0;
  Method method = Method::quadrature;
  bool converged = true;
};

// E[Y^k] by adaptive quadrature over [mu-12sigma, mu+12sigma] plus an
// explicit Gaussian-tail remainder bound folded into error_estimate.
// k = 0 checks normalization.
OracleReport integrate_pdf(const NpsModel& model, int k);

// Raw moments E[Y], E[Y^2], E[Y^3], E[Y^4] from n_draws simulated values.
// Proper theta uses the compounding sampler (max of N normals), extended
// theta the inverse-cdf sampler; the route is recorded in the quantity tag.
std::array<OracleReport, 4> mc_moments(const NpsModel& model, long n_draws,
                                       std::uint64_t seed);

// r-th moment of the latent posterior g(z) proportional to a_z z t^{z-1},
// summed directly with adaptive truncation (the E-step oracle).
OracleReport posterior_sums(const PowerSeries& family, double theta_star,
                            int r);

using ScalarFn = std::function<double(const std::vector<double>&)>;

std::vector<double> fd_grad(const ScalarFn& fn, std::vector<double> x,
                            double h);
std::vector<std::vector<double>> fd_hess(const ScalarFn& fn,
                                         std::vector<double> x, double h);

// Asymptotic two-sample Kolmogorov-Smirnov p-value.
double ks_two_sample(std::vector<double> a, std::vector<double> b);

}  // namespace nps::oracle

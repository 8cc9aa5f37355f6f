#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "nps/mat3.hpp"
#include "nps/power_series.hpp"

namespace nps {

// Parameter vector (mu, sigma, theta).
struct Psi {
  double mu = 0.0;
  double sigma = 1.0;
  double theta = 0.5;
};

enum class FitMethod { direct, em };

struct FitResult {
  Psi psi_hat;
  double loglik = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  Mat3 cov{};   // inverse of the validated observed information
  Vec3 se{};    // sqrt of the cov diagonal; NaN when not invertible
  FitMethod method = FitMethod::direct;
  int iterations = 0;
  bool converged = false;
  bool boundary = false;  // theta driven against a domain edge
  std::vector<std::pair<int, double>> trace;  // (iteration, loglik)
  std::size_t n = 0;
  int n_params = 3;    // 2 for the plain-normal baseline
  std::string label;   // family name, or "normal" for the baseline
};

struct LatentPosterior {
  std::vector<double> ez;    // E(Z | Y = y_i), each >= 1
  std::vector<double> varz;  // Var(Z | Y = y_i), each >= 0
};

struct FitConfig {
  bool extended = false;  // let the direct fit search extended theta domains
  int max_iter = 0;       // 0 picks the method default (200 direct, 500 EM)
  double tol = 0.0;       // 0 picks the method default (relative 1e-8)
  std::vector<double> theta_starts;  // empty = family default grid
  std::size_t min_n = 10;
};

// Entry of the analytic-vs-finite-difference information comparison.
struct InfoGap {
  int row = 0;
  int col = 0;
  double analytic = 0.0;
  double fd = 0.0;
  double rel_gap = 0.0;
};

// The closed-form information entries are kept exactly as the source
// displays give them, an independent finite-difference Hessian of the
// log-likelihood is always computed alongside, and any entry where the two
// disagree beyond rel. 1e-3 is flagged; `validated` carries the FD value
// for flagged entries and the analytic value elsewhere, and is what the
// covariance/SE path consumes.
struct ObservedInfo {
  Mat3 analytic{};
  Mat3 fd{};
  Mat3 validated{};
  double max_rel_gap = 0.0;
  std::vector<InfoGap> discrepancies;
};

struct LouisResult {
  Mat3 info{};  // lc - lm, the observed information of the EM estimate
  Mat3 lc{};    // conditional expectation of the complete-data information
  Mat3 lm{};    // conditional covariance of the complete-data score
  Vec3 se{};    // sqrt of diag(info^-1); NaN when info is singular
  bool invertible = false;
};

struct CompareRow {
  FitResult fit;
  int rank = 0;  // 1 = best AIC (ties broken by BIC)
};

struct CompareResult {
  std::vector<CompareRow> rows;  // sorted best first
  std::vector<std::pair<std::string, std::string>> failures;  // label, reason
};

// Incomplete-data log-likelihood; returns -infinity when psi falls outside
// the family domain or a term is undefined.
double loglik(const PowerSeries& family, const Psi& psi,
              const std::vector<double>& y);

// Analytic gradient of loglik in (mu, sigma, theta).
Vec3 score(const PowerSeries& family, const Psi& psi,
           const std::vector<double>& y);

ObservedInfo observed_info(const PowerSeries& family, const Psi& psi,
                           const std::vector<double>& y);

FitResult fit_direct(const PowerSeries& family, const std::vector<double>& y,
                     const FitConfig& config = {});

// Posterior mean and variance of the latent count given each observation.
// Requires theta in the proper domain.
LatentPosterior e_step(const PowerSeries& family, const Psi& psi,
                       const std::vector<double>& y);

FitResult fit_em(const PowerSeries& family, const std::vector<double>& y,
                 const FitConfig& config = {});

LouisResult louis_se(const PowerSeries& family, const Psi& psi_hat,
                     const std::vector<double>& y);

// Closed-form Gaussian MLE baseline (2 parameters).
FitResult fit_normal(const std::vector<double>& y);

// Asymptotic confidence interval for parameter r (0 = mu, 1 = sigma,
// 2 = theta) at the given two-sided coverage level.
std::pair<double, double> aci(const FitResult& fit, int r,
                              double level = 0.95);

CompareResult compare(const std::vector<double>& y,
                      const std::vector<PowerSeries>& families,
                      FitMethod method = FitMethod::direct,
                      const FitConfig& config = {},
                      bool include_normal = true);

}  // namespace nps

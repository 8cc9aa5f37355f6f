#include "nps/inference.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "nps/oracle.hpp"
#include "nps/roots.hpp"
#include "nps/special.hpp"

namespace nps {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Per-observation building blocks. With t = theta Phi(zeta) and
// R = phi(zeta)/Phi(zeta), every score and information term reduces to R
// and the ratios
//   g1(t) = t C''(t)/C'(t)            (the posterior mean shift E[Z|y]-1)
//   g2(t) = t^2 [C'''(t)/C'(t) - (C''(t)/C'(t))^2]
// both of which stay finite as t -> 0 in every family, so deep-tail
// observations never produce 0 * inf.
double g1(const PowerSeries& fam, double t) {
  switch (fam.family()) {
    case Family::geometric:
      return 2.0 * t / (1.0 - t);
    case Family::poisson:
      return t;
    case Family::logarithmic:
      return t / (1.0 - t);
    case Family::binomial:
      return t * (fam.shape() - 1.0) / (1.0 + t);
    case Family::negbinomial:
      return (fam.shape() - 1.0 + 2.0 * t) / (1.0 - t);
  }
  return 0.0;
}

double g2(const PowerSeries& fam, double t) {
  switch (fam.family()) {
    case Family::geometric: {
      const double q = 1.0 - t;
      return 2.0 * t * t / (q * q);
    }
    case Family::poisson:
      return 0.0;
    case Family::logarithmic: {
      const double q = 1.0 - t;
      return t * t / (q * q);
    }
    case Family::binomial: {
      const double p = 1.0 + t;
      return -t * t * (fam.shape() - 1.0) / (p * p);
    }
    case Family::negbinomial: {
      const double k = fam.shape();
      const double q = 1.0 - t;
      return (2.0 * k * t + 2.0 * t * t - k - 2.0 * t + 1.0) / (q * q);
    }
  }
  return 0.0;
}

// theta^2 (C''(theta)/C - (C'(theta)/C)^2), assembled from the stable
// ratios: theta^2 C''/C = g1(theta) en(theta) and theta^2 (C'/C)^2 = en^2.
double theta2_dlogratio(const PowerSeries& fam, double theta) {
  const double e = fam.en(theta);
  return g1(fam, theta) * e - e * e;
}

struct DataStats {
  double mean = 0.0;
  double sd = 1.0;  // MLE standard deviation
};

DataStats data_stats(const std::vector<double>& y) {
  DataStats s;
  const double n = static_cast<double>(y.size());
  s.mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : y) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / n);
  return s;
}

bool theta_in_domain(const PowerSeries& fam, double theta, bool extended) {
  if (theta == 0.0) return extended && fam.cmin() == 1;
  return extended ? fam.theta_extended(theta) : fam.theta_proper(theta);
}

// ---------------------------------------------------------------------------
// Parameter transforms for unconstrained optimization.

enum class MapKind {
  logistic01,     // (0, 1)
  exp_pos,        // (0, inf)
  below_one,      // (-inf, 1): theta = 1 - exp(-w)
  identity,       // all reals (theta = 0 is a removable point of loglik)
  above_minus1,   // (-1, inf): theta = expm1(w)
};

MapKind theta_map(const PowerSeries& fam, bool extended) {
  switch (fam.family()) {
    case Family::geometric:
    case Family::logarithmic:
      return extended ? MapKind::below_one : MapKind::logistic01;
    case Family::poisson:
      return extended ? MapKind::identity : MapKind::exp_pos;
    case Family::binomial:
      return extended ? MapKind::above_minus1 : MapKind::exp_pos;
    case Family::negbinomial:
      return MapKind::logistic01;
  }
  return MapKind::logistic01;
}

double map_to_theta(MapKind k, double w) {
  switch (k) {
    case MapKind::logistic01:
      return 1.0 / (1.0 + std::exp(-w));
    case MapKind::exp_pos:
      return std::exp(w);
    case MapKind::below_one:
      return -std::expm1(-w);
    case MapKind::identity:
      return w;
    case MapKind::above_minus1:
      return std::expm1(w);
  }
  return w;
}

double map_dtheta_dw(MapKind k, double w) {
  switch (k) {
    case MapKind::logistic01: {
      const double t = 1.0 / (1.0 + std::exp(-w));
      return t * (1.0 - t);
    }
    case MapKind::exp_pos:
      return std::exp(w);
    case MapKind::below_one:
      return std::exp(-w);
    case MapKind::identity:
      return 1.0;
    case MapKind::above_minus1:
      return std::exp(w);
  }
  return 1.0;
}

double map_to_w(MapKind k, double theta) {
  switch (k) {
    case MapKind::logistic01:
      return std::log(theta / (1.0 - theta));
    case MapKind::exp_pos:
      return std::log(theta);
    case MapKind::below_one:
      return -std::log1p(-theta);
    case MapKind::identity:
      return theta;
    case MapKind::above_minus1:
      return std::log1p(theta);
  }
  return theta;
}

bool map_at_boundary(MapKind k, double w) {
  switch (k) {
    case MapKind::logistic01:
      return std::fabs(w) > 30.0;
    case MapKind::exp_pos:
      return w < -30.0 || w > 30.0;
    case MapKind::below_one:
      return w > 30.0 || w < -30.0;
    case MapKind::identity:
      return std::fabs(w) > 1e8;
    case MapKind::above_minus1:
      return std::fabs(w) > 30.0;
  }
  return false;
}

std::vector<double> default_starts(const PowerSeries& fam, bool extended) {
  const bool unit_interval = fam.family() == Family::geometric ||
                             fam.family() == Family::logarithmic ||
                             fam.family() == Family::negbinomial;
  std::vector<double> starts =
      unit_interval ? std::vector<double>{0.2, 0.5, 0.8}
                    : std::vector<double>{0.5, 1.0, 3.0};
  if (extended) {
    switch (fam.family()) {
      case Family::geometric:
      case Family::logarithmic:
        starts.insert(starts.end(), {-0.5, -2.0});
        break;
      case Family::poisson:
        starts.insert(starts.end(), {-0.5, -3.0});
        break;
      case Family::binomial:
        starts.insert(starts.end(), {-0.3, -0.8});
        break;
      case Family::negbinomial:
        break;
    }
  }
  return starts;
}

// ---------------------------------------------------------------------------
// A small dense BFGS minimizer in 3 variables with backtracking line search.

struct BfgsOut {
  Vec3 x{};
  double f = kInf;
  Vec3 g{};
  int iters = 0;
  bool converged = false;
  std::vector<std::pair<int, double>> trace;
};

double dot3(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

double norm_inf3(const Vec3& a) {
  return std::max({std::fabs(a[0]), std::fabs(a[1]), std::fabs(a[2])});
}

BfgsOut bfgs_min(const std::function<double(const Vec3&)>& F,
                 const std::function<Vec3(const Vec3&)>& G, Vec3 x0,
                 int max_iter, double gtol) {
  BfgsOut out;
  Vec3 x = x0;
  double f = F(x);
  if (!std::isfinite(f)) {
    out.x = x;
    out.f = f;
    return out;
  }
  Vec3 g = G(x);
  Mat3 h = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  bool h_scaled = false;
  int stall = 0;
  for (int it = 0; it < max_iter; ++it) {
    out.trace.emplace_back(it, -f);
    if (norm_inf3(g) <= gtol) {
      out.converged = true;
      break;
    }
    Vec3 d = mat3_mul_vec(h, g);
    for (double& v : d) v = -v;
    double slope = dot3(g, d);
    if (!(slope < 0.0)) {
      // Reset a corrupted curvature estimate and fall back to steepest
      // descent, normalized so the first trial step is O(1).
      h = {1, 0, 0, 0, 1, 0, 0, 0, 1};
      h_scaled = false;
      const double sc = std::max(1.0, norm_inf3(g));
      d = {-g[0] / sc, -g[1] / sc, -g[2] / sc};
      slope = dot3(g, d);
    }
    if (!h_scaled) {
      // First iterate: unit-length steepest descent trial.
      const double sc = std::max(1.0, norm_inf3(g));
      d = {-g[0] / sc, -g[1] / sc, -g[2] / sc};
      slope = dot3(g, d);
    }
    double alpha = 1.0;
    double f_new = kInf;
    Vec3 x_new{};
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = {x[0] + alpha * d[0], x[1] + alpha * d[1], x[2] + alpha * d[2]};
      f_new = F(x_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    ++out.iters;
    if (!accepted) {
      out.converged = norm_inf3(g) <= 100.0 * gtol;
      break;
    }
    const Vec3 g_new = G(x_new);
    const Vec3 s = {x_new[0] - x[0], x_new[1] - x[1], x_new[2] - x[2]};
    const Vec3 yv = {g_new[0] - g[0], g_new[1] - g[1], g_new[2] - g[2]};
    const double sy = dot3(s, yv);
    if (sy > 1e-12 * std::sqrt(dot3(s, s) * dot3(yv, yv))) {
      if (!h_scaled) {
        const double yy = dot3(yv, yv);
        if (yy > 0.0) {
          const double sc = sy / yy;
          h = {sc, 0, 0, 0, sc, 0, 0, 0, sc};
        }
        h_scaled = true;
      }
      // Inverse-Hessian BFGS update.
      const double rho = 1.0 / sy;
      const Vec3 hy = mat3_mul_vec(h, yv);
      const double yhy = dot3(yv, hy);
      Mat3 h_next;
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          h_next[3 * i + j] = h[3 * i + j] -
                              rho * (s[i] * hy[j] + hy[i] * s[j]) +
                              rho * rho * yhy * s[i] * s[j] +
                              rho * s[i] * s[j];
        }
      }
      h = h_next;
    }
    const double df = f - f_new;
    x = x_new;
    g = g_new;
    f = f_new;
    if (df <= 1e-14 * (std::fabs(f) + 1.0)) {
      if (++stall >= 3) {
        out.converged = norm_inf3(g) <= 100.0 * gtol;
        break;
      }
    } else {
      stall = 0;
    }
  }
  if (norm_inf3(g) <= gtol) out.converged = true;
  out.x = x;
  out.f = f;
  out.g = g;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Log-likelihood and derivatives.

double loglik(const PowerSeries& family, const Psi& psi,
              const std::vector<double>& y) {
  if (y.empty()) throw std::invalid_argument("loglik: empty data");
  const double n = static_cast<double>(y.size());
  if (!(psi.sigma > 0.0) || !std::isfinite(psi.sigma) ||
      !std::isfinite(psi.mu) || !std::isfinite(psi.theta)) {
    return -kInf;
  }
  if (psi.theta == 0.0) {
    // Removable point: the family degenerates to the plain normal when the
    // first series coefficient carries all the mass.
    if (family.cmin() != 1) return -kInf;
    double ssq = 0.0;
    for (double v : y) {
      const double z = (v - psi.mu) / psi.sigma;
      ssq += z * z;
    }
    return -n * std::log(psi.sigma) - n * log_sqrt_2pi - 0.5 * ssq;
  }
  if (!family.theta_extended(psi.theta)) return -kInf;
  double acc = n * family.log_theta_over_C(psi.theta) -
               n * std::log(psi.sigma) - n * log_sqrt_2pi;
  for (double v : y) {
    const double z = (v - psi.mu) / psi.sigma;
    acc -= 0.5 * z * z;
    const double t = psi.theta * normal_cdf(z);
    if (t == 0.0) {
      // Phi underflow: C'(t) -> a_1 for families starting at 1, and 0
      // (log -> -inf) when the series starts later.
      if (family.cmin() != 1) return -kInf;
      acc += std::log(family.an(1));
    } else {
      acc += family.log_dC(t);
    }
  }
  return std::isfinite(acc) ? acc : -kInf;
}

Vec3 score(const PowerSeries& family, const Psi& psi,
           const std::vector<double>& y) {
  if (y.empty()) throw std::invalid_argument("score: empty data");
  const double n = static_cast<double>(y.size());
  // theta = 0 is a removable point; evaluate the smooth continuation a hair
  // away from it rather than special-casing every limit.
  const double theta = psi.theta == 0.0 ? 1e-12 : psi.theta;
  const double sigma = psi.sigma;
  double sz = 0.0, sz2 = 0.0, s_rg1 = 0.0, s_zrg1 = 0.0, s_g1 = 0.0;
  for (double v : y) {
    const double z = (v - psi.mu) / sigma;
    const double t = theta * normal_cdf(z);
    const double r = inv_mills(z);
    const double a = g1(family, t);
    sz += z;
    sz2 += z * z;
    s_rg1 += r * a;
    s_zrg1 += z * r * a;
    s_g1 += a;
  }
  Vec3 s;
  s[0] = (sz - s_rg1) / sigma;
  s[1] = (sz2 - n - s_zrg1) / sigma;
  s[2] = n * family.dlog_theta_over_C(theta) + s_g1 / theta;
  return s;
}

ObservedInfo observed_info(const PowerSeries& family, const Psi& psi,
                           const std::vector<double>& y) {
  if (y.empty()) throw std::invalid_argument("observed_info: empty data");
  const double n = static_cast<double>(y.size());
  const double theta = psi.theta == 0.0 ? 1e-12 : psi.theta;
  const double sigma = psi.sigma;

  double sz = 0.0, sz2 = 0.0;
  double s_rg1 = 0.0, s_zrg1 = 0.0, s_z2rg1 = 0.0, s_z3rg1 = 0.0;
  double s_r2g2 = 0.0, s_zr2g2 = 0.0, s_z2r2gp = 0.0;
  double s_rv = 0.0, s_zrg2 = 0.0, s_g2 = 0.0;
  for (double v : y) {
    const double z = (v - psi.mu) / sigma;
    const double t = theta * normal_cdf(z);
    const double r = inv_mills(z);
    const double a = g1(family, t);
    const double b = g2(family, t);
    sz += z;
    sz2 += z * z;
    s_rg1 += r * a;
    s_zrg1 += z * r * a;
    s_z2rg1 += z * z * r * a;
    s_z3rg1 += z * z * z * r * a;
    s_r2g2 += r * r * b;
    s_zr2g2 += z * r * r * b;
    s_z2r2gp += z * z * r * r * (b + 2.0 * a * a);
    s_rv += r * (a + b);
    s_zrg2 += z * r * b;
    s_g2 += b;
  }
  const double s2 = sigma * sigma;

  ObservedInfo out;
  // Closed-form entries, kept exactly as the source displays give them
  // (information sign convention). The sigma-sigma and sigma-theta entries
  // are transcribed verbatim even though the finite-difference oracle below
  // regularly overrules them; that disagreement is the point of the report.
  out.analytic[0] = (n + s_zrg1 - s_r2g2) / s2;
  out.analytic[1] = (2.0 * sz - s_rg1 + s_z2rg1 - s_zr2g2) / s2;
  out.analytic[2] = s_rv / (sigma * theta);
  out.analytic[4] = (-n + 3.0 * sz2 - s_z3rg1 + s_z2r2gp) / s2;
  out.analytic[5] = s_zrg1 / (s2 * theta) + s_zrg2 / (sigma * theta);
  out.analytic[8] =
      (n - s_g2 + n * theta2_dlogratio(family, theta)) / (theta * theta);
  out.analytic[3] = out.analytic[1];
  out.analytic[6] = out.analytic[2];
  out.analytic[7] = out.analytic[5];

  // Independent finite-difference Hessian of the log-likelihood, with the
  // step kept clear of the domain edges.
  double gap = kInf;
  switch (family.family()) {
    case Family::geometric:
    case Family::logarithmic:
      gap = 1.0 - theta;
      break;
    case Family::poisson:
      break;
    case Family::binomial:
      gap = 1.0 + theta;
      break;
    case Family::negbinomial:
      gap = std::min(theta, 1.0 - theta);
      break;
  }
  const double h =
      std::min({5e-5, 0.2 * sigma / std::max(1.0, sigma),
                0.2 * gap / std::max(1.0, std::fabs(theta))});
  const auto fn = [&](const std::vector<double>& v) {
    return loglik(family, Psi{v[0], v[1], v[2]}, y);
  };
  const auto hess = oracle::fd_hess(fn, {psi.mu, sigma, theta}, h);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      out.fd[3 * i + j] = -0.5 * (hess[i][j] + hess[j][i]);
    }
  }

  out.validated = out.analytic;
  const double floor = 1e-6 * n;
  for (int i = 0; i < 3; ++i) {
    for (int j = i; j < 3; ++j) {
      const double a = out.analytic[3 * i + j];
      const double f = out.fd[3 * i + j];
      const double mag = std::max(std::fabs(a), std::fabs(f));
      if (mag <= floor) continue;
      const double rel = std::fabs(a - f) / mag;
      out.max_rel_gap = std::max(out.max_rel_gap, rel);
      if (rel > 1e-3) {
        out.discrepancies.push_back({i, j, a, f, rel});
        out.validated[3 * i + j] = f;
        out.validated[3 * j + i] = f;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Direct maximum likelihood.

namespace {

// Damped Newton refinement on the raw scale using the validated
// information. Both fitting paths stop on loose criteria (BFGS on a
// transformed-gradient threshold, EM on a likelihood-change threshold);
// this drives the score to machine level so the two agree to full
// precision. Returns the refined log-likelihood.
double newton_polish(const PowerSeries& family, Psi& psi,
                     const std::vector<double>& y, bool extended,
                     double cur) {
  for (int it = 0; it < 5; ++it) {
    const Vec3 s = score(family, psi, y);
    if (norm_inf3(s) <= 1e-9 * std::max<double>(1.0, y.size())) break;
    ObservedInfo oi;
    try {
      oi = observed_info(family, psi, y);
    } catch (const std::exception&) {
      break;
    }
    Mat3 inv;
    if (!invert3(oi.validated, inv)) break;
    const Vec3 step = mat3_mul_vec(inv, s);
    double lam = 1.0;
    bool ok = false;
    while (lam > 1e-3) {
      const Psi cand{psi.mu + lam * step[0], psi.sigma + lam * step[1],
                     psi.theta + lam * step[2]};
      if (cand.sigma > 0.0 && theta_in_domain(family, cand.theta, extended) &&
          cand.theta != 0.0) {
        const double ll = loglik(family, cand, y);
        if (ll >= cur - 1e-10 * std::max(1.0, std::fabs(cur))) {
          psi = cand;
          cur = ll;
          ok = true;
          break;
        }
      }
      lam *= 0.5;
    }
    if (!ok) break;
  }
  return cur;
}

void finish_with_cov(const PowerSeries& family, FitResult& fit,
                     const std::vector<double>& y) {
  fit.cov = {};
  fit.se = {kNan, kNan, kNan};
  ObservedInfo info;
  try {
    info = observed_info(family, fit.psi_hat, y);
  } catch (const std::exception&) {
    return;
  }
  Mat3 cov;
  if (!invert3(info.validated, cov)) return;
  fit.cov = cov;
  for (int i = 0; i < 3; ++i) {
    fit.se[i] = cov[4 * i] > 0.0 ? std::sqrt(cov[4 * i]) : kNan;
  }
}

void fill_criteria(FitResult& fit) {
  fit.aic = 2.0 * fit.n_params - 2.0 * fit.loglik;
  fit.bic = fit.n_params * std::log(static_cast<double>(fit.n)) -
            2.0 * fit.loglik;
}

}  // namespace

FitResult fit_direct(const PowerSeries& family, const std::vector<double>& y,
                     const FitConfig& config) {
  if (y.size() < config.min_n) {
    throw std::invalid_argument("fit_direct: need at least " +
                                std::to_string(config.min_n) +
                                " observations");
  }
  const DataStats stats = data_stats(y);
  if (!(stats.sd > 0.0)) {
    throw std::invalid_argument("fit_direct: data has zero variance");
  }
  const MapKind kind = theta_map(family, config.extended);
  const int max_iter = config.max_iter > 0 ? config.max_iter : 200;
  const double gtol = 1e-7 * std::max<double>(10.0, y.size());

  const auto to_psi = [&](const Vec3& x) {
    return Psi{x[0], std::exp(x[1]), map_to_theta(kind, x[2])};
  };
  const auto neg_ll = [&](const Vec3& x) { return -loglik(family, to_psi(x), y); };
  const auto neg_grad = [&](const Vec3& x) {
    const Psi psi = to_psi(x);
    const Vec3 s = score(family, psi, y);
    return Vec3{-s[0], -s[1] * psi.sigma,
                -s[2] * map_dtheta_dw(kind, x[2])};
  };

  std::vector<double> starts =
      config.theta_starts.empty() ? default_starts(family, config.extended)
                                  : config.theta_starts;
  BfgsOut best;
  for (double th0 : starts) {
    if (!theta_in_domain(family, th0, config.extended) || th0 == 0.0) continue;
    const Vec3 x0 = {stats.mean, std::log(stats.sd), map_to_w(kind, th0)};
    BfgsOut run = bfgs_min(neg_ll, neg_grad, x0, max_iter, gtol);
    if (run.f < best.f) best = std::move(run);
  }
  if (!std::isfinite(best.f)) {
    throw std::runtime_error("fit_direct: every start failed to produce a "
                             "finite log-likelihood");
  }

  FitResult fit;
  fit.psi_hat = to_psi(best.x);
  fit.loglik = -best.f;
  fit.method = FitMethod::direct;
  fit.iterations = best.iters;
  fit.converged = best.converged;
  fit.boundary = map_at_boundary(kind, best.x[2]);
  fit.trace = std::move(best.trace);
  fit.n = y.size();
  fit.n_params = 3;
  fit.label = family.name();

  if (!fit.boundary) {
    fit.loglik = newton_polish(family, fit.psi_hat, y, config.extended,
                               fit.loglik);
  }
  fill_criteria(fit);
  finish_with_cov(family, fit, y);
  return fit;
}

// ---------------------------------------------------------------------------
// EM algorithm.

LatentPosterior e_step(const PowerSeries& family, const Psi& psi,
                       const std::vector<double>& y) {
  if (!family.theta_proper(psi.theta)) {
    throw std::domain_error(
        "e_step: theta must lie in the proper domain (the latent count has "
        "no distribution otherwise)");
  }
  LatentPosterior post;
  post.ez.reserve(y.size());
  post.varz.reserve(y.size());
  for (double v : y) {
    const double z = (v - psi.mu) / psi.sigma;
    const double t = psi.theta * normal_cdf(z);
    const double a = g1(family, t);
    const double b = g2(family, t);
    post.ez.push_back(1.0 + a);
    post.varz.push_back(std::max(0.0, a + b));
  }
  return post;
}

namespace {

// M-step for mu: root of the (scaled) first CM equation
//   F(m) = (1/sigma) sum (y_i - m) - sum w_i R((y_i - m)/sigma),
// which is strictly decreasing in m.
double mstep_mu(const std::vector<double>& y, const std::vector<double>& w,
                double mu0, double sigma) {
  auto f = [&](double m) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double z = (y[i] - m) / sigma;
      acc += z - w[i] * inv_mills(z);
    }
    return acc;
  };
  auto df = [&](double m) {
    double acc = -static_cast<double>(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double z = (y[i] - m) / sigma;
      const double r = inv_mills(z);
      acc -= w[i] * r * (z + r);
    }
    return acc / sigma;
  };
  double lo = mu0 - sigma, hi = mu0 + sigma;
  double flo = f(lo), fhi = f(hi);
  if (!bracket_expand(f, lo, hi, flo, fhi)) {
    throw std::runtime_error("fit_em: mu update failed to bracket");
  }
  const RootResult r =
      newton_bracketed(f, df, std::clamp(mu0, lo, hi), lo, hi, 1e-11 * sigma);
  if (!r.converged) throw std::runtime_error("fit_em: mu update diverged");
  return r.x;
}

// M-step for sigma: root of the (scaled) second CM equation
//   G(s) = (1/s^2) sum d_i^2 - (1/s) sum w_i d_i R(d_i/s) - n,  d_i = y_i - mu.
double mstep_sigma(const std::vector<double>& y, const std::vector<double>& w,
                   double mu, double sigma0) {
  auto f = [&](double s) {
    double acc = -static_cast<double>(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double d = y[i] - mu;
      const double z = d / s;
      acc += z * z - w[i] * z * inv_mills(z);
    }
    return acc;
  };
  double lo = sigma0 * 0.5, hi = sigma0 * 2.0;
  double flo = f(lo), fhi = f(hi);
  if (!bracket_expand(f, lo, hi, flo, fhi, 60, 1e-12, 1e12)) {
    throw std::runtime_error("fit_em: sigma update failed to bracket");
  }
  const RootResult r = brent(f, lo, hi, 1e-11 * sigma0);
  if (!r.converged) throw std::runtime_error("fit_em: sigma update diverged");
  return r.x;
}

// M-step for theta: solve E[N](theta) = mean posterior count. E[N] is
// strictly increasing on the proper domain.
double mstep_theta(const PowerSeries& fam, double zbar, double theta0,
                   bool* boundary) {
  const double eps = 1e-12;
  if (zbar <= 1.0 + 1e-14) {
    *boundary = true;
    return eps;
  }
  switch (fam.family()) {
    case Family::geometric:
      return std::clamp(1.0 - 1.0 / zbar, eps, 1.0 - eps);
    case Family::negbinomial: {
      const double k = fam.shape();
      if (zbar <= k * (1.0 + 1e-14)) {
        *boundary = true;
        return eps;
      }
      return std::clamp(1.0 - k / zbar, eps, 1.0 - eps);
    }
    default:
      break;
  }
  auto f = [&](double th) { return fam.en(th) - zbar; };
  auto df = [&](double th) { return fam.var_n(th) / th; };
  double lo = eps, hi;
  if (fam.sup_proper() < kInf) {
    hi = fam.sup_proper() - eps;
  } else {
    hi = std::max(1.0, 2.0 * theta0);
    while (f(hi) < 0.0 && hi < 1e12) hi *= 4.0;
    if (f(hi) < 0.0) {
      *boundary = true;
      return hi;
    }
  }
  const RootResult r = newton_bracketed(
      f, df, std::clamp(theta0, lo, hi), lo, hi,
      1e-13 * std::max(1.0, std::fabs(theta0)));
  if (!r.converged) throw std::runtime_error("fit_em: theta update diverged");
  return r.x;
}

}  // namespace

FitResult fit_em(const PowerSeries& family, const std::vector<double>& y,
                 const FitConfig& config) {
  if (y.size() < config.min_n) {
    throw std::invalid_argument("fit_em: need at least " +
                                std::to_string(config.min_n) +
                                " observations");
  }
  const DataStats stats = data_stats(y);
  if (!(stats.sd > 0.0)) {
    throw std::invalid_argument("fit_em: data has zero variance");
  }
  const int max_iter = config.max_iter > 0 ? config.max_iter : 500;
  const double tol = config.tol > 0.0 ? config.tol : 1e-8;

  std::vector<double> starts = config.theta_starts.empty()
                                   ? default_starts(family, false)
                                   : config.theta_starts;
  FitResult best;
  best.loglik = -kInf;
  bool have_best = false;
  for (double th0 : starts) {
    if (!family.theta_proper(th0)) continue;
    Psi psi{stats.mean, stats.sd, th0};
    FitResult fit;
    fit.method = FitMethod::em;
    fit.n = y.size();
    fit.n_params = 3;
    fit.label = family.name();
    double prev = loglik(family, psi, y);
    double prev_step = 0.0;
    fit.trace.emplace_back(0, prev);
    bool boundary = false;
    for (int it = 1; it <= max_iter; ++it) {
      const LatentPosterior post = e_step(family, psi, y);
      std::vector<double> w(post.ez.size());
      double zbar = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = post.ez[i] - 1.0;
        zbar += post.ez[i];
      }
      zbar /= static_cast<double>(w.size());
      psi.mu = mstep_mu(y, w, psi.mu, psi.sigma);
      psi.sigma = mstep_sigma(y, w, psi.mu, psi.sigma);
      boundary = false;
      psi.theta = mstep_theta(family, zbar, psi.theta, &boundary);
      const double cur = loglik(family, psi, y);
      fit.trace.emplace_back(it, cur);
      fit.iterations = it;
      const double step = cur - prev;
      const double scale = tol * std::max(1.0, std::fabs(cur));
      // EM converges linearly; when successive gains contract steadily,
      // Aitken extrapolation estimates the loglik still to be gained and
      // gives a stop rule on distance to the limit rather than step size.
      bool stop;
      if (it >= 2 && prev_step > 0.0 && step > 0.0 && step < prev_step) {
        const double rate = step / prev_step;
        stop = step * rate / (1.0 - rate) < scale;
      } else {
        stop = std::fabs(step) < scale;
      }
      prev_step = step;
      prev = cur;
      if (stop) {
        fit.converged = true;
        break;
      }
    }
    fit.psi_hat = psi;
    fit.loglik = prev;
    fit.boundary = boundary || psi.theta <= 2e-12;
    if (!have_best || fit.loglik > best.loglik) {
      best = std::move(fit);
      have_best = true;
    }
  }
  if (!have_best) {
    throw std::runtime_error("fit_em: no valid theta start");
  }
  // Polish only runs that EM itself finished. A run cut short by the sweep
  // limit is still crawling along a flat ridge; Newton steps from there jump
  // far along the ridge and misstate what the EM schedule produced.
  if (best.converged && !best.boundary) {
    best.loglik = newton_polish(family, best.psi_hat, y, false, best.loglik);
  }
  fill_criteria(best);
  // Louis-method covariance; falls back to the direct-path information if
  // the Louis matrix is singular.
  const LouisResult louis = louis_se(family, best.psi_hat, y);
  if (louis.invertible) {
    Mat3 cov;
    invert3(louis.info, cov);
    best.cov = cov;
    best.se = louis.se;
  } else {
    finish_with_cov(family, best, y);
  }
  return best;
}

LouisResult louis_se(const PowerSeries& family, const Psi& psi_hat,
                     const std::vector<double>& y) {
  if (y.empty()) throw std::invalid_argument("louis_se: empty data");
  const LatentPosterior post = e_step(family, psi_hat, y);
  const double n = static_cast<double>(y.size());
  const double sigma = psi_hat.sigma;
  const double theta = psi_hat.theta;
  const double s2 = sigma * sigma;

  double sz = 0.0, sez = 0.0, svz = 0.0;
  double c_wzr = 0.0, c_wr = 0.0, c_wzr_zr = 0.0, c_wz2r_zr = 0.0,
         c_wzr2 = 0.0;
  double v_r2 = 0.0, v_zr2 = 0.0, v_z2r2 = 0.0, v_r = 0.0, v_zr = 0.0;
  double c_wz3r = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double z = (y[i] - psi_hat.mu) / sigma;
    const double r = inv_mills(z);
    const double w = post.ez[i] - 1.0;
    const double vz = post.varz[i];
    sz += z;
    sez += post.ez[i];
    svz += vz;
    c_wr += w * r;
    c_wzr += w * z * r;
    c_wz3r += w * z * z * z * r;
    c_wzr_zr += w * (z * r + r * r);              // w (zeta R + R^2)
    c_wz2r_zr += w * z * r * (z + r);             // w zeta R (zeta + R)
    c_wzr2 += w * z * z * r * r;                  // w zeta^2 R^2
    v_r2 += r * r * vz;
    v_zr2 += z * r * r * vz;
    v_z2r2 += z * z * r * r * vz;
    v_r += r * vz;
    v_zr += z * r * vz;
  }
  double sz2 = 0.0;
  for (double v : y) {
    const double z = (v - psi_hat.mu) / sigma;
    sz2 += z * z;
  }

  LouisResult out;
  // Conditional expectation of the complete-data information. The
  // cross-term displays in the source carry a transcription defect (a stray
  // (y_i - mu) factor in c12 and a sign slip in the last c22 term); the
  // forms below are the ones certified by the finite-difference oracle of
  // the incomplete-data Hessian.
  out.lc[0] = (n + c_wzr_zr) / s2;
  out.lc[1] = (2.0 * sz - c_wr + c_wz2r_zr) / s2;
  out.lc[2] = 0.0;
  out.lc[4] = (3.0 * sz2 - n - 2.0 * c_wzr + c_wz3r + c_wzr2) / s2;
  out.lc[5] = 0.0;
  out.lc[8] = (sez + n * theta2_dlogratio(family, theta)) / (theta * theta);
  out.lc[3] = out.lc[1];
  out.lc[6] = out.lc[2];
  out.lc[7] = out.lc[5];

  // Conditional covariance of the complete-data score.
  out.lm[0] = v_r2 / s2;
  out.lm[1] = v_zr2 / s2;
  out.lm[2] = -v_r / (sigma * theta);
  out.lm[4] = v_z2r2 / s2;
  out.lm[5] = -v_zr / (sigma * theta);
  out.lm[8] = svz / (theta * theta);
  out.lm[3] = out.lm[1];
  out.lm[6] = out.lm[2];
  out.lm[7] = out.lm[5];

  for (int i = 0; i < 9; ++i) out.info[i] = out.lc[i] - out.lm[i];
  Mat3 cov;
  out.invertible = invert3(out.info, cov);
  if (out.invertible) {
    for (int i = 0; i < 3; ++i) {
      out.se[i] = cov[4 * i] > 0.0 ? std::sqrt(cov[4 * i]) : kNan;
    }
  } else {
    out.se = {kNan, kNan, kNan};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Baseline, intervals, comparison.

FitResult fit_normal(const std::vector<double>& y) {
  if (y.size() < 2) throw std::invalid_argument("fit_normal: need n >= 2");
  const DataStats stats = data_stats(y);
  if (!(stats.sd > 0.0)) {
    throw std::invalid_argument("fit_normal: data has zero variance");
  }
  const double n = static_cast<double>(y.size());
  FitResult fit;
  fit.psi_hat = {stats.mean, stats.sd, 0.0};
  fit.loglik = -0.5 * n * (std::log(2.0 * pi * stats.sd * stats.sd) + 1.0);
  fit.method = FitMethod::direct;
  fit.converged = true;
  fit.n = y.size();
  fit.n_params = 2;
  fit.label = "normal";
  fill_criteria(fit);
  const double v = stats.sd * stats.sd;
  fit.cov = {v / n, 0, 0, 0, 0.5 * v / n, 0, 0, 0, 0};
  fit.se = {std::sqrt(v / n), std::sqrt(0.5 * v / n), 0.0};
  return fit;
}

std::pair<double, double> aci(const FitResult& fit, int r, double level) {
  if (r < 0 || r > 2) throw std::invalid_argument("aci: parameter index");
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("aci: level in (0,1)");
  }
  const double z = normal_quantile(0.5 + 0.5 * level);
  const double center =
      r == 0 ? fit.psi_hat.mu : (r == 1 ? fit.psi_hat.sigma : fit.psi_hat.theta);
  return {center - z * fit.se[r], center + z * fit.se[r]};
}

CompareResult compare(const std::vector<double>& y,
                      const std::vector<PowerSeries>& families,
                      FitMethod method, const FitConfig& config,
                      bool include_normal) {
  if (families.empty()) {
    throw std::invalid_argument("compare: need at least one family");
  }
  CompareResult out;
  for (const auto& fam : families) {
    try {
      FitResult fit = method == FitMethod::em ? fit_em(fam, y, config)
                                              : fit_direct(fam, y, config);
      out.rows.push_back({std::move(fit), 0});
    } catch (const std::exception& e) {
      out.failures.emplace_back(fam.name(), e.what());
    }
  }
  if (include_normal) {
    try {
      out.rows.push_back({fit_normal(y), 0});
    } catch (const std::exception& e) {
      out.failures.emplace_back("normal", e.what());
    }
  }
  std::sort(out.rows.begin(), out.rows.end(),
            [](const CompareRow& a, const CompareRow& b) {
              if (a.fit.aic != b.fit.aic) return a.fit.aic < b.fit.aic;
              if (a.fit.bic != b.fit.bic) return a.fit.bic < b.fit.bic;
              return a.fit.label < b.fit.label;
            });
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    out.rows[i].rank = static_cast<int>(i) + 1;
  }
  return out;
}

}  // namespace nps

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "nps/moments.hpp"
#include "nps/nps_model.hpp"
#include "nps/oracle.hpp"
#include "nps/power_series.hpp"
#include "nps/quad.hpp"
#include "nps/rng.hpp"
#include "nps/special.hpp"

using namespace nps;

TEST_CASE("orthant probabilities: conventions and closed forms") {
  CHECK(orthant_prob({0, 0.5, 0.0}) == 1.0);
  CHECK(orthant_prob({1, 0.5, 0.0}) == doctest::Approx(0.5).epsilon(1e-12));
  // dim=2: P(X1<=0, X2<=0) = 1/4 + arcsin(rho)/(2 pi), rho = c/(1+c).
  CHECK(std::fabs(orthant_prob({2, 0.5, 0.0}) -
                  (0.25 + std::asin(1.0 / 3.0) / (2.0 * nps::pi))) < 1e-12);
  CHECK(std::fabs(orthant_prob({2, 1.0, 0.0}) - 1.0 / 3.0) < 1e-12);

  // Decreasing in dimension for c >= 0.
  double prev = 1.0;
  for (long d = 1; d <= 12; ++d) {
    const double p = orthant_prob({d, 0.5, 0.0});
    CHECK(p > 0.0);
    CHECK(p < prev);
    prev = p;
  }

  CHECK_THROWS_AS(orthant_prob({3, -0.4, 0.0}), std::domain_error);
  CHECK_THROWS_AS(orthant_prob({-1, 0.5, 0.0}), std::domain_error);
}

TEST_CASE("orthant dim=3 versus Monte Carlo with correlated draws") {
  const double p = orthant_prob({3, 0.5, 0.0});
  Rng rng(314159);
  const long n = 10000000;
  long hits = 0;
  const double sc = std::sqrt(0.5);
  for (long i = 0; i < n; ++i) {
    const double z = rng.normal();
    bool all = true;
    for (int j = 0; j < 3; ++j) {
      if (sc * z + rng.normal() > 0.0) {
        all = false;
        // Draws must still be consumed to keep the stream aligned; cheaper
        // to break and skip since alignment does not matter statistically.
        break;
      }
    }
    hits += all ? 1 : 0;
  }
  const double phat = static_cast<double>(hits) / n;
  const double se = std::sqrt(phat * (1.0 - phat) / n);
  CHECK(std::fabs(p - phat) < 3.0 * se);
}

namespace {

struct TableRow {
  double theta;
  double e1, e2, e3, e4, var, sk, kur;
};

void check_table(const PowerSeries& fam, const std::vector<TableRow>& rows,
                 double tol) {
  for (const auto& r : rows) {
    const NpsModel model(fam, 0.0, 1.0, r.theta);
    const auto s = moments_quantile_integral(model);
    INFO(fam.name() << " theta=" << r.theta);
    CHECK(std::fabs(s.m1 - r.e1) < tol);
    CHECK(std::fabs(s.m2 - r.e2) < tol);
    CHECK(std::fabs(s.m3 - r.e3) < tol);
    CHECK(std::fabs(s.m4 - r.e4) < tol);
    CHECK(std::fabs(s.variance - r.var) < tol);
    CHECK(std::fabs(s.skewness - r.sk) < tol);
    CHECK(std::fabs(s.kurtosis - r.kur) < tol);
  }
}

}  // namespace

TEST_CASE("geometric moment table reproduced within 2e-3") {
  check_table(PowerSeries::geometric(),
              {{-5.0, -0.9841, 1.8465, -3.1487, 7.2110, 0.8781, 0.4821, 3.5440},
               {-2.0, -0.6134, 1.3270, -1.6981, 4.4974, 0.9508, 0.3046, 3.2104},
               {-0.5, -0.2284, 1.0452, -0.5795, 3.1974, 0.9930, 0.1141, 3.0291},
               {0.3, 0.2010, 1.0350, 0.5083, 3.1526, 0.9946, -0.1004, 3.0225},
               {0.5, 0.3894, 1.1315, 1.0155, 3.5829, 0.9799, -0.1942, 3.0846},
               {0.8, 0.8884, 1.6887, 2.7254, 6.3424, 0.8995, -0.4371, 3.4429},
               {0.9, 1.2445, 2.3609, 4.5206, 10.313, 0.8123, -0.5999, 3.8702}},
              2e-3);
}

TEST_CASE("poisson moment table reproduced within 2e-3") {
  check_table(
      PowerSeries::poisson(),
      {{0.01, 0.0028, 1.0000, 0.0071, 3.0000, 1.0000, -0.0014, 3.0000},
       {0.3, 0.0845, 1.0041, 0.2114, 3.0179, 0.9970, -0.0421, 3.0074},
       {0.5, 0.1405, 1.0114, 0.3520, 3.0495, 0.9917, -0.0697, 3.0204},
       {0.8, 0.2236, 1.0290, 0.5617, 3.1259, 0.9790, -0.1097, 3.0515},
       {1.0, 0.2781, 1.0450, 0.7003, 3.1954, 0.9677, -0.1349, 3.0792},
       {3.0, 0.7541, 1.3477, 2.0013, 4.5372, 0.7790, -0.2764, 3.5076},
       {6.0, 1.1997, 1.9673, 3.5904, 7.4821, 0.5279, -0.0956, 3.6846},
       {10.0, 1.5045, 2.6533, 5.2127, 11.2262, 0.3898, 0.1973, 3.4236}},
      2e-3);
}

TEST_CASE("the theta=0 table column is the normal limit") {
  // theta = 0 itself is excluded from the model domain; the column is the
  // exact standard normal and the nearby-theta models approach it.
  const NpsModel near(PowerSeries::geometric(), 0.0, 1.0, 1e-6);
  const auto s = moments_quantile_integral(near);
  CHECK(std::fabs(s.m1 - 0.0) < 1e-5);
  CHECK(std::fabs(s.m2 - 1.0) < 1e-5);
  CHECK(std::fabs(s.m3 - 0.0) < 1e-4);
  CHECK(std::fabs(s.m4 - 3.0) < 1e-4);
}

TEST_CASE("spec anchors at tighter tolerance") {
  const auto ng = moments_quantile_integral(
      NpsModel(PowerSeries::geometric(), 0.0, 1.0, 0.5));
  CHECK(std::fabs(ng.m1 - 0.3894) < 5e-4);
  CHECK(std::fabs(ng.variance - 0.9799) < 5e-4);
  CHECK(std::fabs(ng.skewness - (-0.1942)) < 5e-4);
  CHECK(std::fabs(ng.kurtosis - 3.0846) < 5e-4);

  const auto np = moments_quantile_integral(
      NpsModel(PowerSeries::poisson(), 0.0, 1.0, 1.0));
  CHECK(std::fabs(np.m1 - 0.2781) < 5e-4);
  CHECK(std::fabs(np.variance - 0.9677) < 5e-4);
  CHECK(std::fabs(np.skewness - (-0.1349)) < 5e-4);
  CHECK(std::fabs(np.kurtosis - 3.0792) < 5e-4);
}

TEST_CASE("series mean agrees with the quantile integral across families") {
  const auto check3 = [](const PowerSeries& fam, std::vector<double> thetas) {
    for (double th : thetas) {
      const NpsModel model(fam, 0.0, 1.0, th);
      const double ms = mean_series(model, 1e-9);
      const double mq = raw_moment_quantile(model, 1);
      INFO(fam.name() << " theta=" << th);
      CHECK(std::fabs(ms - mq) < 1e-6);
    }
  };
  check3(PowerSeries::geometric(), {0.3, 0.5, 0.8});
  check3(PowerSeries::poisson(), {0.5, 1.0, 3.0});
  check3(PowerSeries::logarithmic(), {0.3, 0.6, 0.9});
  check3(PowerSeries::binomial(3), {0.5, 1.0, 2.0});
  check3(PowerSeries::negbinomial(2), {0.2, 0.5, 0.7});
}

TEST_CASE("series mean handles shifted and scaled models") {
  const NpsModel model(PowerSeries::poisson(), 2.0, 3.0, 1.5);
  CHECK(std::fabs(mean_series(model, 1e-9) - raw_moment_quantile(model, 1)) <
        1e-6);
  // Degenerate count N=1: the mean is just mu.
  const NpsModel one(PowerSeries::binomial(1), 1.5, 2.0, 2.0);
  CHECK(mean_series(one, 1e-12) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("monte carlo consistency of quantile-integral moments") {
  const auto models = {
      NpsModel(PowerSeries::geometric(), 0.0, 1.0, 0.5),
      NpsModel(PowerSeries::negbinomial(2), 0.0, 1.0, 0.5),
      NpsModel(PowerSeries::geometric(), 0.0, 1.0, -0.5),
  };
  std::uint64_t seed = 777;
  for (const auto& model : models) {
    const auto s = moments_quantile_integral(model);
    const auto mc = oracle::mc_moments(model, 1000000, seed++);
    const double vals[4] = {s.m1, s.m2, s.m3, s.m4};
    for (int k = 0; k < 4; ++k) {
      INFO(model.family().name() << " theta=" << model.theta() << " k=" << k + 1);
      CHECK(std::fabs(vals[k] - mc[k].value) < 4.0 * mc[k].error_estimate);
    }
  }
}

TEST_CASE("affine equivariance of the moment summary") {
  const double a = 2.0, b = 3.0;
  const auto base_cases = {
      NpsModel(PowerSeries::geometric(), 0.0, 1.0, 0.5),
      NpsModel(PowerSeries::poisson(), 0.0, 1.0, 2.0),
      NpsModel(PowerSeries::negbinomial(2), 0.0, 1.0, 0.5),
  };
  for (const auto& base : base_cases) {
    const auto s0 = moments_quantile_integral(base);
    const NpsModel moved(base.family(), a + b * base.mu(), b * base.sigma(),
                         base.theta());
    const auto s1 = moments_quantile_integral(moved);
    INFO(base.family().name());
    CHECK(std::fabs(s1.m1 - (a + b * s0.m1)) < 1e-8);
    CHECK(std::fabs(s1.variance - b * b * s0.variance) < 1e-7);
    CHECK(std::fabs(s1.skewness - s0.skewness) < 1e-9);
    CHECK(std::fabs(s1.kurtosis - s0.kurtosis) < 1e-9);
  }
}

TEST_CASE("mgf series: unit value at zero and quadrature cross-check") {
  const NpsModel ng(PowerSeries::geometric(), 0.0, 1.0, 0.5);
  CHECK(std::fabs(mgf_series(ng, 0.0, 1e-12) - 1.0) < 1e-10);

  const auto mgf_quad = [](const NpsModel& m, double t) {
    const double lo = m.mu() - 14.0 * m.sigma();
    const double hi = m.mu() + 14.0 * m.sigma();
    return integrate([&](double y) { return std::exp(t * y) * m.pdf(y); }, lo,
                     hi, 1e-11)
        .value;
  };
  for (double t : {0.5, -0.7, 1.0}) {
    CHECK(std::fabs(mgf_series(ng, t, 1e-10) - mgf_quad(ng, t)) < 1e-8);
  }
  const NpsModel np(PowerSeries::poisson(), 1.0, 2.0, 1.5);
  for (double t : {0.3, -0.4}) {
    CHECK(std::fabs(mgf_series(np, t, 1e-10) - mgf_quad(np, t)) < 1e-8);
  }
  CHECK_THROWS_AS(
      mgf_series(NpsModel(PowerSeries::geometric(), 0.0, 1.0, -0.5), 0.5,
                 1e-8),
      std::domain_error);
}

TEST_CASE("closed-form approximations land within the documented band") {
  const NpsModel ng(PowerSeries::geometric(), 0.0, 1.0, 0.5);
  const auto ang = approx_moments(ng);
  CHECK(std::fabs(ang.m1 - 0.3894) < 0.15);
  CHECK(ang.est_error >= std::fabs(ang.m1 - raw_moment_quantile(ng, 1)) - 1e-12);

  const NpsModel np(PowerSeries::poisson(), 0.0, 1.0, 1.0);
  const auto anp = approx_moments(np);
  CHECK(std::fabs(anp.m1 - 0.2781) < 0.15);

  const NpsModel nb(PowerSeries::binomial(3), 0.0, 1.0, 1.0);
  const auto anb = approx_moments(nb);
  CHECK(std::isfinite(anb.m1));
  CHECK(anb.est_error < 0.5);

  // Near theta = 0 the geometric approximation collapses to the normal mean.
  const NpsModel tiny(PowerSeries::geometric(), 0.0, 1.0, 1e-6);
  CHECK(std::fabs(approx_moments(tiny).m1) < 1e-5);

  CHECK_THROWS_AS(
      approx_moments(NpsModel(PowerSeries::logarithmic(), 0.0, 1.0, 0.5)),
      std::domain_error);
  CHECK_THROWS_AS(
      approx_moments(NpsModel(PowerSeries::negbinomial(2), 0.0, 1.0, 0.5)),
      std::domain_error);
}

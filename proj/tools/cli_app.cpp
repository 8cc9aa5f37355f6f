#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "data_io.hpp"
#include "nps/inference.hpp"
#include "nps/moments.hpp"
#include "nps/nps_model.hpp"
#include "nps/oracle.hpp"
#include "nps/power_series.hpp"
#include "nps/rng.hpp"
#include "nps/special.hpp"

namespace {

using json = nlohmann::ordered_json;

constexpr int kOk = 0;
constexpr int kIngest = 2;
constexpr int kNoConverge = 3;
constexpr int kUsage = 4;

void fail(const std::string& msg) {
  std::fprintf(stderr, "error: %s\n", msg.c_str());
}

std::string fmt(double v, int prec = 10) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Family specification with the short aliases.

struct FamilySpec {
  bool normal = false;
  std::optional<nps::PowerSeries> ps;
};

FamilySpec parse_family_spec(std::string text) {
  std::transform(text.begin(), text.end(), text.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  FamilySpec spec;
  if (text == "normal") {
    spec.normal = true;
    return spec;
  }
  std::string mapped = text;
  if (text == "ng") {
    mapped = "geometric";
  } else if (text == "np") {
    mapped = "poisson";
  } else if (text == "nl") {
    mapped = "logarithmic";
  } else if (text.rfind("nb:", 0) == 0) {
    mapped = "binomial:" + text.substr(3);
  } else if (text.rfind("nnb:", 0) == 0) {
    mapped = "negbinomial:" + text.substr(4);
  }
  spec.ps = nps::PowerSeries::parse(mapped);
  return spec;
}

bool parse_truth(const std::string& text, nps::Psi* out) {
  double mu, sigma, theta;
  char extra;
  if (std::sscanf(text.c_str(), "%lf,%lf,%lf%c", &mu, &sigma, &theta,
                  &extra) != 3) {
    return false;
  }
  out->mu = mu;
  out->sigma = sigma;
  out->theta = theta;
  return true;
}

// ---------------------------------------------------------------------------
// Serialization.

json vec3_json(const nps::Vec3& v) {
  return json{{"mu", v[0]}, {"sigma", v[1]}, {"theta", v[2]}};
}

json mat3_json(const nps::Mat3& m) {
  json rows = json::array();
  for (int i = 0; i < 3; ++i) {
    json row = json::array();
    for (int j = 0; j < 3; ++j) row.push_back(m[3 * i + j]);
    rows.push_back(row);
  }
  return rows;
}

json fit_to_json(const nps::FitResult& fit, bool include_trace) {
  json j;
  j["family"] = fit.label;
  j["method"] = fit.method == nps::FitMethod::em ? "em" : "direct";
  j["n"] = fit.n;
  j["n_params"] = fit.n_params;
  j["estimates"] = vec3_json(
      {fit.psi_hat.mu, fit.psi_hat.sigma, fit.psi_hat.theta});
  j["se"] = vec3_json(fit.se);
  j["loglik"] = fit.loglik;
  j["aic"] = fit.aic;
  j["bic"] = fit.bic;
  j["converged"] = fit.converged;
  j["boundary"] = fit.boundary;
  j["iterations"] = fit.iterations;
  j["cov"] = mat3_json(fit.cov);
  if (include_trace) {
    json tr = json::array();
    for (const auto& [it, ll] : fit.trace) {
      tr.push_back(json::array({it, ll}));
    }
    j["trace"] = tr;
  }
  return j;
}

// Writes the JSON to json_path when given ("-" means stdout); renders text
// or JSON on stdout depending on the format flag.
int emit(const json& j, const std::string& format,
         const std::string& json_path,
         const std::function<void()>& print_text) {
  if (!json_path.empty()) {
    if (json_path == "-") {
      std::printf("%s\n", j.dump(2).c_str());
    } else {
      std::ofstream out(json_path);
      if (!out) {
        fail("cannot write '" + json_path + "'");
        return kIngest;
      }
      out << j.dump(2) << "\n";
    }
  }
  if (format == "json") {
    if (json_path != "-") std::printf("%s\n", j.dump(2).c_str());
  } else {
    print_text();
  }
  return kOk;
}

void print_fit_text(const nps::FitResult& fit) {
  std::printf("family      %s\n", fit.label.c_str());
  std::printf("method      %s\n",
              fit.method == nps::FitMethod::em ? "em" : "direct");
  std::printf("n           %zu\n", fit.n);
  std::printf("mu          %-14s se %s\n", fmt(fit.psi_hat.mu).c_str(),
              fmt(fit.se[0], 6).c_str());
  std::printf("sigma       %-14s se %s\n", fmt(fit.psi_hat.sigma).c_str(),
              fmt(fit.se[1], 6).c_str());
  std::printf("theta       %-14s se %s\n", fmt(fit.psi_hat.theta).c_str(),
              fmt(fit.se[2], 6).c_str());
  std::printf("loglik      %s\n", fmt(fit.loglik).c_str());
  std::printf("-logL       %s\n", fmt(-fit.loglik).c_str());
  std::printf("aic         %s\n", fmt(fit.aic).c_str());
  std::printf("bic         %s\n", fmt(fit.bic).c_str());
  std::printf("converged   %s\n", fit.converged ? "yes" : "no");
  std::printf("boundary    %s\n", fit.boundary ? "yes" : "no");
  std::printf("iterations  %d\n", fit.iterations);
}

// ---------------------------------------------------------------------------
// fit

struct FitOpts {
  std::string family;
  std::string data;
  std::string column;
  std::string method = "direct";
  bool extended = false;
  double tol = 0.0;
  int max_iter = 0;
  std::vector<double> starts;
  std::string json_path;
  std::string format = "text";
};

int run_fit(const FitOpts& o) {
  FamilySpec spec;
  try {
    spec = parse_family_spec(o.family);
  } catch (const std::exception& e) {
    fail(e.what());
    return kUsage;
  }
  if (o.method != "direct" && o.method != "em") {
    fail("--method must be direct or em");
    return kUsage;
  }
  if (o.method == "em" && o.extended) {
    fail("EM needs the proper theta domain; drop --extended");
    return kUsage;
  }
  nps::cli::DataColumn col;
  try {
    col = nps::cli::load_csv_column(o.data, o.column);
  } catch (const std::exception& e) {
    fail(e.what());
    return kIngest;
  }
  nps::FitConfig cfg;
  cfg.extended = o.extended;
  cfg.tol = o.tol;
  cfg.max_iter = o.max_iter;
  cfg.theta_starts = o.starts;
  nps::FitResult fit;
  try {
    if (spec.normal) {
      fit = nps::fit_normal(col.values);
    } else if (o.method == "em") {
      fit = nps::fit_em(*spec.ps, col.values, cfg);
    } else {
      fit = nps::fit_direct(*spec.ps, col.values, cfg);
    }
  } catch (const std::invalid_argument& e) {
    fail(e.what());
    return kIngest;
  } catch (const std::exception& e) {
    fail(e.what());
    return kNoConverge;
  }
  const int rc = emit(fit_to_json(fit, true), o.format, o.json_path,
                      [&] { print_fit_text(fit); });
  if (rc != kOk) return rc;
  return fit.converged ? kOk : kNoConverge;
}

// ---------------------------------------------------------------------------
// compare

struct CompareOpts {
  std::string families;
  std::string data;
  std::string column;
  std::string method = "direct";
  bool extended = false;
  std::string json_path;
  std::string format = "text";
};

int run_compare(const CompareOpts& o) {
  std::vector<nps::PowerSeries> fams;
  bool include_normal = false;
  std::stringstream ss(o.families);
  std::string item;
  try {
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const FamilySpec spec = parse_family_spec(item);
      if (spec.normal) {
        include_normal = true;
      } else {
        fams.push_back(*spec.ps);
      }
    }
  } catch (const std::exception& e) {
    fail(e.what());
    return kUsage;
  }
  if (fams.empty() && !include_normal) {
    fail("--families selected nothing");
    return kUsage;
  }
  if (o.method != "direct" && o.method != "em") {
    fail("--method must be direct or em");
    return kUsage;
  }
  if (o.method == "em" && o.extended) {
    fail("EM needs the proper theta domain; drop --extended");
    return kUsage;
  }
  nps::cli::DataColumn col;
  try {
    col = nps::cli::load_csv_column(o.data, o.column);
  } catch (const std::exception& e) {
    fail(e.what());
    return kIngest;
  }
  nps::FitConfig cfg;
  cfg.extended = o.extended;
  nps::CompareResult cmp;
  if (fams.empty()) {
    // Baseline only.
    try {
      cmp.rows.push_back({nps::fit_normal(col.values), 1});
    } catch (const std::exception& e) {
      cmp.failures.emplace_back("normal", e.what());
    }
  } else {
    const auto method =
        o.method == "em" ? nps::FitMethod::em : nps::FitMethod::direct;
    cmp = nps::compare(col.values, fams, method, cfg, include_normal);
  }

  json j;
  j["n"] = col.values.size();
  json rows = json::array();
  for (const auto& row : cmp.rows) {
    json r = fit_to_json(row.fit, false);
    r["rank"] = row.rank;
    rows.push_back(r);
  }
  j["rows"] = rows;
  json fails = json::array();
  for (const auto& [label, reason] : cmp.failures) {
    fails.push_back(json{{"family", label}, {"reason", reason}});
  }
  j["failures"] = fails;

  const int rc = emit(j, o.format, o.json_path, [&] {
    std::printf("%-4s %-14s %-12s %-12s %-12s %-12s %-12s %-12s\n", "rank",
                "model", "mu", "sigma", "theta", "-logL", "AIC", "BIC");
    for (const auto& row : cmp.rows) {
      std::printf("%-4d %-14s %-12s %-12s %-12s %-12s %-12s %-12s%s\n",
                  row.rank, row.fit.label.c_str(),
                  fmt(row.fit.psi_hat.mu, 6).c_str(),
                  fmt(row.fit.psi_hat.sigma, 6).c_str(),
                  fmt(row.fit.psi_hat.theta, 6).c_str(),
                  fmt(-row.fit.loglik, 7).c_str(),
                  fmt(row.fit.aic, 7).c_str(), fmt(row.fit.bic, 7).c_str(),
                  row.fit.converged ? "" : "  [not converged]");
    }
    for (const auto& [label, reason] : cmp.failures) {
      std::printf("failed: %s (%s)\n", label.c_str(), reason.c_str());
    }
  });
  if (rc != kOk) return rc;
  return cmp.rows.empty() ? kNoConverge : kOk;
}

// ---------------------------------------------------------------------------
// moments

struct MomentsOpts {
  std::string family;
  double mu = 0.0;
  double sigma = 1.0;
  double theta = 0.5;
  std::string method = "integral";
  std::string json_path;
  std::string format = "text";
};

int run_moments(const MomentsOpts& o) {
  FamilySpec spec;
  try {
    spec = parse_family_spec(o.family);
  } catch (const std::exception& e) {
    fail(e.what());
    return kUsage;
  }
  if (spec.normal) {
    fail("moments needs a power-series family, not the normal baseline");
    return kUsage;
  }
  std::optional<nps::NpsModel> model;
  try {
    model.emplace(*spec.ps, o.mu, o.sigma, o.theta);
  } catch (const std::exception& e) {
    fail(e.what());
    return kUsage;
  }
  json j;
  j["family"] = spec.ps->name();
  j["mu"] = o.mu;
  j["sigma"] = o.sigma;
  j["theta"] = o.theta;
  j["method"] = o.method;
  try {
    if (o.method == "integral") {
      const nps::MomentSummary s = nps::moments_quantile_integral(*model);
      j["m1"] = s.m1;
      j["m2"] = s.m2;
      j["m3"] = s.m3;
      j["m4"] = s.m4;
      j["variance"] = s.variance;
      j["skewness"] = s.skewness;
      j["kurtosis"] = s.kurtosis;
      j["est_error"] = s.est_error;
    } else if (o.method == "series") {
      j["m1"] = nps::mean_series(*model, 1e-10);
    } else if (o.method == "approx") {
      const nps::MomentSummary s = nps::approx_moments(*model);
      j["m1"] = s.m1;
      j["m2"] = s.m2;
      j["variance"] = s.variance;
      j["est_error"] = s.est_error;
    } else {
      fail("--method must be integral, series or approx");
      return kUsage;
    }
  } catch (const std::exception& e) {
    fail(e.what());
    return kUsage;
  }
  return emit(j, o.format, o.json_path, [&] {
    for (const auto& [key, value] : j.items()) {
      if (value.is_number_float()) {
        std::printf("%-10s %s\n", key.c_str(),
                    fmt(value.get<double>()).c_str());
      } else {
        std::printf("%-10s %s\n", key.c_str(),
                    value.is_string() ? value.get<std::string>().c_str()
                                      : j[key].dump().c_str());
      }
    }
  });
}

// ---------------------------------------------------------------------------
// sample

struct SampleOpts {
  std::string family;
  double mu = 0.0;
  double sigma = 1.0;
  double theta = 0.5;
  long count = 0;
  std::uint64_t seed = 1;
  std::string sampler = "inverse";
  std::string out;
};

int run_sample(const SampleOpts& o) {
  if (o.count <= 0) {
    fail("need a positive sample count (-n)");
    return kUsage;
  }
  FamilySpec spec;
  try {
    spec = parse_family_spec(o.family);
  } catch (const std::exception& e) {
    fail(e.what());
    return kUsage;
  }
  if (spec.normal) {
    fail("sample needs a power-series family");
    return kUsage;
  }
  if (o.sampler != "inverse" && o.sampler != "compound") {
    fail("--sampler must be inverse or compound");
    return kUsage;
  }
  std::optional<nps::NpsModel> model;
  try {
    model.emplace(*spec.ps, o.mu, o.sigma, o.theta);
  } catch (const std::exception& e) {
    fail(e.what());
    return kUsage;
  }
  if (o.sampler == "compound" && !spec.ps->theta_proper(o.theta)) {
    fail("compound sampling needs theta in the proper domain");
    return kUsage;
  }
  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!o.out.empty()) {
    file.open(o.out);
    if (!file) {
      fail("cannot write '" + o.out + "'");
      return kIngest;
    }
    os = &file;
  }
  nps::Rng rng(o.seed);
  char buf[64];
  for (long i = 0; i < o.count; ++i) {
    const double v = o.sampler == "compound" ? model->sample_compound(rng)
                                             : model->sample_inverse(rng);
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    (*os) << buf;
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// curve

struct CurveOpts {
  std::string family;
  double mu = 0.0;
  double sigma = 1.0;
  double theta = 0.5;
  std::string what = "pdf,cdf,hazard";
  std::string range;
  std::string out;
};

int run_curve(const CurveOpts& o) {
  FamilySpec spec;
  try {
    spec = parse_family_spec(o.family);
  } catch (const std::exception& e) {
    fail(e.what());
    return kUsage;
  }
  if (spec.normal) {
    fail("curve needs a power-series family");
    return kUsage;
  }
  std::optional<nps::NpsModel> model;
  try {
    model.emplace(*spec.ps, o.mu, o.sigma, o.theta);
  } catch (const std::exception& e) {
    fail(e.what());
    return kUsage;
  }
  double lo, hi;
  long steps;
  char extra;
  if (std::sscanf(o.range.c_str(), "%lf:%lf:%ld%c", &lo, &hi, &steps,
                  &extra) != 3 ||
      !(hi > lo) || steps < 2) {
    fail("--range must be lo:hi:steps with hi > lo and steps >= 2");
    return kUsage;
  }
  std::vector<std::string> cols;
  std::stringstream ss(o.what);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (item != "pdf" && item != "cdf" && item != "survival" &&
        item != "hazard") {
      fail("--what entries must be pdf, cdf, survival or hazard");
      return kUsage;
    }
    if (std::find(cols.begin(), cols.end(), item) == cols.end()) {
      cols.push_back(item);
    }
  }
  if (cols.empty()) {
    fail("--what selected nothing");
    return kUsage;
  }
  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!o.out.empty()) {
    file.open(o.out);
    if (!file) {
      fail("cannot write '" + o.out + "'");
      return kIngest;
    }
    os = &file;
  }
  std::string header = "y";
  for (const auto& c : cols) header += "," + c;
  (*os) << header << "\n";
  for (long i = 0; i < steps; ++i) {
    const double y = lo + (hi - lo) * static_cast<double>(i) /
                             static_cast<double>(steps - 1);
    std::string row = fmt(y, 12);
    for (const auto& c : cols) {
      double v = 0.0;
      if (c == "pdf") v = model->pdf(y);
      else if (c == "cdf") v = model->cdf(y);
      else if (c == "survival") v = model->survival(y);
      else v = model->hazard(y);
      row += "," + fmt(v, 12);
    }
    (*os) << row << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOpts {
  std::string family;
  std::string truth = "0,1,0.5";
  long n = 0;
  long replicates = 0;
  std::uint64_t seed = 1;
  std::string method = "em";
  int threads = 0;
  std::string json_path;
  std::string format = "text";
};

int run_simulate(const SimulateOpts& o) {
  FamilySpec spec;
  try {
    spec = parse_family_spec(o.family);
  } catch (const std::exception& e) {
    fail(e.what());
    return kUsage;
  }
  if (spec.normal) {
    fail("simulate needs a power-series family");
    return kUsage;
  }
  nps::Psi truth;
  if (!parse_truth(o.truth, &truth)) {
    fail("--truth must be mu,sigma,theta");
    return kUsage;
  }
  if (o.n < 10 || o.replicates < 1) {
    fail("need --n >= 10 and --replicates >= 1");
    return kUsage;
  }
  if (o.method != "direct" && o.method != "em") {
    fail("--method must be direct or em");
    return kUsage;
  }
  const bool proper = spec.ps->theta_proper(truth.theta);
  if (!proper && !spec.ps->theta_extended(truth.theta)) {
    fail("truth theta outside the family domain");
    return kUsage;
  }
  if (o.method == "em" && !proper) {
    fail("EM needs the proper theta domain");
    return kUsage;
  }
  const nps::NpsModel gen(*spec.ps, truth.mu, truth.sigma, truth.theta);
  const long R = o.replicates;
  std::vector<std::optional<nps::FitResult>> results(R);
  std::vector<std::string> errors(R);

  auto worker = [&](long first, long stride) {
    for (long r = first; r < R; r += stride) {
      nps::Rng rng = nps::Rng::stream(o.seed, static_cast<std::uint64_t>(r));
      std::vector<double> y(o.n);
      for (auto& v : y) {
        v = proper ? gen.sample_compound(rng) : gen.sample_inverse(rng);
      }
      try {
        results[r] = o.method == "em" ? nps::fit_em(*spec.ps, y, {})
                                      : nps::fit_direct(*spec.ps, y, {});
      } catch (const std::exception& e) {
        errors[r] = e.what();
      }
    }
  };
  long workers = o.threads > 0
                     ? o.threads
                     : static_cast<long>(std::thread::hardware_concurrency());
  workers = std::clamp<long>(workers, 1, std::min<long>(R, 16));
  if (workers == 1) {
    worker(0, 1);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (long t = 0; t < workers; ++t) pool.emplace_back(worker, t, workers);
    for (auto& th : pool) th.join();
  }

  // Sequential index-order aggregation keeps the output independent of the
  // thread schedule.
  long ok = 0, failed = 0, nonconverged = 0, se_count = 0, cov_count = 0;
  nps::Vec3 sum{0, 0, 0}, sumsq{0, 0, 0}, se_sum{0, 0, 0};
  nps::Mat3 cov_sum{};
  std::string first_error;
  for (long r = 0; r < R; ++r) {
    if (!results[r]) {
      ++failed;
      if (first_error.empty()) first_error = errors[r];
      continue;
    }
    const nps::FitResult& fit = *results[r];
    if (!fit.converged) ++nonconverged;
    ++ok;
    const nps::Vec3 est = {fit.psi_hat.mu, fit.psi_hat.sigma,
                           fit.psi_hat.theta};
    for (int i = 0; i < 3; ++i) {
      sum[i] += est[i];
      sumsq[i] += est[i] * est[i];
    }
    if (std::isfinite(fit.se[0]) && std::isfinite(fit.se[1]) &&
        std::isfinite(fit.se[2])) {
      for (int i = 0; i < 3; ++i) se_sum[i] += fit.se[i];
      ++se_count;
    }
    bool cov_ok = true;
    for (double v : fit.cov) cov_ok = cov_ok && std::isfinite(v);
    if (cov_ok) {
      for (int i = 0; i < 9; ++i) cov_sum[i] += fit.cov[i];
      ++cov_count;
    }
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  nps::Vec3 mean{nan, nan, nan}, emp_se{nan, nan, nan},
      model_se{nan, nan, nan};
  nps::Mat3 mean_cov{};
  mean_cov.fill(nan);
  if (ok > 0) {
    for (int i = 0; i < 3; ++i) mean[i] = sum[i] / static_cast<double>(ok);
  }
  if (ok > 1) {
    for (int i = 0; i < 3; ++i) {
      const double ss =
          (sumsq[i] - static_cast<double>(ok) * mean[i] * mean[i]) /
          static_cast<double>(ok - 1);
      emp_se[i] = ss > 0.0 ? std::sqrt(ss) : 0.0;
    }
  }
  if (se_count > 0) {
    for (int i = 0; i < 3; ++i) {
      model_se[i] = se_sum[i] / static_cast<double>(se_count);
    }
  }
  if (cov_count > 0) {
    for (int i = 0; i < 9; ++i) {
      mean_cov[i] = cov_sum[i] / static_cast<double>(cov_count);
    }
  }

  json j;
  j["family"] = spec.ps->name();
  j["method"] = o.method;
  j["truth"] = vec3_json({truth.mu, truth.sigma, truth.theta});
  j["n"] = o.n;
  j["replicates"] = R;
  j["seed"] = o.seed;
  j["ok"] = ok;
  j["failed"] = failed;
  j["nonconverged"] = nonconverged;
  j["mean_estimates"] = vec3_json(mean);
  j["empirical_se"] = vec3_json(emp_se);
  j["mean_model_se"] = vec3_json(model_se);
  j["mean_cov"] = mat3_json(mean_cov);
  if (failed > 0) j["first_error"] = first_error;

  const int rc = emit(j, o.format, o.json_path, [&] {
    std::printf("family         %s\n", spec.ps->name().c_str());
    std::printf("method         %s\n", o.method.c_str());
    std::printf("truth          mu=%s sigma=%s theta=%s\n",
                fmt(truth.mu, 6).c_str(), fmt(truth.sigma, 6).c_str(),
                fmt(truth.theta, 6).c_str());
    std::printf("n              %ld\n", o.n);
    std::printf("replicates     %ld (ok %ld, failed %ld, nonconverged %ld)\n",
                R, ok, failed, nonconverged);
    const char* names[3] = {"mu", "sigma", "theta"};
    std::printf("%-8s %-14s %-14s %-14s\n", "param", "mean", "emp se",
                "model se");
    for (int i = 0; i < 3; ++i) {
      std::printf("%-8s %-14s %-14s %-14s\n", names[i],
                  fmt(mean[i], 8).c_str(), fmt(emp_se[i], 8).c_str(),
                  fmt(model_se[i], 8).c_str());
    }
  });
  if (rc != kOk) return rc;
  return ok > 0 ? kOk : kNoConverge;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyOpts {
  std::string family = "ng";
  std::string data;
  std::string column;
  std::string truth = "0,1,0.5";
  long n = 500;
  std::uint64_t seed = 1;
};

const char* method_name(nps::oracle::Method m) {
  switch (m) {
    case nps::oracle::Method::quadrature: return "quadrature";
    case nps::oracle::Method::monte_carlo: return "monte_carlo";
    case nps::oracle::Method::truncated_sum: return "truncated_sum";
    case nps::oracle::Method::finite_difference: return "finite_difference";
    case nps::oracle::Method::ks_test: return "ks_test";
  }
  return "?";
}

void print_report(const nps::oracle::OracleReport& rep) {
  std::printf("kind=oracle quantity=%s value=%s error_estimate=%s method=%s "
              "converged=%d\n",
              rep.quantity.c_str(), fmt(rep.value, 12).c_str(),
              fmt(rep.error_estimate, 3).c_str(), method_name(rep.method),
              rep.converged ? 1 : 0);
}

int run_verify(const VerifyOpts& o) {
  FamilySpec spec;
  try {
    spec = parse_family_spec(o.family);
  } catch (const std::exception& e) {
    fail(e.what());
    return kUsage;
  }
  if (spec.normal) {
    fail("verify needs a power-series family");
    return kUsage;
  }
  std::vector<double> y;
  if (!o.data.empty()) {
    try {
      y = nps::cli::load_csv_column(o.data, o.column).values;
    } catch (const std::exception& e) {
      fail(e.what());
      return kIngest;
    }
  } else {
    nps::Psi truth;
    if (!parse_truth(o.truth, &truth)) {
      fail("--truth must be mu,sigma,theta");
      return kUsage;
    }
    if (o.n < 10) {
      fail("need --n >= 10");
      return kUsage;
    }
    std::optional<nps::NpsModel> gen;
    try {
      gen.emplace(*spec.ps, truth.mu, truth.sigma, truth.theta);
    } catch (const std::exception& e) {
      fail(e.what());
      return kUsage;
    }
    const bool proper = spec.ps->theta_proper(truth.theta);
    nps::Rng rng(o.seed);
    y.resize(o.n);
    for (auto& v : y) {
      v = proper ? gen->sample_compound(rng) : gen->sample_inverse(rng);
    }
  }

  nps::FitResult fit;
  try {
    fit = nps::fit_direct(*spec.ps, y, {});
  } catch (const std::exception& e) {
    fail(e.what());
    return kNoConverge;
  }
  std::printf("kind=fit family=%s n=%zu mu=%s sigma=%s theta=%s loglik=%s "
              "converged=%d\n",
              fit.label.c_str(), fit.n, fmt(fit.psi_hat.mu, 12).c_str(),
              fmt(fit.psi_hat.sigma, 12).c_str(),
              fmt(fit.psi_hat.theta, 12).c_str(),
              fmt(fit.loglik, 12).c_str(), fit.converged ? 1 : 0);

  // Score against the finite-difference gradient.
  const auto s = nps::score(*spec.ps, fit.psi_hat, y);
  const auto fd = nps::oracle::fd_grad(
      [&](const std::vector<double>& v) {
        return nps::loglik(*spec.ps, nps::Psi{v[0], v[1], v[2]}, y);
      },
      {fit.psi_hat.mu, fit.psi_hat.sigma, fit.psi_hat.theta}, 1e-6);
  const char* names[3] = {"mu", "sigma", "theta"};
  for (int i = 0; i < 3; ++i) {
    const double gap =
        std::fabs(s[i] - fd[i]) / std::max(1.0, std::fabs(fd[i]));
    std::printf("kind=score param=%s analytic=%s fd=%s rel_gap=%s\n",
                names[i], fmt(s[i], 12).c_str(), fmt(fd[i], 12).c_str(),
                fmt(gap, 3).c_str());
  }

  // Observed information: closed forms against the finite-difference
  // Hessian, with the per-entry arbitration verdict.
  const auto info = nps::observed_info(*spec.ps, fit.psi_hat, y);
  for (int i = 0; i < 3; ++i) {
    for (int jx = i; jx < 3; ++jx) {
      bool flagged = false;
      for (const auto& gap : info.discrepancies) {
        flagged = flagged || (gap.row == i && gap.col == jx);
      }
      const double a = info.analytic[3 * i + jx];
      const double f = info.fd[3 * i + jx];
      const double rel =
          std::fabs(a - f) / std::max({std::fabs(a), std::fabs(f), 1e-300});
      std::printf(
          "kind=info entry=%d%d analytic=%s fd=%s rel_gap=%s flagged=%d\n",
          i, jx, fmt(a, 12).c_str(), fmt(f, 12).c_str(), fmt(rel, 3).c_str(),
          flagged ? 1 : 0);
    }
  }
  std::printf("kind=info_summary max_rel_gap=%s discrepancies=%zu\n",
              fmt(info.max_rel_gap, 3).c_str(), info.discrepancies.size());

  // Louis identity: complete-data minus missing information should match
  // the finite-difference Hessian of the incomplete-data likelihood.
  if (spec.ps->theta_proper(fit.psi_hat.theta)) {
    const auto louis = nps::louis_se(*spec.ps, fit.psi_hat, y);
    double worst = 0.0;
    for (int i = 0; i < 9; ++i) {
      const double a = louis.info[i];
      const double f = info.fd[i];
      if (std::max(std::fabs(a), std::fabs(f)) <=
          1e-6 * static_cast<double>(y.size())) {
        continue;
      }
      worst = std::max(worst, std::fabs(a - f) /
                                  std::max(std::fabs(a), std::fabs(f)));
    }
    std::printf("kind=louis max_rel_gap=%s invertible=%d\n",
                fmt(worst, 3).c_str(), louis.invertible ? 1 : 0);

    // E-step closed form against the truncated posterior sum at the fitted
    // theta and the median ordinate.
    const double tstar = 0.5 * fit.psi_hat.theta;
    if (tstar > 0.0) {
      const auto m1 = nps::oracle::posterior_sums(*spec.ps, tstar, 1);
      print_report(m1);
      const auto post = nps::e_step(
          *spec.ps, nps::Psi{0.0, 1.0, fit.psi_hat.theta},
          std::vector<double>{0.0});
      const double gap = std::fabs(post.ez[0] - m1.value) /
                         std::max(1.0, std::fabs(m1.value));
      std::printf("kind=estep closed=%s oracle=%s rel_gap=%s\n",
                  fmt(post.ez[0], 12).c_str(), fmt(m1.value, 12).c_str(),
                  fmt(gap, 3).c_str());
    }
  }

  // Density normalization and the first two moments by quadrature at the
  // fitted parameters.
  const nps::NpsModel at_hat(*spec.ps, fit.psi_hat.mu, fit.psi_hat.sigma,
                             fit.psi_hat.theta);
  for (int k = 0; k <= 2; ++k) {
    print_report(nps::oracle::integrate_pdf(at_hat, k));
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* cap = std::getenv("NPS_MAX_SERIES")) {
    try {
      nps::set_series_cap(std::stol(cap));
    } catch (const std::exception&) {
      fail("NPS_MAX_SERIES must be an integer >= 1000");
      return kUsage;
    }
  }

  CLI::App app{
      "Toolkit for the normal power-series distribution family: fitting, "
      "model comparison, moments, sampling and verification."};
  app.require_subcommand(1);

  FitOpts fit_opts;
  auto* fit = app.add_subcommand("fit", "Fit one model to a data column");
  fit->add_option("--family", fit_opts.family,
                  "Family: ng, np, nl, nb:m, nnb:k, normal, or full name")
      ->required();
  fit->add_option("--data", fit_opts.data, "CSV file")->required();
  fit->add_option("--column", fit_opts.column, "Column name or 0-based index");
  fit->add_option("--method", fit_opts.method, "direct or em");
  fit->add_flag("--extended", fit_opts.extended,
                "Allow the extended theta domain (direct method only)");
  fit->add_option("--tol", fit_opts.tol, "Convergence tolerance");
  fit->add_option("--max-iter", fit_opts.max_iter, "Iteration cap");
  fit->add_option("--starts", fit_opts.starts, "Theta start values")
      ->delimiter(',');
  fit->add_option("--json", fit_opts.json_path, "Write JSON here ('-' stdout)");
  fit->add_option("--format", fit_opts.format, "Stdout format: text or json");

  CompareOpts cmp_opts;
  auto* cmp = app.add_subcommand("compare", "Fit several models and rank");
  cmp->add_option("--families", cmp_opts.families,
                  "Comma list, e.g. ng,np,nl,nb:5,normal")
      ->required();
  cmp->add_option("--data", cmp_opts.data, "CSV file")->required();
  cmp->add_option("--column", cmp_opts.column, "Column name or 0-based index");
  cmp->add_option("--method", cmp_opts.method, "direct or em");
  cmp->add_flag("--extended", cmp_opts.extended, "Extended theta domain");
  cmp->add_option("--json", cmp_opts.json_path, "Write JSON here");
  cmp->add_option("--format", cmp_opts.format, "Stdout format: text or json");

  MomentsOpts mom_opts;
  auto* mom = app.add_subcommand("moments", "Moments of one model");
  mom->add_option("--family", mom_opts.family, "Power-series family")
      ->required();
  mom->add_option("--mu", mom_opts.mu, "Location");
  mom->add_option("--sigma", mom_opts.sigma, "Scale");
  mom->add_option("--theta", mom_opts.theta, "Series parameter");
  mom->add_option("--method", mom_opts.method, "integral, series or approx");
  mom->add_option("--json", mom_opts.json_path, "Write JSON here");
  mom->add_option("--format", mom_opts.format, "Stdout format: text or json");

  SampleOpts smp_opts;
  auto* smp = app.add_subcommand("sample", "Draw values, one per line");
  smp->add_option("--family", smp_opts.family, "Power-series family")
      ->required();
  smp->add_option("--mu", smp_opts.mu, "Location");
  smp->add_option("--sigma", smp_opts.sigma, "Scale");
  smp->add_option("--theta", smp_opts.theta, "Series parameter");
  smp->add_option("-n,--count", smp_opts.count, "Number of draws");
  smp->add_option("--seed", smp_opts.seed, "RNG seed");
  smp->add_option("--sampler", smp_opts.sampler, "inverse or compound");
  smp->add_option("--out", smp_opts.out, "Output file (default stdout)");

  CurveOpts crv_opts;
  auto* crv = app.add_subcommand("curve", "CSV of distribution curves");
  crv->add_option("--family", crv_opts.family, "Power-series family")
      ->required();
  crv->add_option("--mu", crv_opts.mu, "Location");
  crv->add_option("--sigma", crv_opts.sigma, "Scale");
  crv->add_option("--theta", crv_opts.theta, "Series parameter");
  crv->add_option("--what", crv_opts.what, "Comma list: pdf,cdf,survival,hazard");
  crv->add_option("--range", crv_opts.range, "lo:hi:steps")->required();
  crv->add_option("--out", crv_opts.out, "Output file (default stdout)");

  SimulateOpts sim_opts;
  auto* sim = app.add_subcommand("simulate", "Replicated fit study");
  sim->add_option("--family", sim_opts.family, "Power-series family")
      ->required();
  sim->add_option("--truth", sim_opts.truth, "mu,sigma,theta");
  sim->add_option("--n", sim_opts.n, "Sample size per replicate")->required();
  sim->add_option("--replicates", sim_opts.replicates, "Replicate count")
      ->required();
  sim->add_option("--seed", sim_opts.seed, "Master seed");
  sim->add_option("--method", sim_opts.method, "em or direct");
  sim->add_option("--threads", sim_opts.threads, "Worker threads");
  sim->add_option("--json", sim_opts.json_path, "Write JSON here");
  sim->add_option("--format", sim_opts.format, "Stdout format: text or json");

  VerifyOpts ver_opts;
  auto* ver = app.add_subcommand("verify", "Oracle cross-check report");
  ver->add_option("--family", ver_opts.family, "Power-series family");
  ver->add_option("--data", ver_opts.data, "CSV file (else simulated)");
  ver->add_option("--column", ver_opts.column, "Column name or index");
  ver->add_option("--truth", ver_opts.truth, "Simulation truth mu,sigma,theta");
  ver->add_option("--n", ver_opts.n, "Simulated sample size");
  ver->add_option("--seed", ver_opts.seed, "Simulation seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (fit->parsed()) return run_fit(fit_opts);
    if (cmp->parsed()) return run_compare(cmp_opts);
    if (mom->parsed()) return run_moments(mom_opts);
    if (smp->parsed()) return run_sample(smp_opts);
    if (crv->parsed()) return run_curve(crv_opts);
    if (sim->parsed()) return run_simulate(sim_opts);
    if (ver->parsed()) return run_verify(ver_opts);
  } catch (const std::exception& e) {
    fail(e.what());
    return kNoConverge;
  }
  return kUsage;
}

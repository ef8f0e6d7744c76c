#include "netcast/metrics.hpp"

#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "netcast/errors.hpp"
#include "netcast/mathfn.hpp"
#include "netcast/timeutil.hpp"

namespace netcast::metrics {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  require(a == b && a >= 1, errc::length_mismatch,
          std::string(what) + ": sequence lengths " + std::to_string(a) + " and " +
              std::to_string(b));
}

/// Composite Simpson of g(F(x)) over [lo, hi] at panel width <= step, with
/// a monotonicity check on the sampled CDF values.
double simpson_monotone(const std::function<double(double)>& cdf, double (*g)(double),
                        double lo, double hi, double step, double& prev_cdf) {
  if (hi <= lo) return 0.0;
  std::size_t halves = static_cast<std::size_t>(std::ceil((hi - lo) / step));
  if (halves < 2) halves = 2;
  if (halves % 2 == 1) ++halves;
  double h = (hi - lo) / static_cast<double>(halves);
  double acc = 0.0;
  for (std::size_t i = 0; i <= halves; ++i) {
    double x = lo + h * static_cast<double>(i);
    double c = cdf(x);
    require(c >= prev_cdf - 1e-9, errc::non_monotone_cdf,
            "forecast CDF decreases near y = " + std::to_string(x));
    prev_cdf = std::max(prev_cdf, c);
    double w = (i == 0 || i == halves) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    acc += w * g(c);
  }
  return acc * h / 3.0;
}

double squared(double c) { return c * c; }
double complement_squared(double c) { return (1.0 - c) * (1.0 - c); }

}  // namespace

double mae(const std::vector<double>& pred, const std::vector<double>& obs) {
  check_lengths(pred.size(), obs.size(), "mae");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += std::fabs(pred[i] - obs[i]);
  return acc / static_cast<double>(pred.size());
}

double mape(const std::vector<double>& pred, const std::vector<double>& obs,
            double floor_kw) {
  check_lengths(pred.size(), obs.size(), "mape");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    acc += std::fabs(pred[i] - obs[i]) / std::fmax(std::fabs(obs[i]), floor_kw);
  }
  return acc / static_cast<double>(pred.size()) * 100.0;
}

double crps_integral(const std::function<double(double)>& cdf, double y_obs, double lo,
                     double hi, double step) {
  require(hi > lo && step > 0.0, errc::out_of_range,
          "integration bounds must satisfy lo < hi with a positive step");
  double prev = -1e300;
  // Below the observation the discrepancy is F^2, above it (1-F)^2; the
  // integrand is split at y_obs so Simpson never straddles the kink.
  double split = std::clamp(y_obs, lo, hi);
  double total = simpson_monotone(cdf, squared, lo, split, step, prev);
  total += simpson_monotone(cdf, complement_squared, split, hi, step, prev);
  // Tails where the CDF is taken as exactly 0 (below lo) or 1 (above hi)
  // contribute only when the observation itself lies out of range.
  if (y_obs > hi) total += y_obs - hi;  // F^2 = 1 over [hi, y_obs]
  if (y_obs < lo) total += lo - y_obs;  // (1-F)^2 = 1 over [y_obs, lo]
  return total;
}

double crps_integral_gaussian(double mu, double sigma, double y_obs) {
  require(sigma > 0.0, errc::nonpositive_sigma, "sigma must be positive");
  auto cdf = [mu, sigma](double x) { return std_normal_cdf((x - mu) / sigma); };
  return crps_integral(cdf, y_obs, mu - 10.0 * sigma, mu + 10.0 * sigma, sigma / 1000.0);
}

double crps_gaussian(double mu, double sigma, double y_obs) {
  require(sigma > 0.0, errc::nonpositive_sigma, "sigma must be positive");
  double z = (y_obs - mu) / sigma;
  return sigma * (z * (2.0 * std_normal_cdf(z) - 1.0) + 2.0 * std_normal_pdf(z) -
                  1.0 / std::sqrt(std::numbers::pi));
}

double crps_avg(const std::vector<double>& mu, const std::vector<double>& sigma,
                const std::vector<double>& obs) {
  check_lengths(mu.size(), obs.size(), "crps_avg");
  check_lengths(sigma.size(), obs.size(), "crps_avg");
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) acc += crps_gaussian(mu[i], sigma[i], obs[i]);
  return acc / static_cast<double>(mu.size());
}

double pbb(const std::vector<double>& mu, const std::vector<double>& sigma,
           const std::vector<double>& obs) {
  check_lengths(mu.size(), obs.size(), "pbb");
  check_lengths(sigma.size(), obs.size(), "pbb");
  std::size_t inside = 0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (obs[i] > mu[i] - sigma[i] && obs[i] < mu[i] + sigma[i]) ++inside;
  }
  return 100.0 * static_cast<double>(inside) / static_cast<double>(obs.size());
}

namespace {

MetricBlock block_for(const std::vector<double>& mu, const std::vector<double>& sigma,
                      const std::vector<double>& obs, const std::vector<std::size_t>& idx,
                      double floor_kw) {
  MetricBlock b;
  b.count = idx.size();
  if (idx.empty()) return b;
  std::vector<double> m, s, o;
  m.reserve(idx.size());
  s.reserve(idx.size());
  o.reserve(idx.size());
  for (std::size_t i : idx) {
    m.push_back(mu[i]);
    s.push_back(sigma[i]);
    o.push_back(obs[i]);
  }
  b.mae_kw = mae(m, o);
  b.mape_pct = mape(m, o, floor_kw);
  b.pbb_pct = pbb(m, s, o);
  b.crps = crps_avg(m, s, o);
  return b;
}

nlohmann::json block_json(const MetricBlock& b) {
  if (b.count == 0) {
    return {{"mae_kw", nullptr},
            {"mape_pct", nullptr},
            {"pbb_pct", nullptr},
            {"crps", nullptr}};
  }
  return {{"mae_kw", b.mae_kw},
          {"mape_pct", b.mape_pct},
          {"pbb_pct", b.pbb_pct},
          {"crps", b.crps}};
}

}  // namespace

EvalReport seasonal_report(const std::vector<double>& mu, const std::vector<double>& sigma,
                           const std::vector<double>& obs,
                           const std::vector<std::int64_t>& timestamps,
                           const ReportOptions& options) {
  check_lengths(mu.size(), obs.size(), "seasonal_report");
  check_lengths(sigma.size(), obs.size(), "seasonal_report");
  check_lengths(timestamps.size(), obs.size(), "seasonal_report");

  std::vector<std::size_t> all, winter, summer;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    all.push_back(i);
    int m = month_of(timestamps[i]);
    if (m == 12 || m <= 2) winter.push_back(i);
    if (m >= 6 && m <= 8) summer.push_back(i);
  }

  EvalReport report;
  report.options = options;
  report.overall = block_for(mu, sigma, obs, all, options.mape_floor_kw);
  report.winter = block_for(mu, sigma, obs, winter, options.mape_floor_kw);
  report.summer = block_for(mu, sigma, obs, summer, options.mape_floor_kw);
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["overall"] = block_json(overall);
  j["winter"] = block_json(winter);
  j["summer"] = block_json(summer);
  j["counts"] = {{"overall", overall.count},
                 {"winter", winter.count},
                 {"summer", summer.count}};
  j["config"] = {{"mape_floor_kw", options.mape_floor_kw},
                 {"split", options.split_label},
                 {"winter_months", {12, 1, 2}},
                 {"summer_months", {6, 7, 8}}};
  return j.dump(2);
}

}  // namespace netcast::metrics

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace netcast::metrics {

/// Mean absolute error, kW.
double mae(const std::vector<double>& pred, const std::vector<double>& obs);

/// Mean absolute percentage error with a near-zero denominator guard:
/// mean |pred-obs| / max(|obs|, floor_kw) * 100.
double mape(const std::vector<double>& pred, const std::vector<double>& obs,
            double floor_kw = 0.1);

/// CRPS by quadrature of the two cumulative discrepancy integrals
/// (forecast CDF squared below the observation, complement squared above),
/// composite Simpson with the given step inside [lo, hi]. Outside the
/// bounds the CDF is taken as exactly 0 / 1.
double crps_integral(const std::function<double(double)>& cdf, double y_obs, double lo,
                     double hi, double step);

/// Same quadrature with bounds mu +/- 10 sigma and step sigma/1000.
double crps_integral_gaussian(double mu, double sigma, double y_obs);

/// Closed form for a Gaussian forecast:
/// sigma * [ z(2*Phi(z) - 1) + 2*phi(z) - 1/sqrt(pi) ], z = (y-mu)/sigma.
double crps_gaussian(double mu, double sigma, double y_obs);

/// Mean of per-step crps_gaussian over a forecast track.
double crps_avg(const std::vector<double>& mu, const std::vector<double>& sigma,
                const std::vector<double>& obs);

/// Percentage of observations strictly inside (mu - sigma, mu + sigma).
double pbb(const std::vector<double>& mu, const std::vector<double>& sigma,
           const std::vector<double>& obs);

struct MetricBlock {
  std::size_t count = 0;
  double mae_kw = 0.0;
  double mape_pct = 0.0;
  double pbb_pct = 0.0;
  double crps = 0.0;
};

struct ReportOptions {
  double mape_floor_kw = 0.1;
  std::string split_label = "test";
};

/// Overall plus winter (Dec-Feb) and summer (Jun-Aug) metric blocks.
struct EvalReport {
  MetricBlock overall;
  MetricBlock winter;
  MetricBlock summer;
  ReportOptions options;

  /// Fixed-key JSON: overall.{mae_kw,mape_pct,pbb_pct,crps}, winter.*,
  /// summer.*, counts.{overall,winter,summer}, config echo.
  std::string to_json() const;
};

EvalReport seasonal_report(const std::vector<double>& mu, const std::vector<double>& sigma,
                           const std::vector<double>& obs,
                           const std::vector<std::int64_t>& timestamps,
                           const ReportOptions& options = {});

}  // namespace netcast::metrics

#include "netcast/mathfn.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "netcast/errors.hpp"

namespace netcast {

double softplus(double x) {
  // Stable for large |x|: softplus(x) = max(x, 0) + log1p(exp(-|x|)).
  return std::fmax(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double std_normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double z_for_level(int level_pct, bool wide_95) {
  switch (level_pct) {
    case 50:
      return 0.6744897501960817;
    case 68:
      return 0.9944578832097532;
    case 95:
      return wide_95 ? 2.0 : 1.9599639845400545;
    case 99:
      return 2.5758293035489004;
    default:
      fail(errc::bad_level,
           "no z multiplier for coverage level " + std::to_string(level_pct) + "%");
  }
}

}  // namespace netcast

#pragma once

namespace netcast {

double softplus(double x);
double sigmoid(double x);

/// Standard normal density and distribution function.
double std_normal_pdf(double x);
double std_normal_cdf(double x);

/// Two-sided z multiplier for a central coverage level given in percent.
/// Supported levels: 50, 68, 95, 99. `wide_95` substitutes the common
/// rounded-up value 2.0 at level 95. Throws errc::bad_level otherwise.
double z_for_level(int level_pct, bool wide_95 = false);

}  // namespace netcast

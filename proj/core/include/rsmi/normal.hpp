#pragma once

namespace rsmi {

// Standard normal CDF.
double norm_cdf(double x);

// Inverse of the standard normal CDF. Domain is the open interval (0, 1);
// values outside it raise std::domain_error. Absolute error is far below
// 1e-7 everywhere (rational initial guess plus one Halley refinement).
double inv_norm_cdf(double p);

}  // namespace rsmi

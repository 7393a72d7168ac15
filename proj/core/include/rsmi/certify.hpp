#pragma once

#include <functional>
#include <vector>

namespace rsmi {

// Inputs of the multi-layer robustness radius: sigma_embed is the noise std
// at the first perturbed site, sigma_layers the stds of the deeper noise
// sites, p_top and p_runner the probabilities of the two most likely classes
// under the smoothed classifier.
struct RadiusInput {
  double sigma_embed = 0.0;
  std::vector<double> sigma_layers;
  double p_top = 0.0;
  double p_runner = 0.0;
};

struct RadiusBreakdown {
  double phi_top = 0.0;        // inv_norm_cdf of the (clamped) top probability
  double phi_runner = 0.0;
  std::vector<double> layer_factors;  // (1 + sigma_l^2) per deeper noise site
  double radius = 0.0;
  bool clamped = false;        // true when p_top or p_runner hit the clamp
};

// Certified L2 radius
//   R = 1/(2 sigma_embed) * prod_l (1 + sigma_l^2) * (Phi^-1(p_top) - Phi^-1(p_runner)).
// Probabilities are clamped to [1e-9, 1 - 1e-9] before the inverse CDF;
// values outside [0, 1] are rejected, as are sigma_embed <= 0, p_top <
// p_runner and p_top + p_runner > 1 + 1e-12.
RadiusBreakdown certified_radius_detail(const RadiusInput& in);
double certified_radius(const RadiusInput& in);

// Max secant slope |f(x_{i+1}) - f(x_i)| / (x_{i+1} - x_i) over the uniform
// grid with `steps` intervals on [lo, hi]. A lower bound on the true
// Lipschitz constant of f. Requires lo < hi and steps >= 2.
double lipschitz_scan(const std::function<double(double)>& f, double lo,
                      double hi, int steps);

}  // namespace rsmi

#include "rsmi/certify.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rsmi/normal.hpp"

namespace rsmi {

namespace {
constexpr double kProbClamp = 1e-9;
}

RadiusBreakdown certified_radius_detail(const RadiusInput& in) {
  if (!(in.sigma_embed > 0.0))
    throw std::invalid_argument("certified_radius: sigma_embed must be positive");
  for (double s : in.sigma_layers)
    if (s < 0.0) throw std::invalid_argument("certified_radius: layer sigma must be non-negative");
  if (in.p_top < 0.0 || in.p_top > 1.0 || in.p_runner < 0.0 || in.p_runner > 1.0)
    throw std::invalid_argument("certified_radius: probabilities must lie in [0, 1]");
  if (in.p_top < in.p_runner)
    throw std::invalid_argument("certified_radius: p_top must be >= p_runner");
  if (in.p_top + in.p_runner > 1.0 + 1e-12)
    throw std::invalid_argument("certified_radius: p_top + p_runner must not exceed 1");

  RadiusBreakdown out;
  double pa = std::clamp(in.p_top, kProbClamp, 1.0 - kProbClamp);
  double pb = std::clamp(in.p_runner, kProbClamp, 1.0 - kProbClamp);
  out.clamped = (pa != in.p_top) || (pb != in.p_runner);
  out.phi_top = inv_norm_cdf(pa);
  out.phi_runner = inv_norm_cdf(pb);

  double radius = (out.phi_top - out.phi_runner) / (2.0 * in.sigma_embed);
  out.layer_factors.reserve(in.sigma_layers.size());
  for (double s : in.sigma_layers) {
    double factor = 1.0 + s * s;
    out.layer_factors.push_back(factor);
    radius *= factor;
  }
  out.radius = radius;
  return out;
}

double certified_radius(const RadiusInput& in) {
  return certified_radius_detail(in).radius;
}

double lipschitz_scan(const std::function<double(double)>& f, double lo,
                      double hi, int steps) {
  if (!(lo < hi)) throw std::invalid_argument("lipschitz_scan: lo must be < hi");
  if (steps < 2) throw std::invalid_argument("lipschitz_scan: steps must be >= 2");

  double h = (hi - lo) / static_cast<double>(steps);
  double max_slope = 0.0;
  double prev = f(lo);
  for (int i = 1; i <= steps; ++i) {
    double x = lo + h * static_cast<double>(i);
    double cur = f(x);
    max_slope = std::max(max_slope, std::abs(cur - prev) / h);
    prev = cur;
  }
  return max_slope;
}

}  // namespace rsmi

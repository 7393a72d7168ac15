#include "rsmi/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace rsmi {

void adamw_step(Parameters& params, const Parameters& grads, AdamWState& state,
                const ModelConfig& model_cfg, const AdamWConfig& cfg) {
  if (state.step == 0) {
    state.m = zeros_like(model_cfg);
    state.v = zeros_like(model_cfg);
  }
  state.step += 1;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

  struct Slot {
    std::string name;
    Mat* p;
    const Mat* g;
    Mat* m;
    Mat* v;
  };
  std::vector<Slot> slots;
  for_each_array(params, [&](const std::string& name, Mat& m) {
    slots.push_back({name, &m, nullptr, nullptr, nullptr});
  });
  size_t i = 0;
  for_each_array(grads, [&](const std::string&, const Mat& m) { slots[i++].g = &m; });
  i = 0;
  for_each_array(state.m, [&](const std::string&, Mat& m) { slots[i++].m = &m; });
  i = 0;
  for_each_array(state.v, [&](const std::string&, Mat& m) { slots[i++].v = &m; });

  for (Slot& slot : slots) {
    if (slot.g->count() != slot.p->count())
      throw std::runtime_error("adamw_step: gradient shape mismatch for " + slot.name);
    for (size_t k = 0; k < slot.p->a.size(); ++k) {
      double grad = slot.g->a[k];
      if (!std::isfinite(grad))
        throw std::runtime_error("adamw_step: non-finite gradient in " + slot.name);
      double& m = slot.m->a[k];
      double& v = slot.v->a[k];
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad;
      double m_hat = m / bc1;
      double v_hat = v / bc2;
      double& w = slot.p->a[k];
      w -= cfg.lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) + cfg.weight_decay * w);
    }
  }
}

}  // namespace rsmi

#pragma once

#include "rsmi/model.hpp"

namespace rsmi {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// First- and second-moment accumulators; lazily shaped on the first step.
struct AdamWState {
  Parameters m;
  Parameters v;
  long step = 0;
};

// Decoupled-weight-decay adaptive update with bias correction. Non-finite
// gradients raise std::runtime_error naming the offending array.
void adamw_step(Parameters& params, const Parameters& grads, AdamWState& state,
                const ModelConfig& model_cfg, const AdamWConfig& cfg);

}  // namespace rsmi

#pragma once

#include <vector>

#include "rsmi/model.hpp"

namespace rsmi {

// Loss gradient with respect to the summed (token + positional) embedding of
// each input position, attributed to the token.
struct EmbeddingGrad {
  Mat vectors;                // [T, d]
  std::vector<double> norms;  // per-token L2 norms

  void recompute_norms();
};

struct BackwardResult {
  EmbeddingGrad embedding;
  Parameters param_grads;  // same shapes as the model parameters
};

// Exact reverse-mode gradients of an arbitrary logit-space cotangent through
// head, pooling, blocks and embedding lookup. Noise vectors recorded in the
// trace are constants (reparameterization pass-through).
BackwardResult backward_with_dlogits(const Parameters& params, const ModelConfig& cfg,
                                     const ForwardTrace& trace,
                                     const std::vector<double>& dlogits);

// Gradients of the cross-entropy loss of `trace` against `label`.
BackwardResult backward_to_embeddings(const Parameters& params, const ModelConfig& cfg,
                                      const ForwardTrace& trace, int label);

}  // namespace rsmi

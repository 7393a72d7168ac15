#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rsmi/rng.hpp"
#include "rsmi/vocab.hpp"

namespace rsmi {

// Dense row-major matrix of doubles; vectors are 1-row matrices.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * static_cast<size_t>(c), 0.0) {}

  double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
  double* row(int r) { return a.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const { return a.data() + static_cast<size_t>(r) * cols; }
  size_t count() const { return a.size(); }
};

// Architecture and noise-injection layout. Noise sites are identified by an
// integer: 0 is the embedding output, l in 1..n_blocks the output of block l.
struct ModelConfig {
  int32_t vocab_size = 0;
  int d_model = 32;
  int n_blocks = 3;
  int n_classes = 2;
  int max_len = 64;
  std::vector<int> noise_sites;
  std::vector<double> noise_sigma;  // one std per entry of noise_sites
  bool attention_enabled = true;
  bool feedforward_enabled = true;

  int ff_hidden() const { return 2 * d_model; }
  void validate() const;
};

// Embedding output plus `n_noise_layers` evenly spaced block outputs
// (n_blocks=12, n_noise_layers=3 gives blocks 1, 5, 9).
std::vector<int> default_noise_sites(int n_blocks, int n_noise_layers);

struct BlockParams {
  Mat attn_q, attn_k, attn_v, attn_out;    // [d, d]
  Mat ff_in, ff_in_bias;                   // [d, h], [1, h]
  Mat ff_out, ff_out_bias;                 // [h, d], [1, d]
  Mat ln1_gain, ln1_bias, ln2_gain, ln2_bias;  // [1, d]
};

struct Parameters {
  Mat embedding;      // [vocab_size, d]
  Mat pos_embedding;  // [max_len, d]
  std::vector<BlockParams> blocks;
  Mat head_w;  // [d, n_classes]
  Mat head_b;  // [1, n_classes]
};

// Visits every parameter array with a stable name, in checkpoint order.
template <typename P, typename Fn>
void for_each_array(P& params, Fn&& fn) {
  fn("embedding", params.embedding);
  fn("pos_embedding", params.pos_embedding);
  for (size_t b = 0; b < params.blocks.size(); ++b) {
    auto& blk = params.blocks[b];
    const std::string prefix = "block" + std::to_string(b) + ".";
    fn(prefix + "attn_q", blk.attn_q);
    fn(prefix + "attn_k", blk.attn_k);
    fn(prefix + "attn_v", blk.attn_v);
    fn(prefix + "attn_out", blk.attn_out);
    fn(prefix + "ff_in", blk.ff_in);
    fn(prefix + "ff_in_bias", blk.ff_in_bias);
    fn(prefix + "ff_out", blk.ff_out);
    fn(prefix + "ff_out_bias", blk.ff_out_bias);
    fn(prefix + "ln1_gain", blk.ln1_gain);
    fn(prefix + "ln1_bias", blk.ln1_bias);
    fn(prefix + "ln2_gain", blk.ln2_gain);
    fn(prefix + "ln2_bias", blk.ln2_bias);
  }
  fn("head.w", params.head_w);
  fn("head.b", params.head_b);
}

Parameters zeros_like(const ModelConfig& cfg);

// Random initialization; every value is quantized to the float32 grid so
// freshly initialized parameters survive the checkpoint format bitwise.
Parameters init_parameters(const ModelConfig& cfg, RngStream& rng);

struct BlockTrace {
  Mat q, k, v;          // [T, d]
  Mat attn_weights;     // [T, T], rows sum to 1 over non-PAD keys
  Mat attn_ctx;         // [T, d]
  Mat res1;             // [T, d]
  Mat ln1_mean, ln1_rstd;  // [T, 1]
  Mat norm1;            // [T, d]
  Mat ff_pre, ff_act;   // [T, h]
  Mat res2;             // [T, d]
  Mat ln2_mean, ln2_rstd;  // [T, 1]
  Mat block_out;        // [T, d], post-noise when the block is a noise site
};

struct NoiseRecord {
  int site = 0;
  Mat pre;    // activations before noise
  Mat post;   // activations after noise
  Mat noise;  // the drawn noise itself
};

// Everything one stochastic pass produces, retained for backprop, saliency
// scoring and latent-representation analysis.
struct ForwardTrace {
  std::vector<TokenId> tokens;
  std::vector<bool> is_pad;
  int active_count = 0;  // non-PAD positions
  bool noisy = false;
  Mat embed_sum;  // token + positional (+ caller offset), before any noise
  Mat x0;         // embedding-site output fed to block 1
  std::vector<BlockTrace> blocks;
  std::vector<NoiseRecord> noise;
  std::vector<double> pooled;
  std::vector<double> logits;
  std::vector<double> probs;
};

// One forward pass. Pass rng == nullptr to disable the noise sites entirely;
// with a stream the configured sites each add sigma-scaled Gaussian noise.
// `embedding_offsets`, when given, is a [T, d] matrix added to the summed
// embeddings and treated as a constant by backprop. PAD positions are
// excluded from attention keys and from mean pooling.
ForwardTrace forward(const Parameters& params, const ModelConfig& cfg,
                     const std::vector<TokenId>& tokens, RngStream* rng,
                     const Mat* embedding_offsets = nullptr);

double cross_entropy(const ForwardTrace& trace, int label);

std::vector<double> softmax(const std::vector<double>& logits);

// out = a * b
Mat matmul(const Mat& a, const Mat& b);
// out = a^T * b
Mat matmul_at(const Mat& a, const Mat& b);
// out = a * b^T
Mat matmul_bt(const Mat& a, const Mat& b);

}  // namespace rsmi

#include "rsmi/grad.hpp"

#include <cmath>
#include <stdexcept>

namespace rsmi {

void EmbeddingGrad::recompute_norms() {
  norms.assign(static_cast<size_t>(vectors.rows), 0.0);
  for (int t = 0; t < vectors.rows; ++t) {
    const double* row = vectors.row(t);
    double s = 0.0;
    for (int j = 0; j < vectors.cols; ++j) s += row[j] * row[j];
    norms[static_cast<size_t>(t)] = std::sqrt(s);
  }
}

namespace {

// Reverse of layer_norm_rows; accumulates gain/bias gradients.
void layer_norm_backward(const Mat& x, const Mat& mean, const Mat& rstd, const Mat& gain,
                         const Mat& dy, Mat& dx, Mat& dgain, Mat& dbias) {
  int d = x.cols;
  dx = Mat(x.rows, d);
  for (int t = 0; t < x.rows; ++t) {
    const double* xr = x.row(t);
    const double* dyr = dy.row(t);
    double* dxr = dx.row(t);
    double mu = mean.at(t, 0);
    double r = rstd.at(t, 0);
    double m1 = 0.0;  // mean of dxhat
    double m2 = 0.0;  // mean of dxhat * xhat
    for (int j = 0; j < d; ++j) {
      double xhat = (xr[j] - mu) * r;
      double dxhat = dyr[j] * gain.at(0, j);
      dgain.at(0, j) += dyr[j] * xhat;
      dbias.at(0, j) += dyr[j];
      m1 += dxhat;
      m2 += dxhat * xhat;
    }
    m1 /= d;
    m2 /= d;
    for (int j = 0; j < d; ++j) {
      double xhat = (xr[j] - mu) * r;
      double dxhat = dyr[j] * gain.at(0, j);
      dxr[j] = r * (dxhat - m1 - xhat * m2);
    }
  }
}

void add_inplace(Mat& dst, const Mat& src) {
  for (size_t i = 0; i < dst.a.size(); ++i) dst.a[i] += src.a[i];
}

}  // namespace

BackwardResult backward_with_dlogits(const Parameters& params, const ModelConfig& cfg,
                                     const ForwardTrace& trace,
                                     const std::vector<double>& dlogits) {
  if (static_cast<int>(dlogits.size()) != cfg.n_classes)
    throw std::invalid_argument("backward: dlogits size mismatch");
  if (static_cast<int>(trace.blocks.size()) != cfg.n_blocks ||
      trace.embed_sum.cols != cfg.d_model)
    throw std::invalid_argument("backward: trace does not match the model config");
  if (params.embedding.rows != cfg.vocab_size || params.embedding.cols != cfg.d_model ||
      static_cast<int>(params.blocks.size()) != cfg.n_blocks)
    throw std::invalid_argument("backward: parameters do not match the model config");

  int len = static_cast<int>(trace.tokens.size());
  int d = cfg.d_model;

  BackwardResult out;
  out.param_grads = zeros_like(cfg);
  Parameters& g = out.param_grads;

  // Head and mean pooling.
  std::vector<double> dpooled(static_cast<size_t>(d), 0.0);
  for (int c = 0; c < cfg.n_classes; ++c) {
    double dl = dlogits[static_cast<size_t>(c)];
    g.head_b.at(0, c) += dl;
    for (int j = 0; j < d; ++j) {
      g.head_w.at(j, c) += trace.pooled[static_cast<size_t>(j)] * dl;
      dpooled[static_cast<size_t>(j)] += params.head_w.at(j, c) * dl;
    }
  }
  Mat dx(len, d);
  for (int t = 0; t < len; ++t) {
    if (trace.is_pad[static_cast<size_t>(t)]) continue;
    double* row = dx.row(t);
    for (int j = 0; j < d; ++j) row[j] = dpooled[static_cast<size_t>(j)] / trace.active_count;
  }

  double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  for (int b = cfg.n_blocks - 1; b >= 0; --b) {
    const BlockTrace& bt = trace.blocks[static_cast<size_t>(b)];
    const BlockParams& bp = params.blocks[static_cast<size_t>(b)];
    BlockParams& bg = g.blocks[static_cast<size_t>(b)];
    const Mat& block_in = b == 0 ? trace.x0 : trace.blocks[static_cast<size_t>(b - 1)].block_out;
    const Mat& ff_in_act = cfg.attention_enabled ? bt.norm1 : block_in;

    // Noise added at the block output is a constant: gradient passes through.
    if (cfg.feedforward_enabled) {
      Mat dres2;
      layer_norm_backward(bt.res2, bt.ln2_mean, bt.ln2_rstd, bp.ln2_gain, dx, dres2,
                          bg.ln2_gain, bg.ln2_bias);
      const Mat& df = dres2;  // feedforward branch
      for (int t = 0; t < len; ++t)
        for (int j = 0; j < d; ++j) bg.ff_out_bias.at(0, j) += df.at(t, j);
      add_inplace(bg.ff_out, matmul_at(bt.ff_act, df));
      Mat dact = matmul_bt(df, bp.ff_out);
      Mat dpre = dact;
      for (size_t i = 0; i < dpre.a.size(); ++i)
        if (bt.ff_pre.a[i] <= 0.0) dpre.a[i] = 0.0;
      for (int t = 0; t < len; ++t)
        for (int j = 0; j < cfg.ff_hidden(); ++j) bg.ff_in_bias.at(0, j) += dpre.at(t, j);
      add_inplace(bg.ff_in, matmul_at(ff_in_act, dpre));
      Mat dh1 = dres2;  // residual branch
      add_inplace(dh1, matmul_bt(dpre, bp.ff_in));
      dx = std::move(dh1);
    }

    if (cfg.attention_enabled) {
      Mat dres1;
      layer_norm_backward(bt.res1, bt.ln1_mean, bt.ln1_rstd, bp.ln1_gain, dx, dres1,
                          bg.ln1_gain, bg.ln1_bias);
      Mat dxin = dres1;  // residual branch
      const Mat& dproj = dres1;
      add_inplace(bg.attn_out, matmul_at(bt.attn_ctx, dproj));
      Mat dctx = matmul_bt(dproj, bp.attn_out);
      Mat dweights = matmul_bt(dctx, bt.v);
      Mat dv = matmul_at(bt.attn_weights, dctx);
      // Softmax backward per query row; PAD keys carry zero weight and stay zero.
      Mat dscores(len, len);
      for (int i = 0; i < len; ++i) {
        double dot = 0.0;
        for (int j = 0; j < len; ++j) dot += dweights.at(i, j) * bt.attn_weights.at(i, j);
        for (int j = 0; j < len; ++j)
          dscores.at(i, j) = bt.attn_weights.at(i, j) * (dweights.at(i, j) - dot);
      }
      Mat dq = matmul(dscores, bt.k);
      Mat dk = matmul_at(dscores, bt.q);
      for (double& v : dq.a) v *= inv_sqrt_d;
      for (double& v : dk.a) v *= inv_sqrt_d;
      add_inplace(bg.attn_q, matmul_at(block_in, dq));
      add_inplace(bg.attn_k, matmul_at(block_in, dk));
      add_inplace(bg.attn_v, matmul_at(block_in, dv));
      add_inplace(dxin, matmul_bt(dq, bp.attn_q));
      add_inplace(dxin, matmul_bt(dk, bp.attn_k));
      add_inplace(dxin, matmul_bt(dv, bp.attn_v));
      dx = std::move(dxin);
    }
  }

  // Embedding-site noise is likewise a pass-through constant.
  out.embedding.vectors = dx;
  out.embedding.recompute_norms();
  for (int t = 0; t < len; ++t) {
    TokenId id = trace.tokens[static_cast<size_t>(t)];
    const double* src = dx.row(t);
    double* emb_row = g.embedding.row(id);
    double* pos_row = g.pos_embedding.row(t);
    for (int j = 0; j < d; ++j) {
      emb_row[j] += src[j];
      pos_row[j] += src[j];
    }
  }
  return out;
}

BackwardResult backward_to_embeddings(const Parameters& params, const ModelConfig& cfg,
                                      const ForwardTrace& trace, int label) {
  if (label < 0 || label >= cfg.n_classes)
    throw std::invalid_argument("backward_to_embeddings: label out of range");
  std::vector<double> dlogits = trace.probs;
  dlogits[static_cast<size_t>(label)] -= 1.0;
  return backward_with_dlogits(params, cfg, trace, dlogits);
}

}  // namespace rsmi

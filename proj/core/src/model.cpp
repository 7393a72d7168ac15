#include "rsmi/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rsmi {

void ModelConfig::validate() const {
  if (vocab_size < 3) throw std::invalid_argument("ModelConfig: vocab_size must cover reserved ids");
  if (d_model < 2 || d_model % 2 != 0)
    throw std::invalid_argument("ModelConfig: d_model must be a positive even number");
  if (n_blocks < 1) throw std::invalid_argument("ModelConfig: n_blocks must be positive");
  if (n_classes < 2) throw std::invalid_argument("ModelConfig: n_classes must be >= 2");
  if (max_len < 1) throw std::invalid_argument("ModelConfig: max_len must be positive");
  if (noise_sites.size() != noise_sigma.size())
    throw std::invalid_argument("ModelConfig: noise_sites and noise_sigma must align");
  int prev = -1;
  for (size_t i = 0; i < noise_sites.size(); ++i) {
    int site = noise_sites[i];
    if (site < 0 || site > n_blocks)
      throw std::invalid_argument("ModelConfig: noise site out of range");
    if (site <= prev) throw std::invalid_argument("ModelConfig: noise sites must be ascending");
    if (noise_sigma[i] < 0) throw std::invalid_argument("ModelConfig: sigma must be non-negative");
    prev = site;
  }
}

std::vector<int> default_noise_sites(int n_blocks, int n_noise_layers) {
  std::vector<int> sites{0};
  int k = std::clamp(n_noise_layers, 0, n_blocks);
  for (int j = 0; j < k; ++j) {
    int site = 1 + j * n_blocks / k;
    if (sites.back() != site) sites.push_back(site);
  }
  return sites;
}

Parameters zeros_like(const ModelConfig& cfg) {
  Parameters p;
  int d = cfg.d_model;
  int h = cfg.ff_hidden();
  p.embedding = Mat(cfg.vocab_size, d);
  p.pos_embedding = Mat(cfg.max_len, d);
  p.blocks.resize(static_cast<size_t>(cfg.n_blocks));
  for (auto& blk : p.blocks) {
    blk.attn_q = Mat(d, d);
    blk.attn_k = Mat(d, d);
    blk.attn_v = Mat(d, d);
    blk.attn_out = Mat(d, d);
    blk.ff_in = Mat(d, h);
    blk.ff_in_bias = Mat(1, h);
    blk.ff_out = Mat(h, d);
    blk.ff_out_bias = Mat(1, d);
    blk.ln1_gain = Mat(1, d);
    blk.ln1_bias = Mat(1, d);
    blk.ln2_gain = Mat(1, d);
    blk.ln2_bias = Mat(1, d);
  }
  p.head_w = Mat(d, cfg.n_classes);
  p.head_b = Mat(1, cfg.n_classes);
  return p;
}

namespace {

double quantize_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

void fill_uniform(Mat& m, RngStream& rng, double scale) {
  for (double& v : m.a) v = quantize_f32(scale * (2.0 * rng.next_uniform() - 1.0));
}

}  // namespace

Parameters init_parameters(const ModelConfig& cfg, RngStream& rng) {
  cfg.validate();
  Parameters p = zeros_like(cfg);
  int d = cfg.d_model;
  int h = cfg.ff_hidden();

  fill_uniform(p.embedding, rng, 0.5);
  fill_uniform(p.pos_embedding, rng, 0.1);
  double attn_scale = std::sqrt(3.0 / d);
  double ff_in_scale = std::sqrt(6.0 / (d + h));
  for (auto& blk : p.blocks) {
    fill_uniform(blk.attn_q, rng, attn_scale);
    fill_uniform(blk.attn_k, rng, attn_scale);
    fill_uniform(blk.attn_v, rng, attn_scale);
    fill_uniform(blk.attn_out, rng, attn_scale);
    fill_uniform(blk.ff_in, rng, ff_in_scale);
    fill_uniform(blk.ff_out, rng, ff_in_scale);
    for (double& v : blk.ln1_gain.a) v = 1.0;
    for (double& v : blk.ln2_gain.a) v = 1.0;
  }
  fill_uniform(p.head_w, rng, std::sqrt(3.0 / d));
  return p;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  double max_logit = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - max_logit);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

namespace {

// y = gain * (x - mean) * rstd + bias, per row.
void layer_norm_rows(const Mat& x, const Mat& gain, const Mat& bias, Mat& mean_out,
                     Mat& rstd_out, Mat& y) {
  constexpr double kEps = 1e-8;
  int d = x.cols;
  mean_out = Mat(x.rows, 1);
  rstd_out = Mat(x.rows, 1);
  y = Mat(x.rows, d);
  for (int t = 0; t < x.rows; ++t) {
    const double* row = x.row(t);
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += row[j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      double c = row[j] - mean;
      var += c * c;
    }
    var /= d;
    double rstd = 1.0 / std::sqrt(var + kEps);
    mean_out.at(t, 0) = mean;
    rstd_out.at(t, 0) = rstd;
    double* out = y.row(t);
    for (int j = 0; j < d; ++j)
      out[j] = gain.at(0, j) * (row[j] - mean) * rstd + bias.at(0, j);
  }
}

void add_noise_site(Mat& x, int site, double sigma, RngStream& rng, ForwardTrace& trace) {
  NoiseRecord rec;
  rec.site = site;
  rec.pre = x;
  rec.noise = Mat(x.rows, x.cols);
  for (int t = 0; t < x.rows; ++t) {
    double* nrow = rec.noise.row(t);
    double* xrow = x.row(t);
    for (int j = 0; j < x.cols; ++j) {
      nrow[j] = rng.next_gaussian(sigma);
      xrow[j] += nrow[j];
    }
  }
  rec.post = x;
  trace.noise.push_back(std::move(rec));
}

}  // namespace

ForwardTrace forward(const Parameters& params, const ModelConfig& cfg,
                     const std::vector<TokenId>& tokens, RngStream* rng,
                     const Mat* embedding_offsets) {
  int len = static_cast<int>(tokens.size());
  if (len < 1) throw std::invalid_argument("forward: empty token sequence");
  if (len > cfg.max_len) throw std::invalid_argument("forward: sequence exceeds max_len");
  if (embedding_offsets != nullptr &&
      (embedding_offsets->rows != len || embedding_offsets->cols != cfg.d_model))
    throw std::invalid_argument("forward: embedding offset shape mismatch");

  ForwardTrace trace;
  trace.tokens = tokens;
  trace.noisy = rng != nullptr;
  trace.is_pad.resize(static_cast<size_t>(len));
  int d = cfg.d_model;

  trace.embed_sum = Mat(len, d);
  for (int t = 0; t < len; ++t) {
    TokenId id = tokens[static_cast<size_t>(t)];
    if (id < 0 || id >= cfg.vocab_size)
      throw std::invalid_argument("forward: token id " + std::to_string(id) +
                                  " out of range");
    trace.is_pad[static_cast<size_t>(t)] = (id == Vocabulary::kPad);
    double* row = trace.embed_sum.row(t);
    const double* emb = params.embedding.row(id);
    const double* pos = params.pos_embedding.row(t);
    for (int j = 0; j < d; ++j) row[j] = emb[j] + pos[j];
    if (embedding_offsets != nullptr) {
      const double* off = embedding_offsets->row(t);
      for (int j = 0; j < d; ++j) row[j] += off[j];
    }
  }
  trace.active_count = 0;
  for (bool pad : trace.is_pad)
    if (!pad) ++trace.active_count;
  if (trace.active_count == 0) throw std::invalid_argument("forward: all positions are PAD");

  auto sigma_at = [&](int site, double* sigma) {
    for (size_t i = 0; i < cfg.noise_sites.size(); ++i) {
      if (cfg.noise_sites[i] == site) {
        *sigma = cfg.noise_sigma[i];
        return true;
      }
    }
    return false;
  };

  Mat x = trace.embed_sum;
  double sigma = 0.0;
  if (rng != nullptr && sigma_at(0, &sigma)) add_noise_site(x, 0, sigma, *rng, trace);
  trace.x0 = x;

  double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  trace.blocks.resize(static_cast<size_t>(cfg.n_blocks));
  for (int b = 0; b < cfg.n_blocks; ++b) {
    BlockTrace& bt = trace.blocks[static_cast<size_t>(b)];
    const BlockParams& bp = params.blocks[static_cast<size_t>(b)];

    if (cfg.attention_enabled) {
      bt.q = matmul(x, bp.attn_q);
      bt.k = matmul(x, bp.attn_k);
      bt.v = matmul(x, bp.attn_v);
      bt.attn_weights = Mat(len, len);
      for (int i = 0; i < len; ++i) {
        const double* qi = bt.q.row(i);
        double max_score = -std::numeric_limits<double>::infinity();
        std::vector<double> scores(static_cast<size_t>(len),
                                   -std::numeric_limits<double>::infinity());
        for (int j = 0; j < len; ++j) {
          if (trace.is_pad[static_cast<size_t>(j)]) continue;
          const double* kj = bt.k.row(j);
          double s = 0.0;
          for (int m = 0; m < d; ++m) s += qi[m] * kj[m];
          s *= inv_sqrt_d;
          scores[static_cast<size_t>(j)] = s;
          max_score = std::max(max_score, s);
        }
        double total = 0.0;
        for (int j = 0; j < len; ++j) {
          if (trace.is_pad[static_cast<size_t>(j)]) continue;
          double w = std::exp(scores[static_cast<size_t>(j)] - max_score);
          bt.attn_weights.at(i, j) = w;
          total += w;
        }
        for (int j = 0; j < len; ++j) bt.attn_weights.at(i, j) /= total;
      }
      bt.attn_ctx = matmul(bt.attn_weights, bt.v);
      Mat proj = matmul(bt.attn_ctx, bp.attn_out);
      bt.res1 = x;
      for (size_t i = 0; i < bt.res1.a.size(); ++i) bt.res1.a[i] += proj.a[i];
      layer_norm_rows(bt.res1, bp.ln1_gain, bp.ln1_bias, bt.ln1_mean, bt.ln1_rstd, bt.norm1);
      x = bt.norm1;
    }

    if (cfg.feedforward_enabled) {
      bt.ff_pre = matmul(x, bp.ff_in);
      for (int t = 0; t < len; ++t) {
        double* row = bt.ff_pre.row(t);
        for (int j = 0; j < cfg.ff_hidden(); ++j) row[j] += bp.ff_in_bias.at(0, j);
      }
      bt.ff_act = bt.ff_pre;
      for (double& v : bt.ff_act.a) v = v > 0.0 ? v : 0.0;
      Mat f = matmul(bt.ff_act, bp.ff_out);
      for (int t = 0; t < len; ++t) {
        double* row = f.row(t);
        for (int j = 0; j < d; ++j) row[j] += bp.ff_out_bias.at(0, j);
      }
      bt.res2 = x;
      for (size_t i = 0; i < bt.res2.a.size(); ++i) bt.res2.a[i] += f.a[i];
      layer_norm_rows(bt.res2, bp.ln2_gain, bp.ln2_bias, bt.ln2_mean, bt.ln2_rstd, x);
      // x now refers to a fresh matrix; stash it below.
    }

    if (rng != nullptr && sigma_at(b + 1, &sigma)) add_noise_site(x, b + 1, sigma, *rng, trace);
    bt.block_out = x;
  }

  trace.pooled.assign(static_cast<size_t>(d), 0.0);
  for (int t = 0; t < len; ++t) {
    if (trace.is_pad[static_cast<size_t>(t)]) continue;
    const double* row = x.row(t);
    for (int j = 0; j < d; ++j) trace.pooled[static_cast<size_t>(j)] += row[j];
  }
  for (double& v : trace.pooled) v /= trace.active_count;

  trace.logits.assign(static_cast<size_t>(cfg.n_classes), 0.0);
  for (int c = 0; c < cfg.n_classes; ++c) {
    double s = params.head_b.at(0, c);
    for (int j = 0; j < d; ++j) s += trace.pooled[static_cast<size_t>(j)] * params.head_w.at(j, c);
    trace.logits[static_cast<size_t>(c)] = s;
  }
  trace.probs = softmax(trace.logits);
  return trace;
}

double cross_entropy(const ForwardTrace& trace, int label) {
  if (label < 0 || label >= static_cast<int>(trace.probs.size()))
    throw std::invalid_argument("cross_entropy: label out of range");
  return -std::log(std::max(trace.probs[static_cast<size_t>(label)], 1e-300));
}

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dimensions differ");
  Mat out(a.rows, b.cols);
  for (int t = 0; t < a.rows; ++t) {
    const double* ar = a.row(t);
    double* or_ = out.row(t);
    for (int m = 0; m < a.cols; ++m) {
      double av = ar[m];
      if (av == 0.0) continue;
      const double* br = b.row(m);
      for (int n = 0; n < b.cols; ++n) or_[n] += av * br[n];
    }
  }
  return out;
}

Mat matmul_at(const Mat& a, const Mat& b) {
  if (a.rows != b.rows) throw std::invalid_argument("matmul_at: row counts differ");
  Mat out(a.cols, b.cols);
  for (int t = 0; t < a.rows; ++t) {
    const double* ar = a.row(t);
    const double* br = b.row(t);
    for (int m = 0; m < a.cols; ++m) {
      double av = ar[m];
      if (av == 0.0) continue;
      double* or_ = out.row(m);
      for (int n = 0; n < b.cols; ++n) or_[n] += av * br[n];
    }
  }
  return out;
}

Mat matmul_bt(const Mat& a, const Mat& b) {
  if (a.cols != b.cols) throw std::invalid_argument("matmul_bt: column counts differ");
  Mat out(a.rows, b.rows);
  for (int t = 0; t < a.rows; ++t) {
    const double* ar = a.row(t);
    double* or_ = out.row(t);
    for (int n = 0; n < b.rows; ++n) {
      const double* br = b.row(n);
      double s = 0.0;
      for (int m = 0; m < a.cols; ++m) s += ar[m] * br[m];
      or_[n] = s;
    }
  }
  return out;
}

}  // namespace rsmi

#include "rsmi/defense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rsmi {

int argmax_class(const std::vector<double>& scores) {
  int best = 0;
  for (int c = 1; c < static_cast<int>(scores.size()); ++c)
    if (scores[static_cast<size_t>(c)] > scores[static_cast<size_t>(best)]) best = c;
  return best;
}

namespace {

int argmax_votes(const std::vector<int>& votes) {
  int best = 0;
  for (int c = 1; c < static_cast<int>(votes.size()); ++c)
    if (votes[static_cast<size_t>(c)] > votes[static_cast<size_t>(best)]) best = c;
  return best;
}

void accumulate_params(Parameters& dst, const Parameters& src, double scale) {
  std::vector<Mat*> dsts;
  for_each_array(dst, [&](const std::string&, Mat& m) { dsts.push_back(&m); });
  size_t i = 0;
  for_each_array(src, [&](const std::string&, const Mat& m) {
    Mat* d = dsts[i++];
    for (size_t k = 0; k < m.a.size(); ++k) d->a[k] += scale * m.a[k];
  });
}

}  // namespace

EmbeddingGrad smoothed_embedding_grad(const Parameters& params, const ModelConfig& cfg,
                                      const std::vector<TokenId>& tokens, int label,
                                      int mc_samples, RngStream& rng) {
  if (mc_samples < 1)
    throw std::invalid_argument("smoothed_embedding_grad: mc_samples must be >= 1");
  if (label < 0 || label >= cfg.n_classes)
    throw std::invalid_argument("smoothed_embedding_grad: label out of range");

  std::vector<ForwardTrace> traces;
  traces.reserve(static_cast<size_t>(mc_samples));
  std::vector<double> mean_probs(static_cast<size_t>(cfg.n_classes), 0.0);
  for (int i = 0; i < mc_samples; ++i) {
    traces.push_back(forward(params, cfg, tokens, &rng));
    for (int c = 0; c < cfg.n_classes; ++c)
      mean_probs[static_cast<size_t>(c)] += traces.back().probs[static_cast<size_t>(c)];
  }
  for (double& p : mean_probs) p /= mc_samples;

  // d/dlogits of -log(mean_i p_i[label]): per pass the softmax Jacobian
  // contracts to (p[label] / (nu * mean[label])) * (p - onehot(label)).
  EmbeddingGrad total;
  total.vectors = Mat(static_cast<int>(tokens.size()), cfg.d_model);
  for (const ForwardTrace& trace : traces) {
    double scale = trace.probs[static_cast<size_t>(label)] /
                   (mc_samples * mean_probs[static_cast<size_t>(label)]);
    std::vector<double> dlogits(static_cast<size_t>(cfg.n_classes));
    for (int c = 0; c < cfg.n_classes; ++c)
      dlogits[static_cast<size_t>(c)] =
          scale * (trace.probs[static_cast<size_t>(c)] - (c == label ? 1.0 : 0.0));
    BackwardResult br = backward_with_dlogits(params, cfg, trace, dlogits);
    for (size_t k = 0; k < total.vectors.a.size(); ++k)
      total.vectors.a[k] += br.embedding.vectors.a[k];
  }
  total.recompute_norms();
  return total;
}

SaliencyReport rank_saliency(const EmbeddingGrad& grad, const std::vector<TokenId>& tokens) {
  if (grad.norms.size() != tokens.size())
    throw std::invalid_argument("rank_saliency: norm/token length mismatch");
  SaliencyReport report;
  report.norms = grad.norms;
  for (int t = 0; t < static_cast<int>(tokens.size()); ++t) {
    if (Vocabulary::is_reserved(tokens[static_cast<size_t>(t)]))
      report.excluded.push_back(t);
    else
      report.ranking.push_back(t);
  }
  std::stable_sort(report.ranking.begin(), report.ranking.end(), [&](int a, int b) {
    return report.norms[static_cast<size_t>(a)] > report.norms[static_cast<size_t>(b)];
  });
  return report;
}

std::set<int> top_mask_positions(const SaliencyReport& report, int m) {
  std::set<int> out;
  int take = std::min<int>(m, static_cast<int>(report.ranking.size()));
  for (int i = 0; i < take; ++i) out.insert(report.ranking[static_cast<size_t>(i)]);
  return out;
}

std::vector<std::set<int>> rand_grad_mask(const SaliencyReport& report, int m, int n,
                                          int k1, RngStream& rng) {
  int ranked = static_cast<int>(report.ranking.size());
  if (n > ranked)
    throw std::invalid_argument("rand_grad_mask: candidate pool exceeds ranked positions");
  if (m > n) throw std::invalid_argument("rand_grad_mask: more masks than candidates");
  if (m < 0 || k1 < 0) throw std::invalid_argument("rand_grad_mask: negative count");

  std::vector<int> pool(report.ranking.begin(), report.ranking.begin() + n);
  std::vector<std::set<int>> out;
  out.reserve(static_cast<size_t>(k1));
  for (int s = 0; s < k1; ++s) {
    std::vector<int> scratch = pool;
    std::set<int> mask;
    for (int i = 0; i < m; ++i) {
      int j = i + static_cast<int>(rng.next_below(static_cast<uint64_t>(n - i)));
      std::swap(scratch[static_cast<size_t>(i)], scratch[static_cast<size_t>(j)]);
      mask.insert(scratch[static_cast<size_t>(i)]);
    }
    out.push_back(std::move(mask));
  }
  return out;
}

double train_step(Parameters& params, AdamWState& state,
                  const std::vector<LabeledExample>& batch, const TrainConfig& train_cfg,
                  const ModelConfig& model_cfg, RngStream& rng) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");

  Parameters grad_acc = zeros_like(model_cfg);
  double loss_sum = 0.0;
  const bool needs_saliency = train_cfg.masks_per_seq > 0 || train_cfg.grad_scale > 0.0;

  for (const LabeledExample& ex : batch) {
    std::set<int> mask;
    Mat offsets;
    bool has_offsets = false;
    if (needs_saliency) {
      EmbeddingGrad eg = smoothed_embedding_grad(params, model_cfg, ex.tokens, ex.label,
                                                 train_cfg.mc_samples, rng);
      SaliencyReport report = rank_saliency(eg, ex.tokens);
      mask = top_mask_positions(report, train_cfg.masks_per_seq);
      if (train_cfg.grad_scale > 0.0) {
        offsets = Mat(static_cast<int>(ex.tokens.size()), model_cfg.d_model);
        for (int t = 0; t < offsets.rows; ++t) {
          if (mask.count(t) > 0) continue;  // mask slots keep the plain MASK embedding
          double scale = train_cfg.grad_scale;
          if (train_cfg.normalize_grad) {
            double norm = eg.norms[static_cast<size_t>(t)];
            if (norm > 0.0) scale /= norm;
          }
          const double* src = eg.vectors.row(t);
          double* dst = offsets.row(t);
          for (int j = 0; j < model_cfg.d_model; ++j) dst[j] = scale * src[j];
        }
        has_offsets = true;
      }
    }
    std::vector<TokenId> masked = apply_mask(ex.tokens, mask);
    ForwardTrace trace =
        forward(params, model_cfg, masked, &rng, has_offsets ? &offsets : nullptr);
    loss_sum += cross_entropy(trace, ex.label);
    BackwardResult br = backward_to_embeddings(params, model_cfg, trace, ex.label);
    accumulate_params(grad_acc, br.param_grads, 1.0 / static_cast<double>(batch.size()));
  }

  AdamWConfig opt{.lr = train_cfg.lr, .weight_decay = train_cfg.weight_decay};
  adamw_step(params, grad_acc, state, model_cfg, opt);
  return loss_sum / static_cast<double>(batch.size());
}

SecondVote second_vote(const Parameters& params, const ModelConfig& cfg,
                       const std::vector<TokenId>& tokens,
                       const std::vector<std::set<int>>& mask_sets, RngStream& rng) {
  if (mask_sets.empty()) throw std::invalid_argument("second_vote: no mask sets");
  SecondVote result;
  result.votes.assign(static_cast<size_t>(cfg.n_classes), 0);
  result.mean_logits.assign(static_cast<size_t>(cfg.n_classes), 0.0);
  for (const std::set<int>& mask : mask_sets) {
    ForwardTrace trace = forward(params, cfg, apply_mask(tokens, mask), &rng);
    result.forward_passes += 1;
    result.votes[static_cast<size_t>(argmax_class(trace.probs))] += 1;
    for (int c = 0; c < cfg.n_classes; ++c)
      result.mean_logits[static_cast<size_t>(c)] += trace.logits[static_cast<size_t>(c)];
  }
  for (double& l : result.mean_logits) l /= static_cast<double>(mask_sets.size());
  result.majority_class = argmax_votes(result.votes);
  result.logit_class = argmax_class(result.mean_logits);
  return result;
}

TwoStepResult predict_two_step(const Parameters& params, const ModelConfig& model_cfg,
                               const InferConfig& infer_cfg,
                               const std::vector<TokenId>& tokens, RngStream& rng) {
  if (tokens.empty()) throw std::invalid_argument("predict_two_step: empty sequence");
  TwoStepResult result;

  ForwardTrace first = forward(params, model_cfg, tokens, &rng);
  result.forward_passes = 1;
  int predicted_label = argmax_class(first.probs);

  EmbeddingGrad eg = smoothed_embedding_grad(params, model_cfg, tokens, predicted_label,
                                             infer_cfg.mc_samples, rng);
  result.forward_passes += infer_cfg.mc_samples;
  SaliencyReport report = rank_saliency(eg, tokens);

  int available = static_cast<int>(report.ranking.size());
  int pool = std::min(infer_cfg.pool_size(), available);
  int masks = std::min(infer_cfg.masks_per_seq, pool);

  // First step: deterministic top-M mask, exactly as during training.
  std::vector<TokenId> masked = apply_mask(tokens, top_mask_positions(report, masks));
  result.first_votes.assign(static_cast<size_t>(model_cfg.n_classes), 0);
  std::vector<double> first_mean_probs(static_cast<size_t>(model_cfg.n_classes), 0.0);
  for (int i = 0; i < infer_cfg.first_votes; ++i) {
    ForwardTrace t = forward(params, model_cfg, masked, &rng);
    result.forward_passes += 1;
    result.first_votes[static_cast<size_t>(argmax_class(t.probs))] += 1;
    for (int c = 0; c < model_cfg.n_classes; ++c)
      first_mean_probs[static_cast<size_t>(c)] += t.probs[static_cast<size_t>(c)];
  }
  for (double& p : first_mean_probs) p /= infer_cfg.first_votes;
  int top_count = *std::max_element(result.first_votes.begin(), result.first_votes.end());

  VoteGate gate{infer_cfg.first_votes, infer_cfg.alpha};
  if (binom_consensus(top_count, gate) == VoteDecision::kAccept) {
    result.escalated = false;
    result.predicted = argmax_votes(result.first_votes);
    // Logit-average evaluation exposes informative scores (vote fractions
    // would obfuscate the attack's probability probes); majority-vote mode
    // hides them by design.
    if (infer_cfg.mode == InferMode::kLogitAverage) {
      result.probabilities = first_mean_probs;
    } else {
      result.probabilities.assign(static_cast<size_t>(model_cfg.n_classes), 0.0);
      for (int c = 0; c < model_cfg.n_classes; ++c)
        result.probabilities[static_cast<size_t>(c)] =
            static_cast<double>(result.first_votes[static_cast<size_t>(c)]) /
            infer_cfg.first_votes;
    }
    return result;
  }

  result.escalated = true;
  std::vector<std::set<int>> sets =
      rand_grad_mask(report, masks, pool, infer_cfg.second_votes, rng);
  SecondVote second = second_vote(params, model_cfg, tokens, sets, rng);
  result.forward_passes += second.forward_passes;
  result.second_votes = second.votes;
  result.mean_logits = second.mean_logits;
  if (infer_cfg.mode == InferMode::kMajorityVote) {
    result.predicted = second.majority_class;
    result.probabilities.assign(static_cast<size_t>(model_cfg.n_classes), 0.0);
    for (int c = 0; c < model_cfg.n_classes; ++c)
      result.probabilities[static_cast<size_t>(c)] =
          static_cast<double>(second.votes[static_cast<size_t>(c)]) /
          infer_cfg.second_votes;
  } else {
    result.predicted = second.logit_class;
    result.probabilities = softmax(second.mean_logits);
  }
  return result;
}

Parameters train_model(const std::vector<LabeledExample>& data,
                       const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                       uint64_t seed, const StepCallback& on_step) {
  if (data.empty()) throw std::invalid_argument("train_model: empty dataset");
  model_cfg.validate();

  RngStream init_rng(seed, 1);
  Parameters params = init_parameters(model_cfg, init_rng);
  AdamWState state;
  RngStream noise_rng(seed, 2);
  RngStream shuffle_rng(seed, 3);

  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  int step = 0;
  int batch = std::max(1, train_cfg.batch_size);
  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    for (size_t i = 0; i + 1 < order.size(); ++i) {
      size_t j = i + shuffle_rng.next_below(order.size() - i);
      std::swap(order[i], order[j]);
    }
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch)) {
      std::vector<LabeledExample> chunk;
      size_t end = std::min(order.size(), start + static_cast<size_t>(batch));
      for (size_t i = start; i < end; ++i) chunk.push_back(data[order[i]]);
      double loss = train_step(params, state, chunk, train_cfg, model_cfg, noise_rng);
      ++step;
      if (on_step) on_step(step, loss);
    }
  }
  return params;
}

std::vector<double> synonym_marginal_predict(const Parameters& params,
                                             const ModelConfig& cfg,
                                             const std::vector<TokenId>& tokens,
                                             int mask_pos, const SynonymTable& table) {
  if (mask_pos < 0 || mask_pos >= static_cast<int>(tokens.size()))
    throw std::out_of_range("synonym_marginal_predict: mask_pos out of range");

  std::vector<TokenId> candidates{tokens[static_cast<size_t>(mask_pos)]};
  for (TokenId syn : table.lookup(tokens[static_cast<size_t>(mask_pos)]))
    candidates.push_back(syn);

  std::vector<double> mean(static_cast<size_t>(cfg.n_classes), 0.0);
  std::vector<TokenId> variant = tokens;
  for (TokenId cand : candidates) {
    variant[static_cast<size_t>(mask_pos)] = cand;
    ForwardTrace trace = forward(params, cfg, variant, nullptr);
    for (int c = 0; c < cfg.n_classes; ++c)
      mean[static_cast<size_t>(c)] += trace.probs[static_cast<size_t>(c)];
  }
  for (double& p : mean) p /= static_cast<double>(candidates.size());
  return mean;
}

}  // namespace rsmi

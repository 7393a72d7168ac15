#include "rsmi/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "rsmi/log.hpp"

namespace rsmi {

MetricsSummary summarize(const std::vector<AttackRecord>& records) {
  MetricsSummary s;
  s.n_total = static_cast<long>(records.size());
  long query_sum = 0;
  long query_sum_success = 0;
  for (const AttackRecord& r : records) {
    if (r.skipped) {
      s.n_skipped += 1;
      continue;
    }
    s.n_correct += 1;
    s.n_attacked += 1;
    query_sum += r.queries;
    if (r.success) {
      s.n_fooled += 1;
      query_sum_success += r.queries;
    }
  }
  if (s.n_total > 0) {
    s.sacc = static_cast<double>(s.n_correct) / static_cast<double>(s.n_total);
    s.racc = static_cast<double>(s.n_correct - s.n_fooled) / static_cast<double>(s.n_total);
  }
  if (s.n_attacked > 0) {
    s.asr = static_cast<double>(s.n_fooled) / static_cast<double>(s.n_attacked);
    s.avg_queries_all = static_cast<double>(query_sum) / static_cast<double>(s.n_attacked);
  }
  if (s.n_fooled > 0)
    s.avg_queries_success =
        static_cast<double>(query_sum_success) / static_cast<double>(s.n_fooled);
  return s;
}

void pair_divergence(const std::vector<double>& a, const std::vector<double>& b,
                     double* l2, double* cosine) {
  if (a.size() != b.size())
    throw std::invalid_argument("pair_divergence: dimension mismatch");
  double dist2 = 0.0, dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    dist2 += d * d;
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  *l2 = std::sqrt(dist2);
  if (na == 0.0 && nb == 0.0)
    *cosine = 1.0;
  else if (na == 0.0 || nb == 0.0)
    *cosine = 0.0;
  else
    *cosine = dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

std::vector<double> mean_pool(const Mat& x, const std::vector<bool>& is_pad) {
  std::vector<double> out(static_cast<size_t>(x.cols), 0.0);
  int active = 0;
  for (int t = 0; t < x.rows; ++t) {
    if (is_pad[static_cast<size_t>(t)]) continue;
    ++active;
    const double* row = x.row(t);
    for (int j = 0; j < x.cols; ++j) out[static_cast<size_t>(j)] += row[j];
  }
  for (double& v : out) v /= std::max(1, active);
  return out;
}

}  // namespace

LayerDivergence latent_divergence(const Parameters& params, const ModelConfig& cfg,
                                  const std::vector<TokenId>& clean,
                                  const std::vector<TokenId>& adversarial,
                                  uint64_t seed) {
  if (clean.size() != adversarial.size())
    throw std::invalid_argument("latent_divergence: sequence lengths differ");

  RngStream rng_clean(seed, 0x1A7E47);
  RngStream rng_adv(seed, 0x1A7E47);  // identical draws across the pair
  ForwardTrace tc = forward(params, cfg, clean, &rng_clean);
  ForwardTrace ta = forward(params, cfg, adversarial, &rng_adv);

  LayerDivergence out;
  auto push = [&](int layer, const Mat& a, const Mat& b) {
    double l2 = 0.0, cosine = 0.0;
    pair_divergence(mean_pool(a, tc.is_pad), mean_pool(b, ta.is_pad), &l2, &cosine);
    out.layers.push_back(layer);
    out.l2.push_back(l2);
    out.cosine.push_back(cosine);
  };
  push(0, tc.x0, ta.x0);
  for (int b = 0; b < cfg.n_blocks; ++b)
    push(b + 1, tc.blocks[static_cast<size_t>(b)].block_out,
         ta.blocks[static_cast<size_t>(b)].block_out);
  return out;
}

StabilityResult stability_eval(const Parameters& params, const ModelConfig& model_cfg,
                               const InferConfig& infer_cfg,
                               const std::vector<LabeledExample>& examples, int runs,
                               uint64_t seed, int jobs) {
  if (runs < 2) throw std::invalid_argument("stability_eval: need at least 2 runs");
  if (examples.empty()) throw std::invalid_argument("stability_eval: no examples");

  StabilityResult result;
  result.per_run_accuracy.assign(static_cast<size_t>(runs), 0.0);

  std::atomic<int> next{0};
  auto worker = [&] {
    for (;;) {
      int run = next.fetch_add(1);
      if (run >= runs) return;
      long correct = 0;
      for (size_t i = 0; i < examples.size(); ++i) {
        RngStream rng(seed, static_cast<uint64_t>(run) * 0x10000ULL + i + 1);
        TwoStepResult pred =
            predict_two_step(params, model_cfg, infer_cfg, examples[i].tokens, rng);
        if (pred.predicted == examples[i].label) ++correct;
      }
      result.per_run_accuracy[static_cast<size_t>(run)] =
          static_cast<double>(correct) / static_cast<double>(examples.size());
    }
  };
  int workers = std::max(1, jobs);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  std::vector<double> sorted = result.per_run_accuracy;
  std::sort(sorted.begin(), sorted.end());
  double sum = std::accumulate(sorted.begin(), sorted.end(), 0.0);
  result.mean = sum / runs;
  double var = 0.0;
  for (double a : sorted) var += (a - result.mean) * (a - result.mean);
  result.stddev = std::sqrt(var / (runs > 1 ? runs - 1 : 1));
  result.min_acc = sorted.front();
  result.max_acc = sorted.back();
  result.median = runs % 2 == 1 ? sorted[static_cast<size_t>(runs / 2)]
                                : 0.5 * (sorted[static_cast<size_t>(runs / 2 - 1)] +
                                         sorted[static_cast<size_t>(runs / 2)]);
  return result;
}

VictimFactory make_plain_victim(const Parameters& params, const ModelConfig& cfg) {
  VictimFactory factory;
  factory.name = "plain";
  factory.stochastic = false;
  factory.make = [&params, cfg](size_t, long* forward_passes) -> ProbFn {
    return [&params, cfg, forward_passes](const std::vector<TokenId>& tokens) {
      ForwardTrace trace = forward(params, cfg, tokens, nullptr);
      if (forward_passes != nullptr) *forward_passes += 1;
      return trace.probs;
    };
  };
  return factory;
}

VictimFactory make_two_step_victim(const Parameters& params, const ModelConfig& cfg,
                                   const InferConfig& infer_cfg, uint64_t seed) {
  VictimFactory factory;
  factory.name = infer_cfg.mode == InferMode::kLogitAverage ? "two_step_logit_average"
                                                            : "two_step_majority";
  factory.stochastic = true;
  factory.make = [&params, cfg, infer_cfg, seed](size_t example_index,
                                                 long* forward_passes) -> ProbFn {
    auto rng = std::make_shared<RngStream>(seed, 0x7E57ED + example_index);
    return [&params, cfg, infer_cfg, rng, forward_passes](const std::vector<TokenId>& tokens) {
      TwoStepResult result = predict_two_step(params, cfg, infer_cfg, tokens, *rng);
      if (forward_passes != nullptr) *forward_passes += result.forward_passes;
      return result.probabilities;
    };
  };
  return factory;
}

namespace {

ModelConfig without_noise(ModelConfig cfg) {
  cfg.noise_sites.clear();
  cfg.noise_sigma.clear();
  return cfg;
}

}  // namespace

VictimFactory make_gm_victim(const Parameters& params, const ModelConfig& cfg, int masks) {
  VictimFactory factory;
  factory.name = "gm";
  factory.stochastic = false;
  ModelConfig quiet = without_noise(cfg);
  factory.make = [&params, quiet, masks](size_t, long* forward_passes) -> ProbFn {
    return [&params, quiet, masks, forward_passes](const std::vector<TokenId>& tokens) {
      RngStream unused(0, 0);  // no noise sites; never draws
      ForwardTrace first = forward(params, quiet, tokens, nullptr);
      int guess = argmax_class(first.probs);
      EmbeddingGrad eg = smoothed_embedding_grad(params, quiet, tokens, guess, 1, unused);
      SaliencyReport report = rank_saliency(eg, tokens);
      std::vector<TokenId> masked = apply_mask(tokens, top_mask_positions(report, masks));
      ForwardTrace out = forward(params, quiet, masked, nullptr);
      if (forward_passes != nullptr) *forward_passes += 3;
      return out.probs;
    };
  };
  return factory;
}

VictimFactory make_rm_victim(const Parameters& params, const ModelConfig& cfg, int masks,
                             int variants, uint64_t seed) {
  VictimFactory factory;
  factory.name = "rm";
  factory.stochastic = true;
  ModelConfig quiet = without_noise(cfg);
  factory.make = [&params, quiet, masks, variants, seed](size_t example_index,
                                                         long* forward_passes) -> ProbFn {
    auto rng = std::make_shared<RngStream>(seed, 0x4A11D0 + example_index);
    return [&params, quiet, masks, variants, rng,
            forward_passes](const std::vector<TokenId>& tokens) {
      std::vector<int> maskable;
      for (int t = 0; t < static_cast<int>(tokens.size()); ++t)
        if (!Vocabulary::is_reserved(tokens[static_cast<size_t>(t)])) maskable.push_back(t);
      int m = std::min<int>(masks, static_cast<int>(maskable.size()));

      std::vector<double> mean(static_cast<size_t>(quiet.n_classes), 0.0);
      for (int k = 0; k < variants; ++k) {
        std::vector<int> scratch = maskable;
        std::set<int> mask;
        for (int i = 0; i < m; ++i) {
          size_t j = static_cast<size_t>(i) +
                     rng->next_below(scratch.size() - static_cast<size_t>(i));
          std::swap(scratch[static_cast<size_t>(i)], scratch[j]);
          mask.insert(scratch[static_cast<size_t>(i)]);
        }
        ForwardTrace trace = forward(params, quiet, apply_mask(tokens, mask), nullptr);
        if (forward_passes != nullptr) *forward_passes += 1;
        for (int c = 0; c < quiet.n_classes; ++c)
          mean[static_cast<size_t>(c)] += trace.probs[static_cast<size_t>(c)];
      }
      for (double& p : mean) p /= static_cast<double>(variants);
      return mean;
    };
  };
  return factory;
}

AblationTable ablate_rm_vs_gm(const Parameters& params, const ModelConfig& cfg,
                              const std::vector<LabeledExample>& dataset,
                              const AttackConfig& attack_cfg,
                              const std::vector<int>& mask_counts,
                              const std::vector<int>& variant_counts, int sample_size,
                              uint64_t seed, int jobs) {
  AblationTable table;
  table.variant_counts = variant_counts;
  for (int m : mask_counts) {
    AblationRow row;
    row.mask_count = m;
    for (int k : variant_counts) {
      VictimFactory rm = make_rm_victim(params, cfg, m, k, seed);
      CampaignResult res = run_campaign(rm, dataset, attack_cfg, sample_size, seed, jobs);
      row.rm_asr.push_back(res.summary.asr);
      log_info("ablate: RM M=" + std::to_string(m) + " k=" + std::to_string(k) +
               " ASR=" + std::to_string(res.summary.asr));
    }
    VictimFactory gm = make_gm_victim(params, cfg, m);
    CampaignResult res = run_campaign(gm, dataset, attack_cfg, sample_size, seed, jobs);
    row.gm_asr = res.summary.asr;
    log_info("ablate: GM M=" + std::to_string(m) + " ASR=" + std::to_string(res.summary.asr));
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string ablation_to_csv(const AblationTable& table) {
  std::ostringstream out;
  out << "M";
  for (int k : table.variant_counts) out << ",RM_k" << k;
  out << ",GM\n";
  for (const AblationRow& row : table.rows) {
    out << row.mask_count;
    for (double asr : row.rm_asr) out << ',' << asr;
    out << ',' << row.gm_asr << '\n';
  }
  return out.str();
}

std::vector<SweepPoint> sweep_hyperparams(const SweepGrid& grid,
                                          const std::vector<LabeledExample>& train_split,
                                          const std::vector<LabeledExample>& test_split,
                                          const ModelConfig& base_model,
                                          const TrainConfig& base_train,
                                          const InferConfig& base_infer,
                                          const AttackConfig& attack_cfg, int sample_size,
                                          uint64_t seed, int jobs) {
  if (grid.sigma.empty() || grid.masks.empty() || grid.noise_layers.empty())
    throw std::invalid_argument("sweep_hyperparams: empty grid");

  std::vector<SweepPoint> points;
  for (double sigma : grid.sigma) {
    for (int masks : grid.masks) {
      for (int layers : grid.noise_layers) {
        ModelConfig model = base_model;
        model.noise_sites = default_noise_sites(model.n_blocks, layers);
        model.noise_sigma.assign(model.noise_sites.size(), sigma);
        TrainConfig train_cfg = base_train;
        train_cfg.masks_per_seq = masks;
        InferConfig infer_cfg = base_infer;
        infer_cfg.masks_per_seq = masks;
        infer_cfg.candidate_pool = 0;  // 2M default

        Parameters params = train_model(train_split, model, train_cfg, seed);
        VictimFactory victim = make_two_step_victim(params, model, infer_cfg, seed);
        CampaignResult res =
            run_campaign(victim, test_split, attack_cfg, sample_size, seed, jobs);

        SweepPoint point{sigma, masks, layers, res.summary.asr, res.summary.sacc};
        log_info("sweep: sigma=" + std::to_string(sigma) + " M=" + std::to_string(masks) +
                 " N_l=" + std::to_string(layers) + " ASR=" + std::to_string(point.asr) +
                 " SAcc=" + std::to_string(point.sacc));
        points.push_back(point);
      }
    }
  }
  return points;
}

std::string sweep_to_csv(const std::vector<SweepPoint>& points) {
  std::ostringstream out;
  out << "sigma,M,N_l,ASR,SAcc\n";
  for (const SweepPoint& p : points)
    out << p.sigma << ',' << p.masks << ',' << p.noise_layers << ',' << p.asr << ','
        << p.sacc << '\n';
  return out.str();
}

}  // namespace rsmi

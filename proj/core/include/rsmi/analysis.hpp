#pragma once

#include <string>
#include <vector>

#include "rsmi/attack.hpp"
#include "rsmi/defense.hpp"
#include "rsmi/metrics.hpp"

namespace rsmi {

// Re-derives every aggregate from the raw records; counters inside the
// records are not trusted beyond the per-record query field.
MetricsSummary summarize(const std::vector<AttackRecord>& records);

// L2 distance and cosine similarity of two pooled representations. Two zero
// vectors compare as identical (cosine 1).
void pair_divergence(const std::vector<double>& a, const std::vector<double>& b,
                     double* l2, double* cosine);

struct LayerDivergence {
  std::vector<int> layers;  // 0 = embedding site, then block outputs
  std::vector<double> l2;
  std::vector<double> cosine;
};

// Mean-pooled per-layer comparison of a clean/adversarial pair under shared
// noise draws, so divergence reflects the input change rather than the noise.
LayerDivergence latent_divergence(const Parameters& params, const ModelConfig& cfg,
                                  const std::vector<TokenId>& clean,
                                  const std::vector<TokenId>& adversarial, uint64_t seed);

struct StabilityResult {
  std::vector<double> per_run_accuracy;
  double mean = 0.0;
  double stddev = 0.0;
  double min_acc = 0.0;
  double max_acc = 0.0;
  double median = 0.0;
};

// Repeats full two-step inference over the examples with independent streams
// per (run, example).
StabilityResult stability_eval(const Parameters& params, const ModelConfig& model_cfg,
                               const InferConfig& infer_cfg,
                               const std::vector<LabeledExample>& examples, int runs,
                               uint64_t seed, int jobs = 1);

// Victim builders for campaigns. The plain victim is the undefended model
// (deterministic softmax probabilities); the two-step victim routes every
// probability query through the full sampling pipeline.
VictimFactory make_plain_victim(const Parameters& params, const ModelConfig& cfg);
VictimFactory make_two_step_victim(const Parameters& params, const ModelConfig& cfg,
                                   const InferConfig& infer_cfg, uint64_t seed);
// Gradient-guided masking without noise layers or sampling: deterministic
// top-M mask, deterministic prediction.
VictimFactory make_gm_victim(const Parameters& params, const ModelConfig& cfg, int masks);
// Random masking: probability mean over `variants` uniformly masked copies,
// noise layers disabled.
VictimFactory make_rm_victim(const Parameters& params, const ModelConfig& cfg, int masks,
                             int variants, uint64_t seed);

struct AblationRow {
  int mask_count = 0;
  std::vector<double> rm_asr;  // one entry per variant count
  double gm_asr = 0.0;
};

struct AblationTable {
  std::vector<int> variant_counts;
  std::vector<AblationRow> rows;
};

AblationTable ablate_rm_vs_gm(const Parameters& params, const ModelConfig& cfg,
                              const std::vector<LabeledExample>& dataset,
                              const AttackConfig& attack_cfg,
                              const std::vector<int>& mask_counts,
                              const std::vector<int>& variant_counts, int sample_size,
                              uint64_t seed, int jobs = 1);

std::string ablation_to_csv(const AblationTable& table);

struct SweepPoint {
  double sigma = 0.0;
  int masks = 0;
  int noise_layers = 0;
  double asr = 0.0;
  double sacc = 0.0;
};

struct SweepGrid {
  std::vector<double> sigma;
  std::vector<int> masks;
  std::vector<int> noise_layers;
};

// Trains one model per grid point from the same initialization seed, attacks
// it, and reports (sigma, M, N_l, ASR, SAcc) rows in grid order.
std::vector<SweepPoint> sweep_hyperparams(const SweepGrid& grid,
                                          const std::vector<LabeledExample>& train_split,
                                          const std::vector<LabeledExample>& test_split,
                                          const ModelConfig& base_model,
                                          const TrainConfig& base_train,
                                          const InferConfig& base_infer,
                                          const AttackConfig& attack_cfg, int sample_size,
                                          uint64_t seed, int jobs = 1);

std::string sweep_to_csv(const std::vector<SweepPoint>& points);

}  // namespace rsmi

#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "rsmi/dataset.hpp"
#include "rsmi/metrics.hpp"
#include "rsmi/vocab.hpp"

namespace rsmi {

using ProbFn = std::function<std::vector<double>(const std::vector<TokenId>&)>;

// Wraps a classifier's probability interface with exact query accounting.
// The counter increments exactly once per probability request and never
// resets, so per-phase counts reconstruct it.
struct VictimHandle {
  ProbFn prob_fn;
  int true_label = -1;
  long queries = 0;
  int original_prediction = -1;

  std::vector<double> query(const std::vector<TokenId>& tokens) {
    ++queries;
    return prob_fn(tokens);
  }
};

struct AttackConfig {
  enum class Strategy { kGreedyImportance, kSaliencyWeighted };
  Strategy strategy = Strategy::kGreedyImportance;
  const SynonymTable* synonyms = nullptr;
  int max_candidates = 8;
  long query_budget = 3000;
};

struct Substitution {
  int position = 0;
  TokenId old_id = 0;
  TokenId new_id = 0;
};

struct AttackRecord {
  std::vector<TokenId> original;
  std::vector<TokenId> perturbed;
  bool success = false;
  bool skipped = false;          // initially misclassified, never attacked
  bool budget_exhausted = false; // distinct from running out of candidates
  long queries = 0;
  long queries_ranking = 0;      // original probe + per-position probes
  long queries_candidates = 0;   // substitution trials
  long queries_commits = 0;      // accumulated-sequence checks (saliency-weighted)
  std::vector<Substitution> substitutions;
  int true_label = -1;
  int original_prediction = -1;
  int final_prediction = -1;
  uint64_t verify_seed = 0;      // stream identity for re-running stochastic victims
  uint64_t verify_stream = 0;
  long victim_forward_passes = 0;  // defended-model passes; 0 for plain victims
};

struct BudgetExhausted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Importance of each position: p_true(original) - p_true(UNK at position).
// Costs one query per position plus one for the original sequence. Raises
// BudgetExhausted once `budget` queries have been spent on this victim.
std::vector<double> importance_rank(VictimHandle& victim,
                                    const std::vector<TokenId>& tokens,
                                    long budget = std::numeric_limits<long>::max());

// Greedy descending-importance substitution attack.
AttackRecord greedy_attack(VictimHandle& victim, const std::vector<TokenId>& tokens,
                           const AttackConfig& cfg);

// Saliency-weighted attack: positions ordered by softmax(saliency) * best
// substitution gain, then substituted greedily in that order.
AttackRecord pwws_attack(VictimHandle& victim, const std::vector<TokenId>& tokens,
                         const AttackConfig& cfg);

AttackRecord run_attack(VictimHandle& victim, const std::vector<TokenId>& tokens,
                        const AttackConfig& cfg);

// One victim instantiation per attacked example. `example_index` selects the
// per-example random stream; `forward_passes`, when non-null, accumulates
// defended-model forward passes across queries.
struct VictimFactory {
  std::string name;
  bool stochastic = false;
  std::function<ProbFn(size_t example_index, long* forward_passes)> make;
};

struct CampaignResult {
  std::vector<AttackRecord> records;
  MetricsSummary summary;
  std::vector<size_t> sample_indices;
};

// Attacks a seeded sample of the dataset (min(sample_size, dataset size)
// examples) and aggregates the metrics. Examples run concurrently across
// `jobs` workers; results are deterministic given (seed, config).
CampaignResult run_campaign(const VictimFactory& victim,
                            const std::vector<LabeledExample>& dataset,
                            const AttackConfig& cfg, int sample_size, uint64_t seed,
                            int jobs = 1);

// JSON-lines serialization of attack records.
std::string record_to_json(const AttackRecord& record);
AttackRecord record_from_json(const std::string& line);

}  // namespace rsmi

#include "rsmi/attack.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "rsmi/analysis.hpp"
#include "rsmi/defense.hpp"
#include "rsmi/rng.hpp"

namespace rsmi {

namespace {

void check_budget(const VictimHandle& victim, long budget) {
  if (victim.queries >= budget)
    throw BudgetExhausted("query budget of " + std::to_string(budget) + " exhausted");
}

// Per-position UNK probes against an already-queried original.
std::vector<double> unk_probes(VictimHandle& victim, const std::vector<TokenId>& tokens,
                               double p_true_orig, long budget, long* probe_queries) {
  std::vector<double> importance(tokens.size(), 0.0);
  std::vector<TokenId> probe = tokens;
  for (size_t pos = 0; pos < tokens.size(); ++pos) {
    check_budget(victim, budget);
    probe[pos] = Vocabulary::kUnk;
    std::vector<double> p = victim.query(probe);
    if (probe_queries != nullptr) ++*probe_queries;
    importance[pos] = p_true_orig - p[static_cast<size_t>(victim.true_label)];
    probe[pos] = tokens[pos];
  }
  return importance;
}

std::vector<TokenId> candidates_for(const AttackConfig& cfg, TokenId token) {
  std::vector<TokenId> cands;
  if (cfg.synonyms != nullptr) cands = cfg.synonyms->lookup(token);
  if (static_cast<int>(cands.size()) > cfg.max_candidates)
    cands.resize(static_cast<size_t>(cfg.max_candidates));
  return cands;
}

AttackRecord make_base_record(const VictimHandle& victim,
                              const std::vector<TokenId>& tokens) {
  AttackRecord rec;
  rec.original = tokens;
  rec.perturbed = tokens;
  rec.true_label = victim.true_label;
  return rec;
}

}  // namespace

std::vector<double> importance_rank(VictimHandle& victim,
                                    const std::vector<TokenId>& tokens, long budget) {
  if (tokens.empty()) throw std::invalid_argument("importance_rank: empty sequence");
  check_budget(victim, budget);
  std::vector<double> orig = victim.query(tokens);
  return unk_probes(victim, tokens, orig[static_cast<size_t>(victim.true_label)], budget,
                    nullptr);
}

AttackRecord greedy_attack(VictimHandle& victim, const std::vector<TokenId>& tokens,
                           const AttackConfig& cfg) {
  if (tokens.empty()) throw std::invalid_argument("greedy_attack: empty sequence");
  AttackRecord rec = make_base_record(victim, tokens);
  long budget = cfg.query_budget;

  std::vector<double> orig_probs = victim.query(tokens);
  rec.queries_ranking = 1;
  rec.original_prediction = argmax_class(orig_probs);
  victim.original_prediction = rec.original_prediction;
  if (rec.original_prediction != victim.true_label) {
    rec.skipped = true;
    rec.final_prediction = rec.original_prediction;
    rec.queries = victim.queries;
    return rec;
  }

  double p_true = orig_probs[static_cast<size_t>(victim.true_label)];
  std::vector<double> importance;
  try {
    importance = unk_probes(victim, tokens, p_true, budget, &rec.queries_ranking);
  } catch (const BudgetExhausted&) {
    rec.budget_exhausted = true;
    rec.final_prediction = rec.original_prediction;
    rec.queries = victim.queries;
    return rec;
  }

  std::vector<int> order(tokens.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return importance[static_cast<size_t>(a)] > importance[static_cast<size_t>(b)];
  });

  std::vector<TokenId> current = tokens;
  rec.final_prediction = rec.original_prediction;
  for (int pos : order) {
    std::vector<TokenId> cands = candidates_for(cfg, current[static_cast<size_t>(pos)]);
    if (cands.empty()) continue;

    double best_drop = 0.0;
    TokenId best_cand = -1;
    double best_p_true = p_true;
    for (TokenId cand : cands) {
      try {
        check_budget(victim, budget);
      } catch (const BudgetExhausted&) {
        rec.budget_exhausted = true;
        rec.queries = victim.queries;
        return rec;
      }
      std::vector<TokenId> trial = current;
      trial[static_cast<size_t>(pos)] = cand;
      std::vector<double> p = victim.query(trial);
      ++rec.queries_candidates;
      int pred = argmax_class(p);
      if (pred != victim.true_label) {
        rec.substitutions.push_back({pos, tokens[static_cast<size_t>(pos)], cand});
        rec.perturbed = trial;
        rec.success = true;
        rec.final_prediction = pred;
        rec.queries = victim.queries;
        return rec;
      }
      double drop = p_true - p[static_cast<size_t>(victim.true_label)];
      if (drop > best_drop) {
        best_drop = drop;
        best_cand = cand;
        best_p_true = p[static_cast<size_t>(victim.true_label)];
      }
    }
    if (best_cand >= 0) {
      rec.substitutions.push_back({pos, tokens[static_cast<size_t>(pos)], best_cand});
      current[static_cast<size_t>(pos)] = best_cand;
      p_true = best_p_true;
      rec.perturbed = current;
    }
  }
  rec.queries = victim.queries;
  return rec;
}

AttackRecord pwws_attack(VictimHandle& victim, const std::vector<TokenId>& tokens,
                         const AttackConfig& cfg) {
  if (tokens.empty()) throw std::invalid_argument("pwws_attack: empty sequence");
  AttackRecord rec = make_base_record(victim, tokens);
  long budget = cfg.query_budget;

  std::vector<double> orig_probs = victim.query(tokens);
  rec.queries_ranking = 1;
  rec.original_prediction = argmax_class(orig_probs);
  victim.original_prediction = rec.original_prediction;
  if (rec.original_prediction != victim.true_label) {
    rec.skipped = true;
    rec.final_prediction = rec.original_prediction;
    rec.queries = victim.queries;
    return rec;
  }

  double p_true = orig_probs[static_cast<size_t>(victim.true_label)];
  std::vector<double> saliency;
  try {
    saliency = unk_probes(victim, tokens, p_true, budget, &rec.queries_ranking);
  } catch (const BudgetExhausted&) {
    rec.budget_exhausted = true;
    rec.final_prediction = rec.original_prediction;
    rec.queries = victim.queries;
    return rec;
  }

  // Best single-position substitution gains against the pristine input.
  std::vector<double> gain(tokens.size(), 0.0);
  std::vector<TokenId> best_cand(tokens.size(), -1);
  for (size_t pos = 0; pos < tokens.size(); ++pos) {
    for (TokenId cand : candidates_for(cfg, tokens[pos])) {
      try {
        check_budget(victim, budget);
      } catch (const BudgetExhausted&) {
        rec.budget_exhausted = true;
        rec.final_prediction = rec.original_prediction;
        rec.queries = victim.queries;
        return rec;
      }
      std::vector<TokenId> trial = tokens;
      trial[pos] = cand;
      std::vector<double> p = victim.query(trial);
      ++rec.queries_candidates;
      double drop = p_true - p[static_cast<size_t>(victim.true_label)];
      if (best_cand[pos] < 0 || drop > gain[pos]) {
        gain[pos] = drop;
        best_cand[pos] = cand;
      }
    }
  }

  // softmax over saliencies weights the substitution gains.
  double max_s = *std::max_element(saliency.begin(), saliency.end());
  std::vector<double> weight(tokens.size());
  double total = 0.0;
  for (size_t i = 0; i < tokens.size(); ++i) {
    weight[i] = std::exp(saliency[i] - max_s);
    total += weight[i];
  }
  std::vector<double> score(tokens.size());
  for (size_t i = 0; i < tokens.size(); ++i) score[i] = weight[i] / total * gain[i];

  std::vector<int> order(tokens.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return score[static_cast<size_t>(a)] > score[static_cast<size_t>(b)];
  });

  std::vector<TokenId> current = tokens;
  rec.final_prediction = rec.original_prediction;
  for (int pos : order) {
    if (best_cand[static_cast<size_t>(pos)] < 0) continue;
    try {
      check_budget(victim, budget);
    } catch (const BudgetExhausted&) {
      rec.budget_exhausted = true;
      rec.queries = victim.queries;
      return rec;
    }
    current[static_cast<size_t>(pos)] = best_cand[static_cast<size_t>(pos)];
    rec.substitutions.push_back(
        {pos, tokens[static_cast<size_t>(pos)], best_cand[static_cast<size_t>(pos)]});
    rec.perturbed = current;
    std::vector<double> p = victim.query(current);
    ++rec.queries_commits;
    int pred = argmax_class(p);
    if (pred != victim.true_label) {
      rec.success = true;
      rec.final_prediction = pred;
      rec.queries = victim.queries;
      return rec;
    }
  }
  rec.queries = victim.queries;
  return rec;
}

AttackRecord run_attack(VictimHandle& victim, const std::vector<TokenId>& tokens,
                        const AttackConfig& cfg) {
  return cfg.strategy == AttackConfig::Strategy::kGreedyImportance
             ? greedy_attack(victim, tokens, cfg)
             : pwws_attack(victim, tokens, cfg);
}

CampaignResult run_campaign(const VictimFactory& victim,
                            const std::vector<LabeledExample>& dataset,
                            const AttackConfig& cfg, int sample_size, uint64_t seed,
                            int jobs) {
  if (dataset.empty()) throw std::invalid_argument("run_campaign: empty dataset");
  int n = std::min<int>(sample_size, static_cast<int>(dataset.size()));

  // Seeded sample without replacement (partial Fisher-Yates).
  RngStream sample_rng(seed, 0xA77ACC);
  std::vector<size_t> indices(dataset.size());
  std::iota(indices.begin(), indices.end(), 0);
  for (int i = 0; i < n; ++i) {
    size_t j = static_cast<size_t>(i) +
               sample_rng.next_below(indices.size() - static_cast<size_t>(i));
    std::swap(indices[static_cast<size_t>(i)], indices[j]);
  }
  indices.resize(static_cast<size_t>(n));

  CampaignResult result;
  result.sample_indices = indices;
  result.records.resize(static_cast<size_t>(n));

  std::atomic<int> next{0};
  auto worker = [&] {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= n) return;
      const LabeledExample& ex = dataset[indices[static_cast<size_t>(i)]];
      long forward_passes = 0;
      VictimHandle handle;
      handle.true_label = ex.label;
      handle.prob_fn = victim.make(static_cast<size_t>(i), &forward_passes);
      AttackRecord rec = run_attack(handle, ex.tokens, cfg);
      rec.verify_seed = seed;
      rec.verify_stream = static_cast<uint64_t>(i);
      rec.victim_forward_passes = forward_passes;
      result.records[static_cast<size_t>(i)] = std::move(rec);
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

  result.summary = summarize(result.records);
  return result;
}

std::string record_to_json(const AttackRecord& r) {
  nlohmann::json subs = nlohmann::json::array();
  for (const Substitution& s : r.substitutions)
    subs.push_back({{"position", s.position}, {"old_id", s.old_id}, {"new_id", s.new_id}});
  nlohmann::json j{{"original", r.original},
                   {"perturbed", r.perturbed},
                   {"success", r.success},
                   {"skipped", r.skipped},
                   {"budget_exhausted", r.budget_exhausted},
                   {"queries", r.queries},
                   {"queries_ranking", r.queries_ranking},
                   {"queries_candidates", r.queries_candidates},
                   {"queries_commits", r.queries_commits},
                   {"substitutions", subs},
                   {"true_label", r.true_label},
                   {"original_prediction", r.original_prediction},
                   {"final_prediction", r.final_prediction},
                   {"verify_seed", r.verify_seed},
                   {"verify_stream", r.verify_stream},
                   {"victim_forward_passes", r.victim_forward_passes}};
  return j.dump();
}

AttackRecord record_from_json(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line);
  AttackRecord r;
  r.original = j.at("original").get<std::vector<TokenId>>();
  r.perturbed = j.at("perturbed").get<std::vector<TokenId>>();
  r.success = j.at("success").get<bool>();
  r.skipped = j.at("skipped").get<bool>();
  r.budget_exhausted = j.at("budget_exhausted").get<bool>();
  r.queries = j.at("queries").get<long>();
  r.queries_ranking = j.at("queries_ranking").get<long>();
  r.queries_candidates = j.at("queries_candidates").get<long>();
  r.queries_commits = j.at("queries_commits").get<long>();
  for (const auto& s : j.at("substitutions"))
    r.substitutions.push_back({s.at("position").get<int>(), s.at("old_id").get<TokenId>(),
                               s.at("new_id").get<TokenId>()});
  r.true_label = j.at("true_label").get<int>();
  r.original_prediction = j.at("original_prediction").get<int>();
  r.final_prediction = j.at("final_prediction").get<int>();
  r.verify_seed = j.at("verify_seed").get<uint64_t>();
  r.verify_stream = j.at("verify_stream").get<uint64_t>();
  r.victim_forward_passes = j.at("victim_forward_passes").get<long>();
  return r;
}

}  // namespace rsmi

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "rsmi/analysis.hpp"
#include "rsmi/attack.hpp"
#include "rsmi/dataset.hpp"

using namespace rsmi;

namespace {

// Two-class stub returning {p0, 1 - p0}.
ProbFn make_stub(std::function<double(const std::vector<TokenId>&)> p0) {
  return [p0](const std::vector<TokenId>& toks) {
    double p = p0(toks);
    return std::vector<double>{p, 1.0 - p};
  };
}

}  // namespace

TEST_CASE("importance_rank: input-blind victim scores zero everywhere") {
  VictimHandle victim;
  victim.true_label = 0;
  victim.prob_fn = make_stub([](const std::vector<TokenId>&) { return 0.8; });
  std::vector<TokenId> toks{5, 6, 7, 8};
  auto scores = importance_rank(victim, toks);
  CHECK(scores == std::vector<double>{0.0, 0.0, 0.0, 0.0});
  CHECK(victim.queries == 5);  // T + 1
}

TEST_CASE("importance_rank: position-keyed victim ranks that position first") {
  VictimHandle victim;
  victim.true_label = 0;
  victim.prob_fn = make_stub(
      [](const std::vector<TokenId>& t) { return t[2] == 7 ? 0.9 : 0.3; });
  auto scores = importance_rank(victim, {5, 6, 7, 8});
  int best = static_cast<int>(std::max_element(scores.begin(), scores.end()) -
                              scores.begin());
  CHECK(best == 2);
  CHECK(scores[2] == doctest::Approx(0.6));
}

TEST_CASE("importance_rank: budget exhaustion raises a partial-ranking error") {
  VictimHandle victim;
  victim.true_label = 0;
  victim.prob_fn = make_stub([](const std::vector<TokenId>&) { return 0.8; });
  CHECK_THROWS_AS(importance_rank(victim, {5, 6, 7, 8}, 3), BudgetExhausted);
  CHECK(victim.queries == 3);
}

TEST_CASE("greedy_attack: no candidates means failure after ranking only") {
  VictimHandle victim;
  victim.true_label = 0;
  victim.prob_fn = make_stub([](const std::vector<TokenId>&) { return 0.8; });
  SynonymTable empty;
  AttackConfig cfg;
  cfg.synonyms = &empty;
  AttackRecord rec = greedy_attack(victim, {5, 6, 7}, cfg);
  CHECK(!rec.success);
  CHECK(!rec.skipped);
  CHECK(rec.queries == 4);  // T + 1
  CHECK(rec.queries == rec.queries_ranking + rec.queries_candidates + rec.queries_commits);
  CHECK(rec.perturbed == rec.original);
}

TEST_CASE("greedy_attack: initially misclassified inputs are skipped at one query") {
  VictimHandle victim;
  victim.true_label = 1;
  victim.prob_fn = make_stub([](const std::vector<TokenId>&) { return 0.8; });
  SynonymTable empty;
  AttackConfig cfg;
  cfg.synonyms = &empty;
  AttackRecord rec = greedy_attack(victim, {5, 6, 7}, cfg);
  CHECK(rec.skipped);
  CHECK(rec.queries == 1);
  CHECK(rec.original_prediction == 0);
}

TEST_CASE("greedy_attack: finds the single flipping substitution") {
  // Position 1 carries the strongest evidence; candidate 12 there flips the
  // label, candidate 11 only dents the probability.
  auto p0_of = [](const std::vector<TokenId>& t) {
    double p = 0.9;
    if (t[0] != 5) p -= 0.05;
    if (t[1] == 1) p -= 0.5;         // UNK probe
    else if (t[1] == 11) p -= 0.35;
    else if (t[1] == 12) p -= 0.7;   // flips
    if (t[2] != 7) p -= 0.0;
    return p;
  };
  VictimHandle victim;
  victim.true_label = 0;
  victim.prob_fn = make_stub(p0_of);

  SynonymTable syn;
  syn.candidates[6] = {11, 12};
  AttackConfig cfg;
  cfg.synonyms = &syn;

  std::vector<TokenId> toks{5, 6, 7};
  AttackRecord rec = greedy_attack(victim, toks, cfg);
  CHECK(rec.success);
  REQUIRE(rec.substitutions.size() == 1);
  CHECK(rec.substitutions[0].position == 1);
  CHECK(rec.substitutions[0].new_id == 12);
  CHECK(rec.perturbed == std::vector<TokenId>{5, 12, 7});
  CHECK(rec.queries == victim.queries);
  CHECK(rec.queries == rec.queries_ranking + rec.queries_candidates + rec.queries_commits);

  // Brute force over all single substitutions confirms (1, 12) is the only flip.
  int flips = 0;
  for (size_t pos = 0; pos < toks.size(); ++pos) {
    for (TokenId cand : syn.lookup(toks[pos])) {
      std::vector<TokenId> trial = toks;
      trial[pos] = cand;
      if (p0_of(trial) < 0.5) {
        ++flips;
        CHECK(pos == 1);
        CHECK(cand == 12);
      }
    }
  }
  CHECK(flips == 1);
}

TEST_CASE("greedy_attack: query budget exhaustion is marked distinctly") {
  VictimHandle victim;
  victim.true_label = 0;
  victim.prob_fn = make_stub([](const std::vector<TokenId>&) { return 0.8; });
  SynonymTable syn;
  syn.candidates[5] = {11, 12};
  syn.candidates[6] = {11, 12};
  syn.candidates[7] = {11, 12};
  AttackConfig cfg;
  cfg.synonyms = &syn;
  cfg.query_budget = 5;
  AttackRecord rec = greedy_attack(victim, {5, 6, 7}, cfg);
  CHECK(!rec.success);
  CHECK(rec.budget_exhausted);
  CHECK(rec.queries == 5);
}

TEST_CASE("pwws_attack: single-position sequence reduces to candidate trials") {
  auto p0_of = [](const std::vector<TokenId>& t) {
    if (t[0] == 12) return 0.2;
    if (t[0] == 11) return 0.6;
    return 0.9;
  };
  VictimHandle victim;
  victim.true_label = 0;
  victim.prob_fn = make_stub(p0_of);
  SynonymTable syn;
  syn.candidates[5] = {11, 12};
  AttackConfig cfg;
  cfg.synonyms = &syn;
  AttackRecord rec = pwws_attack(victim, {5}, cfg);
  CHECK(rec.success);
  REQUIRE(rec.substitutions.size() == 1);
  CHECK(rec.substitutions[0].new_id == 12);
  CHECK(rec.queries == rec.queries_ranking + rec.queries_candidates + rec.queries_commits);
}

TEST_CASE("pwws_attack: order follows the weighted-gain score") {
  // Victim is additive over per-position deviations and never flips, so the
  // commit order is fully observable.
  std::vector<TokenId> toks{20, 21, 22, 23, 24};
  std::map<TokenId, double> unk_sal{{20, 0.02}, {21, 0.08}, {22, 0.01}, {23, 0.05}, {24, 0.03}};
  std::map<TokenId, double> cand_gain;  // candidate id -> drop
  SynonymTable syn;
  for (size_t i = 0; i < toks.size(); ++i) {
    TokenId a = 100 + static_cast<TokenId>(2 * i);
    TokenId b = 101 + static_cast<TokenId>(2 * i);
    syn.candidates[toks[i]] = {a, b};
  }
  cand_gain[100] = 0.010; cand_gain[101] = 0.030;  // pos 0 best 0.030
  cand_gain[102] = 0.020; cand_gain[103] = 0.005;  // pos 1 best 0.020
  cand_gain[104] = 0.060; cand_gain[105] = 0.001;  // pos 2 best 0.060
  cand_gain[106] = 0.004; cand_gain[107] = 0.002;  // pos 3 best 0.004
  cand_gain[108] = 0.025; cand_gain[109] = 0.026;  // pos 4 best 0.026

  auto p0_of = [&](const std::vector<TokenId>& t) {
    double p = 0.95;
    for (size_t i = 0; i < t.size(); ++i) {
      if (t[i] == toks[i]) continue;
      if (t[i] == 1) p -= unk_sal.at(toks[i]);
      else p -= cand_gain.at(t[i]);
    }
    return p;
  };
  VictimHandle victim;
  victim.true_label = 0;
  victim.prob_fn = make_stub(p0_of);
  AttackConfig cfg;
  cfg.synonyms = &syn;
  AttackRecord rec = pwws_attack(victim, toks, cfg);
  CHECK(!rec.success);
  REQUIRE(rec.substitutions.size() == 5);

  // Oracle: softmax over UNK saliencies times the best single-candidate drop.
  std::vector<double> sal{0.02, 0.08, 0.01, 0.05, 0.03};
  std::vector<double> best{0.030, 0.020, 0.060, 0.004, 0.026};
  double total = 0.0;
  std::vector<double> weight(5);
  for (int i = 0; i < 5; ++i) total += std::exp(sal[static_cast<size_t>(i)]);
  for (int i = 0; i < 5; ++i)
    weight[static_cast<size_t>(i)] = std::exp(sal[static_cast<size_t>(i)]) / total;
  std::vector<int> order{0, 1, 2, 3, 4};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return weight[static_cast<size_t>(a)] * best[static_cast<size_t>(a)] >
           weight[static_cast<size_t>(b)] * best[static_cast<size_t>(b)];
  });
  for (int i = 0; i < 5; ++i)
    CHECK(rec.substitutions[static_cast<size_t>(i)].position == order[static_cast<size_t>(i)]);
}

TEST_CASE("pwws_attack: uniform saliency defers entirely to substitution gains") {
  std::vector<TokenId> toks{20, 21, 22};
  SynonymTable syn;
  syn.candidates[20] = {100};
  syn.candidates[21] = {101};
  syn.candidates[22] = {102};
  auto p0_of = [&](const std::vector<TokenId>& t) {
    double p = 0.95;
    for (size_t i = 0; i < t.size(); ++i) {
      if (t[i] == 1) continue;  // UNK leaves the victim cold: uniform saliency
      if (t[i] == 100) p -= 0.01;
      if (t[i] == 101) p -= 0.05;
      if (t[i] == 102) p -= 0.03;
    }
    return p;
  };
  VictimHandle victim;
  victim.true_label = 0;
  victim.prob_fn = make_stub(p0_of);
  AttackConfig cfg;
  cfg.synonyms = &syn;
  AttackRecord rec = pwws_attack(victim, toks, cfg);
  REQUIRE(rec.substitutions.size() == 3);
  CHECK(rec.substitutions[0].position == 1);
  CHECK(rec.substitutions[1].position == 2);
  CHECK(rec.substitutions[2].position == 0);
}

TEST_CASE("attack records: substitution-only attacks preserve length") {
  SyntheticCorpus corpus = gen_synthetic(3, 40, 10, 80);
  VictimHandle victim;
  victim.true_label = corpus.test[0].label;
  victim.prob_fn = make_stub([](const std::vector<TokenId>&) { return 0.9; });
  AttackConfig cfg;
  cfg.synonyms = &corpus.synonyms;
  AttackRecord rec = victim.true_label == 0
                         ? greedy_attack(victim, corpus.test[0].tokens, cfg)
                         : pwws_attack(victim, corpus.test[0].tokens, cfg);
  CHECK(rec.perturbed.size() == rec.original.size());
  for (size_t i = 0; i < rec.original.size(); ++i) {
    bool listed = false;
    for (const auto& s : rec.substitutions)
      if (s.position == static_cast<int>(i)) listed = true;
    if (!listed) CHECK(rec.perturbed[i] == rec.original[i]);
  }
}

TEST_CASE("record JSON round trip") {
  AttackRecord rec;
  rec.original = {5, 6, 7};
  rec.perturbed = {5, 12, 7};
  rec.success = true;
  rec.queries = 6;
  rec.queries_ranking = 4;
  rec.queries_candidates = 2;
  rec.substitutions.push_back({1, 6, 12});
  rec.true_label = 0;
  rec.original_prediction = 0;
  rec.final_prediction = 1;
  rec.verify_seed = 42;
  rec.verify_stream = 7;
  AttackRecord back = record_from_json(record_to_json(rec));
  CHECK(back.original == rec.original);
  CHECK(back.perturbed == rec.perturbed);
  CHECK(back.success == rec.success);
  CHECK(back.queries == rec.queries);
  CHECK(back.substitutions.size() == 1);
  CHECK(back.substitutions[0].new_id == 12);
  CHECK(back.verify_seed == 42);
}

TEST_CASE("run_campaign: metric identities at the extremes") {
  SyntheticCorpus corpus = gen_synthetic(4, 60, 30, 80);

  // Immovable victim: predicts the true structure perfectly and never moves.
  VictimFactory stubborn;
  stubborn.name = "stubborn";
  stubborn.make = [&corpus](size_t, long*) -> ProbFn {
    return [&corpus](const std::vector<TokenId>& toks) {
      int kw0 = 0, kw1 = 0;
      for (TokenId t : toks) {
        const std::string& s = corpus.vocab.token(t);
        if (s.rfind("kw0", 0) == 0) ++kw0;
        if (s.rfind("kw1", 0) == 0) ++kw1;
      }
      double p0 = kw0 >= kw1 ? 0.95 : 0.05;
      return std::vector<double>{p0, 1.0 - p0};
    };
  };
  AttackConfig cfg;
  cfg.synonyms = &corpus.synonyms;
  cfg.max_candidates = 2;  // family synonyms only, traps out of reach
  CampaignResult res = run_campaign(stubborn, corpus.test, cfg, 30, 9, 1);
  CHECK(res.summary.n_total == 30);
  CHECK(res.summary.asr == 0.0);
  CHECK(res.summary.racc == res.summary.sacc);

  // Pushover victim: correct on the originals, flips on any substitution.
  VictimFactory pushover;
  pushover.name = "pushover";
  pushover.make = [&corpus](size_t, long*) -> ProbFn {
    std::vector<std::vector<TokenId>> originals;
    for (const auto& ex : corpus.test) originals.push_back(ex.tokens);
    return [&corpus, originals](const std::vector<TokenId>& toks) {
      bool is_original = false;
      for (const auto& o : originals)
        if (o == toks) is_original = true;
      int kw0 = 0, kw1 = 0;
      for (TokenId t : toks) {
        const std::string& s = corpus.vocab.token(t);
        if (s.rfind("kw0", 0) == 0) ++kw0;
        if (s.rfind("kw1", 0) == 0) ++kw1;
      }
      int label = kw0 >= kw1 ? 0 : 1;
      if (!is_original) label = 1 - label;  // any edit flips
      double p0 = label == 0 ? 0.95 : 0.05;
      return std::vector<double>{p0, 1.0 - p0};
    };
  };
  CampaignResult res2 = run_campaign(pushover, corpus.test, cfg, 30, 9, 1);
  CHECK(res2.summary.asr == 1.0);
  CHECK(res2.summary.n_fooled == res2.summary.n_attacked);
  CHECK(res2.summary.racc == 0.0);

  // Identities re-derived from raw records.
  long fooled = 0, attacked = 0, correct = 0;
  for (const auto& r : res2.records) {
    if (!r.skipped) {
      ++attacked;
      ++correct;
      if (r.success) ++fooled;
    }
    CHECK(r.queries == r.queries_ranking + r.queries_candidates + r.queries_commits);
  }
  CHECK(res2.summary.n_fooled == fooled);
  CHECK(res2.summary.n_attacked == attacked);
  CHECK(res2.summary.racc ==
        doctest::Approx(static_cast<double>(correct - fooled) / res2.summary.n_total));
}

TEST_CASE("run_campaign: deterministic across reruns and worker counts") {
  SyntheticCorpus corpus = gen_synthetic(6, 50, 25, 80);
  VictimFactory stub;
  stub.name = "stub";
  stub.make = [](size_t, long*) -> ProbFn {
    return [](const std::vector<TokenId>& toks) {
      double p0 = 0.6 + 0.3 * ((toks.size() + toks[0]) % 2);
      return std::vector<double>{p0, 1.0 - p0};
    };
  };
  AttackConfig cfg;
  cfg.synonyms = &corpus.synonyms;
  CampaignResult a = run_campaign(stub, corpus.test, cfg, 20, 5, 1);
  CampaignResult b = run_campaign(stub, corpus.test, cfg, 20, 5, 2);
  CHECK(a.sample_indices == b.sample_indices);
  REQUIRE(a.records.size() == b.records.size());
  for (size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].queries == b.records[i].queries);
    CHECK(a.records[i].perturbed == b.records[i].perturbed);
    CHECK(a.records[i].success == b.records[i].success);
  }
  CHECK(a.records.size() == 20);
}

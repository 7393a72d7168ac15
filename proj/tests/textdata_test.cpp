#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "oracles.hpp"
#include "rsmi/dataset.hpp"
#include "rsmi/vocab.hpp"

using namespace rsmi;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

Vocabulary tiny_vocab() {
  Vocabulary v;
  v.add("good");   // 3
  v.add("movie");  // 4
  v.add("bad");    // 5
  v.add("film");   // 6
  v.add("great");  // 7
  return v;
}

}  // namespace

TEST_CASE("tokenize: basic mapping, UNK fallback, truncation") {
  Vocabulary v = tiny_vocab();
  CHECK(tokenize("Good movie", v, 64) == std::vector<TokenId>{3, 4});
  CHECK(tokenize("good zzzz", v, 64) == std::vector<TokenId>{3, 1});
  CHECK(tokenize("good, movie!", v, 64) == std::vector<TokenId>{3, 4});

  std::string long_text;
  for (int i = 0; i < 300; ++i) long_text += "good ";
  auto ids = tokenize(long_text, v, 256);
  CHECK(ids.size() == 256);
  CHECK(ids.front() == 3);

  CHECK_THROWS_AS(tokenize("  ... !!", v, 64), std::invalid_argument);
}

TEST_CASE("tokenize o detokenize is identity on normalized text") {
  Vocabulary v = tiny_vocab();
  std::string text = "good movie bad film great";
  CHECK(detokenize(tokenize(text, v, 64), v) == text);
}

TEST_CASE("vocabulary: reserved layout and JSON round trip") {
  Vocabulary v = tiny_vocab();
  CHECK(v.lookup("<mask>") == Vocabulary::kMask);
  CHECK(Vocabulary::is_reserved(0));
  CHECK(!Vocabulary::is_reserved(3));

  std::string path = temp_path("rsmi_vocab_test.json");
  v.save_json(path);
  Vocabulary loaded = Vocabulary::load_json(path);
  CHECK(loaded.tokens() == v.tokens());
  CHECK(loaded.lookup("great") == v.lookup("great"));
  std::remove(path.c_str());
}

TEST_CASE("load_tsv: happy path and error lines") {
  Vocabulary v = tiny_vocab();
  std::string path = temp_path("rsmi_data_test.tsv");
  {
    std::ofstream out(path);
    out << "0\tbad film\n1\tgreat film\n";
  }
  TsvDataset data = load_tsv(path, v, 64);
  REQUIRE(data.examples.size() == 2);
  CHECK(data.examples[0].tokens == std::vector<TokenId>{5, 6});
  CHECK(data.examples[0].label == 0);
  CHECK(data.examples[1].label == 1);
  CHECK(data.class_histogram.at(0) == 1);
  CHECK(data.class_histogram.at(1) == 1);

  { std::ofstream out(path); }
  CHECK_THROWS_AS(load_tsv(path, v, 64), std::runtime_error);

  {
    std::ofstream out(path);
    out << "0\tbad film\n1 great film\n";
  }
  CHECK_THROWS_WITH_AS(load_tsv(path, v, 64), doctest::Contains("line 2"),
                       std::runtime_error);

  {
    std::ofstream out(path);
    out << "x\tbad film\n";
  }
  CHECK_THROWS_WITH_AS(load_tsv(path, v, 64), doctest::Contains("line 1"),
                       std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("apply_mask: substitution, identity, bounds") {
  std::vector<TokenId> toks{4, 5, 6};
  CHECK(apply_mask(toks, {1}) == std::vector<TokenId>{4, 2, 6});
  CHECK(toks == std::vector<TokenId>{4, 5, 6});  // input unchanged
  CHECK(apply_mask({4, 5}, {}) == std::vector<TokenId>{4, 5});
  CHECK_THROWS_AS(apply_mask({4, 5}, {5}), std::out_of_range);
  CHECK_THROWS_AS(apply_mask({4, 2}, {1}), std::invalid_argument);
}

TEST_CASE("synonym table: TSV round trip drops out-of-vocabulary entries") {
  Vocabulary v = tiny_vocab();
  std::string path = temp_path("rsmi_syn_test.tsv");
  {
    std::ofstream out(path);
    out << "good\tgreat,missing,bad\n";
    out << "ghost\tgood\n";
    out << "movie\tfilm,film\n";
  }
  int dropped = 0;
  SynonymTable table = SynonymTable::load_tsv(path, v, &dropped);
  CHECK(dropped == 2);  // "missing" synonym and "ghost" headword
  CHECK(table.lookup(v.lookup("good")) ==
        std::vector<TokenId>{v.lookup("great"), v.lookup("bad")});
  CHECK(table.lookup(v.lookup("movie")) == std::vector<TokenId>{v.lookup("film")});

  table.save_tsv(path, v);
  int dropped2 = -1;
  SynonymTable reload = SynonymTable::load_tsv(path, v, &dropped2);
  CHECK(dropped2 == 0);
  CHECK(reload.candidates == table.candidates);
  std::remove(path.c_str());
}

TEST_CASE("gen_synthetic: balance, determinism, body hygiene") {
  SyntheticCorpus corpus = gen_synthetic(1, 2000, 500, 200);
  CHECK(corpus.train.size() == 2000);
  CHECK(corpus.test.size() == 500);
  CHECK(corpus.vocab.size() == 200);

  int train_count[2] = {0, 0};
  for (const auto& ex : corpus.train) train_count[ex.label] += 1;
  CHECK(train_count[0] >= 999);
  CHECK(train_count[0] <= 1001);
  int test_count[2] = {0, 0};
  for (const auto& ex : corpus.test) test_count[ex.label] += 1;
  CHECK(test_count[0] >= 249);
  CHECK(test_count[0] <= 251);

  for (const auto& ex : corpus.train)
    for (TokenId t : ex.tokens) CHECK(!Vocabulary::is_reserved(t));

  SyntheticCorpus again = gen_synthetic(1, 2000, 500, 200);
  CHECK(again.vocab.tokens() == corpus.vocab.tokens());
  REQUIRE(again.train.size() == corpus.train.size());
  for (size_t i = 0; i < corpus.train.size(); ++i) {
    CHECK(again.train[i].tokens == corpus.train[i].tokens);
    CHECK(again.train[i].label == corpus.train[i].label);
  }

  SyntheticCorpus other = gen_synthetic(2, 100, 50, 200);
  CHECK(other.train[0].tokens != corpus.train[0].tokens);
}

TEST_CASE("gen_synthetic: synonym table invariants") {
  SyntheticCorpus corpus = gen_synthetic(5, 100, 50, 120);
  for (const auto& [id, syns] : corpus.synonyms.candidates) {
    std::set<TokenId> seen;
    for (TokenId s : syns) {
      CHECK(s != id);
      CHECK(s >= 3);
      CHECK(s < corpus.vocab.size());
      CHECK(seen.insert(s).second);  // deduplicated
    }
  }
}

TEST_CASE("gen_synthetic: corpus is learnable by a keyword-count oracle") {
  SyntheticCorpus corpus = gen_synthetic(1, 2000, 500, 200);
  std::vector<std::vector<TokenId>> seqs;
  std::vector<int> labels;
  for (const auto& ex : corpus.train) {
    seqs.push_back(ex.tokens);
    labels.push_back(ex.label);
  }
  oracle::BayesCounter bayes;
  bayes.fit(seqs, labels, 2, corpus.vocab.size());
  int correct = 0;
  for (const auto& ex : corpus.test)
    if (bayes.predict(ex.tokens) == ex.label) ++correct;
  CHECK(static_cast<double>(correct) / static_cast<double>(corpus.test.size()) >= 0.95);
}

TEST_CASE("gen_synthetic: rejects hosts that cannot fit keyword pools") {
  CHECK_THROWS_AS(gen_synthetic(1, 100, 50, 39), std::invalid_argument);
  CHECK_THROWS_AS(gen_synthetic(1, 1, 50, 200), std::invalid_argument);
}

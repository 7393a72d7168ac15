#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rsmi/rng.hpp"
#include "rsmi/vocab.hpp"

namespace rsmi {

struct LabeledExample {
  std::vector<TokenId> tokens;
  int label = 0;
};

// Directed substitution candidates per token id. Entries never list the key
// itself, are deduplicated, and refer only to in-vocabulary ids. Symmetry is
// not assumed.
struct SynonymTable {
  std::map<TokenId, std::vector<TokenId>> candidates;

  const std::vector<TokenId>& lookup(TokenId id) const;

  // TSV format: word<TAB>syn1,syn2,...  Synonyms missing from the vocabulary
  // are dropped; the drop count is reported through `dropped` when non-null.
  void save_tsv(const std::string& path, const Vocabulary& vocab) const;
  static SynonymTable load_tsv(const std::string& path, const Vocabulary& vocab,
                               int* dropped = nullptr);
};

// Lowercases, splits on any non-alphanumeric byte, maps through the
// vocabulary (unknowns become UNK) and truncates to max_len. Raises
// std::invalid_argument when nothing survives tokenization.
std::vector<TokenId> tokenize(const std::string& text, const Vocabulary& vocab,
                              int max_len);

// Inverse of tokenize on normalized in-vocabulary text: tokens joined by
// single spaces.
std::string detokenize(const std::vector<TokenId>& tokens, const Vocabulary& vocab);

struct TsvDataset {
  std::vector<LabeledExample> examples;
  std::map<int, int> class_histogram;
};

// One example per line, "label<TAB>text", labels 0-based integers. Malformed
// lines raise std::runtime_error citing the 1-based line number; an empty
// file is an error.
TsvDataset load_tsv(const std::string& path, const Vocabulary& vocab, int max_len);

// Copy of `tokens` with MASK written at each position. Out-of-range
// positions, or positions holding a reserved token, raise std::out_of_range /
// std::invalid_argument.
std::vector<TokenId> apply_mask(const std::vector<TokenId>& tokens,
                                const std::set<int>& positions);

struct SyntheticCorpus {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> test;
  Vocabulary vocab;
  SynonymTable synonyms;
};

// Deterministic keyword corpus: each class owns disjoint keyword families
// whose members are mutual synonyms, a few families also list opposite-class
// "trap" substitutes, and the rest of each sequence is shared filler. Classes
// are balanced within +/-1. Requires vocab_size >= 40 and enough room for at
// least two families per class.
SyntheticCorpus gen_synthetic(uint64_t seed, int n_train, int n_test,
                              int vocab_size, int class_count = 2);

}  // namespace rsmi

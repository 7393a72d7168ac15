#include "rsmi/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rsmi {

const std::vector<TokenId>& SynonymTable::lookup(TokenId id) const {
  static const std::vector<TokenId> kEmpty;
  auto it = candidates.find(id);
  return it == candidates.end() ? kEmpty : it->second;
}

void SynonymTable::save_tsv(const std::string& path, const Vocabulary& vocab) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("SynonymTable::save_tsv: cannot open " + path);
  for (const auto& [id, syns] : candidates) {
    if (syns.empty()) continue;
    out << vocab.token(id) << '\t';
    for (size_t i = 0; i < syns.size(); ++i) {
      if (i > 0) out << ',';
      out << vocab.token(syns[i]);
    }
    out << '\n';
  }
}

SynonymTable SynonymTable::load_tsv(const std::string& path, const Vocabulary& vocab,
                                    int* dropped) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("SynonymTable::load_tsv: cannot open " + path);
  SynonymTable table;
  int drop_count = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("SynonymTable::load_tsv: missing TAB at line " +
                               std::to_string(line_no));
    std::string word = line.substr(0, tab);
    if (!vocab.contains(word)) {
      ++drop_count;
      continue;
    }
    TokenId id = vocab.lookup(word);
    std::vector<TokenId>& syns = table.candidates[id];
    std::stringstream items(line.substr(tab + 1));
    std::string item;
    while (std::getline(items, item, ',')) {
      if (item.empty()) continue;
      if (!vocab.contains(item)) {
        ++drop_count;
        continue;
      }
      TokenId sid = vocab.lookup(item);
      if (sid == id) continue;
      if (std::find(syns.begin(), syns.end(), sid) == syns.end()) syns.push_back(sid);
    }
    if (syns.empty()) table.candidates.erase(id);
  }
  if (dropped != nullptr) *dropped = drop_count;
  return table;
}

std::vector<TokenId> tokenize(const std::string& text, const Vocabulary& vocab,
                              int max_len) {
  if (max_len < 1) throw std::invalid_argument("tokenize: max_len must be positive");
  std::vector<TokenId> out;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    if (static_cast<int>(out.size()) < max_len) out.push_back(vocab.lookup(word));
    word.clear();
  };
  for (unsigned char ch : text) {
    if (std::isalnum(ch)) {
      word.push_back(static_cast<char>(std::tolower(ch)));
    } else {
      flush();
    }
  }
  flush();
  if (out.empty()) throw std::invalid_argument("tokenize: no tokens survive normalization");
  return out;
}

std::string detokenize(const std::vector<TokenId>& tokens, const Vocabulary& vocab) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += vocab.token(tokens[i]);
  }
  return out;
}

TsvDataset load_tsv(const std::string& path, const Vocabulary& vocab, int max_len) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_tsv: cannot open " + path);
  TsvDataset data;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty())
      throw std::runtime_error("load_tsv: empty line " + std::to_string(line_no));
    size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("load_tsv: missing TAB at line " + std::to_string(line_no));
    std::string label_str = line.substr(0, tab);
    if (label_str.empty() ||
        !std::all_of(label_str.begin(), label_str.end(),
                     [](unsigned char c) { return std::isdigit(c); }))
      throw std::runtime_error("load_tsv: bad label '" + label_str + "' at line " +
                               std::to_string(line_no));
    LabeledExample ex;
    ex.label = std::stoi(label_str);
    try {
      ex.tokens = tokenize(line.substr(tab + 1), vocab, max_len);
    } catch (const std::invalid_argument&) {
      throw std::runtime_error("load_tsv: empty text at line " + std::to_string(line_no));
    }
    data.class_histogram[ex.label] += 1;
    data.examples.push_back(std::move(ex));
  }
  if (data.examples.empty()) throw std::runtime_error("load_tsv: no examples in " + path);
  return data;
}

std::vector<TokenId> apply_mask(const std::vector<TokenId>& tokens,
                                const std::set<int>& positions) {
  std::vector<TokenId> out = tokens;
  for (int pos : positions) {
    if (pos < 0 || pos >= static_cast<int>(tokens.size()))
      throw std::out_of_range("apply_mask: position " + std::to_string(pos) +
                              " out of range");
    if (Vocabulary::is_reserved(tokens[static_cast<size_t>(pos)]))
      throw std::invalid_argument("apply_mask: position " + std::to_string(pos) +
                                  " holds a reserved token");
    out[static_cast<size_t>(pos)] = Vocabulary::kMask;
  }
  return out;
}

namespace {

struct KeywordFamily {
  TokenId head = 0;
  std::vector<TokenId> members;  // head + synonyms, all of one class polarity
};

}  // namespace

SyntheticCorpus gen_synthetic(uint64_t seed, int n_train, int n_test,
                              int vocab_size, int class_count) {
  if (class_count < 2) throw std::invalid_argument("gen_synthetic: need >= 2 classes");
  if (vocab_size < 40) throw std::invalid_argument("gen_synthetic: vocab_size must be >= 40");
  if (n_train < class_count || n_test < class_count)
    throw std::invalid_argument("gen_synthetic: splits must cover every class");

  constexpr int kMinFillers = 10;
  int budget = vocab_size - 3 - kMinFillers;
  int families_per_class = std::min(6, budget / class_count / 4);
  if (families_per_class < 2)
    throw std::invalid_argument("gen_synthetic: vocabulary too small to host keyword pools");

  SyntheticCorpus corpus;
  RngStream vocab_rng(seed, 0);

  // Keyword families: one head plus 2..4 synonyms, all of the class's
  // polarity. Every member appears in corpus bodies so a model can learn it.
  std::vector<std::vector<KeywordFamily>> families(static_cast<size_t>(class_count));
  for (int c = 0; c < class_count; ++c) {
    for (int f = 0; f < families_per_class; ++f) {
      KeywordFamily fam;
      std::string stem = "kw" + std::to_string(c) + "x" + std::to_string(f);
      fam.head = corpus.vocab.add(stem);
      fam.members.push_back(fam.head);
      int syn_count = 2 + static_cast<int>(vocab_rng.next_below(3));
      for (int j = 0; j < syn_count; ++j)
        fam.members.push_back(corpus.vocab.add(stem + "s" + std::to_string(j)));
      families[static_cast<size_t>(c)].push_back(std::move(fam));
    }
  }
  std::vector<TokenId> fillers;
  for (int i = corpus.vocab.size(); i < vocab_size; ++i)
    fillers.push_back(corpus.vocab.add("w" + std::to_string(fillers.size())));

  // Synonym candidates: family members point at each other; every member
  // also carries one opposite-class trap so substitution attacks can flip
  // the evidence a token contributes.
  for (int c = 0; c < class_count; ++c) {
    int other = (c + 1) % class_count;
    for (int f = 0; f < families_per_class; ++f) {
      const KeywordFamily& fam = families[static_cast<size_t>(c)][static_cast<size_t>(f)];
      TokenId trap = families[static_cast<size_t>(other)][static_cast<size_t>(f)].head;
      for (TokenId member : fam.members) {
        std::vector<TokenId>& cands = corpus.synonyms.candidates[member];
        for (TokenId m : fam.members)
          if (m != member) cands.push_back(m);
        cands.push_back(trap);
      }
    }
  }

  auto make_split = [&](int n, uint64_t stream) {
    RngStream rng(seed, stream);
    std::vector<LabeledExample> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      LabeledExample ex;
      ex.label = i % class_count;
      int len = 10 + static_cast<int>(rng.next_below(9));
      int n_kw = 4 + static_cast<int>(rng.next_below(3));
      n_kw = std::min(n_kw, len);
      // Distinct keyword slots via partial Fisher-Yates.
      std::vector<int> slots(static_cast<size_t>(len));
      for (int p = 0; p < len; ++p) slots[static_cast<size_t>(p)] = p;
      for (int p = 0; p < n_kw; ++p) {
        int j = p + static_cast<int>(rng.next_below(static_cast<uint64_t>(len - p)));
        std::swap(slots[static_cast<size_t>(p)], slots[static_cast<size_t>(j)]);
      }
      std::vector<bool> is_kw(static_cast<size_t>(len), false);
      for (int p = 0; p < n_kw; ++p) is_kw[static_cast<size_t>(slots[static_cast<size_t>(p)])] = true;

      const auto& pool = families[static_cast<size_t>(ex.label)];
      ex.tokens.resize(static_cast<size_t>(len));
      for (int p = 0; p < len; ++p) {
        if (is_kw[static_cast<size_t>(p)]) {
          const KeywordFamily& fam = pool[rng.next_below(pool.size())];
          ex.tokens[static_cast<size_t>(p)] = fam.members[rng.next_below(fam.members.size())];
        } else {
          ex.tokens[static_cast<size_t>(p)] = fillers[rng.next_below(fillers.size())];
        }
      }
      // About a third of the examples carry one opposing-class token in a
      // filler slot. Mixed-polarity evidence keeps the corpus realistic: the
      // most loss-salient token is then frequently the contested one.
      if (len > n_kw && rng.next_below(3) == 0) {
        int slot;
        do {
          slot = static_cast<int>(rng.next_below(static_cast<uint64_t>(len)));
        } while (is_kw[static_cast<size_t>(slot)]);
        const auto& other = families[static_cast<size_t>((ex.label + 1) % class_count)];
        const KeywordFamily& fam = other[rng.next_below(other.size())];
        ex.tokens[static_cast<size_t>(slot)] = fam.members[rng.next_below(fam.members.size())];
      }
      out.push_back(std::move(ex));
    }
    return out;
  };

  corpus.train = make_split(n_train, 1);
  corpus.test = make_split(n_test, 2);
  return corpus;
}

}  // namespace rsmi

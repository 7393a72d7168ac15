#include "rsmi/vocab.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace rsmi {

Vocabulary::Vocabulary() {
  id_to_token_ = {"<pad>", "<unk>", "<mask>"};
  for (TokenId id = 0; id < 3; ++id) token_to_id_[id_to_token_[static_cast<size_t>(id)]] = id;
}

TokenId Vocabulary::add(const std::string& token) {
  auto it = token_to_id_.find(token);
  if (it != token_to_id_.end()) return it->second;
  TokenId id = static_cast<TokenId>(id_to_token_.size());
  id_to_token_.push_back(token);
  token_to_id_[token] = id;
  return id;
}

TokenId Vocabulary::lookup(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return token_to_id_.count(token) > 0;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("Vocabulary::token: id out of range");
  return id_to_token_[static_cast<size_t>(id)];
}

void Vocabulary::save_json(const std::string& path) const {
  nlohmann::json j;
  j["tokens"] = id_to_token_;
  j["reserved"] = {{"pad", kPad}, {"unk", kUnk}, {"mask", kMask}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("Vocabulary::save_json: cannot open " + path);
  out << j.dump(2) << "\n";
}

Vocabulary Vocabulary::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("Vocabulary::load_json: cannot open " + path);
  nlohmann::json j;
  in >> j;
  if (!j.contains("tokens") || !j.contains("reserved"))
    throw std::runtime_error("Vocabulary::load_json: missing tokens/reserved in " + path);
  const auto& reserved = j["reserved"];
  if (reserved.value("pad", -1) != kPad || reserved.value("unk", -1) != kUnk ||
      reserved.value("mask", -1) != kMask)
    throw std::runtime_error("Vocabulary::load_json: unexpected reserved id layout");

  Vocabulary vocab;
  const auto& tokens = j["tokens"];
  for (size_t i = 0; i < tokens.size(); ++i) {
    std::string tok = tokens[i].get<std::string>();
    if (i < 3) {
      if (tok != vocab.id_to_token_[i])
        throw std::runtime_error("Vocabulary::load_json: reserved token mismatch at id " +
                                 std::to_string(i));
      continue;
    }
    TokenId id = vocab.add(tok);
    if (id != static_cast<TokenId>(i))
      throw std::runtime_error("Vocabulary::load_json: duplicate token '" + tok + "'");
  }
  return vocab;
}

}  // namespace rsmi

#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace rsmi {

using TokenId = int32_t;

// Token table with three fixed reserved ids. The reserved surface forms
// occupy slots 0..2 and are never reassigned; all other entries are bijective
// with their surface strings.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kMask = 2;

  Vocabulary();

  // Adds a token (no-op if present) and returns its id.
  TokenId add(const std::string& token);
  // Returns the id of `token`, or kUnk if absent.
  TokenId lookup(const std::string& token) const;
  bool contains(const std::string& token) const;
  const std::string& token(TokenId id) const;

  int32_t size() const { return static_cast<int32_t>(id_to_token_.size()); }
  static bool is_reserved(TokenId id) { return id >= 0 && id <= 2; }

  // JSON file format: {"tokens": [...all tokens in id order...],
  //                    "reserved": {"pad": 0, "unk": 1, "mask": 2}}
  void save_json(const std::string& path) const;
  static Vocabulary load_json(const std::string& path);

  const std::vector<std::string>& tokens() const { return id_to_token_; }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
};

}  // namespace rsmi

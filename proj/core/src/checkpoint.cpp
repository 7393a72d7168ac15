#include "rsmi/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

namespace rsmi {

namespace {

constexpr char kMagic[6] = {'R', 'S', 'M', 'I', '1', '\n'};

nlohmann::json config_json(const ModelConfig& cfg) {
  return nlohmann::json{{"vocab_size", cfg.vocab_size},
                        {"d_model", cfg.d_model},
                        {"n_blocks", cfg.n_blocks},
                        {"n_classes", cfg.n_classes},
                        {"max_len", cfg.max_len},
                        {"noise_sites", cfg.noise_sites},
                        {"noise_sigma", cfg.noise_sigma},
                        {"attention_enabled", cfg.attention_enabled},
                        {"feedforward_enabled", cfg.feedforward_enabled}};
}

ModelConfig config_from(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.vocab_size = j.at("vocab_size").get<int32_t>();
  cfg.d_model = j.at("d_model").get<int>();
  cfg.n_blocks = j.at("n_blocks").get<int>();
  cfg.n_classes = j.at("n_classes").get<int>();
  cfg.max_len = j.at("max_len").get<int>();
  cfg.noise_sites = j.at("noise_sites").get<std::vector<int>>();
  cfg.noise_sigma = j.at("noise_sigma").get<std::vector<double>>();
  cfg.attention_enabled = j.at("attention_enabled").get<bool>();
  cfg.feedforward_enabled = j.at("feedforward_enabled").get<bool>();
  return cfg;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) { return config_json(cfg).dump(); }

ModelConfig model_config_from_json(const std::string& json_text) {
  return config_from(nlohmann::json::parse(json_text));
}

void checkpoint_save(const std::string& path, const Parameters& params,
                     const ModelConfig& cfg) {
  nlohmann::json meta;
  meta["config"] = config_json(cfg);
  meta["arrays"] = nlohmann::json::array();
  for_each_array(params, [&](const std::string& name, const Mat& m) {
    meta["arrays"].push_back({{"name", name}, {"shape", {m.rows, m.cols}}});
  });
  std::string meta_str = meta.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError(CheckpointError::Kind::kIo, "cannot open " + path);
  out.write(kMagic, sizeof(kMagic));
  uint32_t meta_len = static_cast<uint32_t>(meta_str.size());
  char len_bytes[4];
  for (int i = 0; i < 4; ++i) len_bytes[i] = static_cast<char>((meta_len >> (8 * i)) & 0xFF);
  out.write(len_bytes, 4);
  out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
  for_each_array(params, [&](const std::string&, const Mat& m) {
    std::vector<float> buf(m.a.size());
    for (size_t i = 0; i < m.a.size(); ++i) buf[i] = static_cast<float>(m.a[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  });
  if (!out) throw CheckpointError(CheckpointError::Kind::kIo, "write failed for " + path);
}

Checkpoint checkpoint_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::kIo, "cannot open " + path);

  char magic[6];
  in.read(magic, sizeof(magic));
  if (in.gcount() != sizeof(magic) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError(CheckpointError::Kind::kBadMagic, "bad magic in " + path);

  char len_bytes[4];
  in.read(len_bytes, 4);
  if (in.gcount() != 4)
    throw CheckpointError(CheckpointError::Kind::kTruncated, "truncated header in " + path);
  uint32_t meta_len = 0;
  for (int i = 0; i < 4; ++i)
    meta_len |= static_cast<uint32_t>(static_cast<unsigned char>(len_bytes[i])) << (8 * i);

  std::string meta_str(meta_len, '\0');
  in.read(meta_str.data(), meta_len);
  if (in.gcount() != static_cast<std::streamsize>(meta_len))
    throw CheckpointError(CheckpointError::Kind::kTruncated, "truncated metadata in " + path);

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_str);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::kBadMetadata,
                          std::string("bad metadata: ") + e.what());
  }

  Checkpoint ckpt;
  try {
    ckpt.config = config_from(meta.at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::kBadMetadata,
                          std::string("bad config block: ") + e.what());
  }
  ckpt.params = zeros_like(ckpt.config);

  size_t idx = 0;
  const auto& arrays = meta.at("arrays");
  for_each_array(ckpt.params, [&](const std::string& name, Mat& m) {
    if (idx >= arrays.size())
      throw CheckpointError(CheckpointError::Kind::kShapeMismatch,
                            "missing array entry for " + name);
    const auto& entry = arrays[idx++];
    if (entry.at("name").get<std::string>() != name)
      throw CheckpointError(CheckpointError::Kind::kShapeMismatch,
                            "unexpected array order at " + name);
    auto shape = entry.at("shape").get<std::vector<int>>();
    if (shape.size() != 2 || shape[0] != m.rows || shape[1] != m.cols)
      throw CheckpointError(CheckpointError::Kind::kShapeMismatch,
                            "shape mismatch for " + name);
    std::vector<float> buf(m.a.size());
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(buf.size() * sizeof(float)))
      throw CheckpointError(CheckpointError::Kind::kTruncated,
                            "truncated payload at " + name);
    for (size_t i = 0; i < buf.size(); ++i) m.a[i] = static_cast<double>(buf[i]);
  });
  if (idx != arrays.size())
    throw CheckpointError(CheckpointError::Kind::kShapeMismatch,
                          "checkpoint lists extra arrays");
  return ckpt;
}

}  // namespace rsmi

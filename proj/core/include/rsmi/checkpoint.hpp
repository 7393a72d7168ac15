#pragma once

#include <stdexcept>
#include <string>

#include "rsmi/model.hpp"

namespace rsmi {

// File layout: magic "RSMI1\n", uint32 little-endian metadata length, JSON
// metadata (config plus named array shapes in order), then raw little-endian
// float32 array payloads concatenated in metadata order.
struct CheckpointError : std::runtime_error {
  enum class Kind { kBadMagic, kBadMetadata, kShapeMismatch, kTruncated, kIo };
  Kind kind;
  CheckpointError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

void checkpoint_save(const std::string& path, const Parameters& params,
                     const ModelConfig& cfg);

struct Checkpoint {
  Parameters params;
  ModelConfig config;
};

Checkpoint checkpoint_load(const std::string& path);

// JSON <-> config used by the checkpoint metadata and the CLI's resolved
// config echo.
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& json_text);

}  // namespace rsmi

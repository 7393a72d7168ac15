#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rsmi/attack.hpp"
#include "rsmi/dataset.hpp"
#include "rsmi/defense.hpp"
#include "rsmi/model.hpp"

// Configuration layer of the command-line tool: a strict JSON schema (unknown
// keys are rejected by name), fully materialized defaults, and a resolved-
// config echo written into every output directory.

namespace rsmi::cli {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SyntheticSpec {
  int n_train = 2000;
  int n_test = 500;
  int vocab_size = 200;
  int classes = 2;
};

struct DataSpec {
  bool synthetic = true;
  SyntheticSpec synth;
  std::string train_tsv;
  std::string test_tsv;
  std::string vocab_json;
  std::string synonyms_tsv;
};

struct AttackSpec {
  std::string strategy = "greedy-importance";  // or "saliency-weighted"
  std::string victim = "rsmi";                 // or "baseline"
  int max_candidates = 8;
  long budget = 3000;
  int sample = 500;
};

struct AblateSpec {
  std::vector<int> masks{1, 2, 3, 4, 5};
  std::vector<int> variants{1, 5, 10, 50};
  int sample = 100;
};

struct SweepSpec {
  std::vector<double> sigma{0.1, 0.2, 0.4};
  std::vector<int> masks{2};
  std::vector<int> noise_layers{3};
  int sample = 100;
};

struct StabilitySpec {
  int runs = 100;
  int sample = 200;
};

struct RunConfig {
  uint64_t seed = 1;

  // model section; vocab_size and n_classes may stay 0 until the data is known
  int d_model = 32;
  int n_blocks = 3;
  int n_classes = 0;
  int max_len = 64;
  int n_noise_layers = 3;
  std::vector<int> noise_sites;     // explicit override of the default layout
  std::vector<double> noise_sigma;  // resolved per-site stds
  double sigma_scalar = 0.2;

  TrainConfig train;
  InferConfig infer;
  AttackSpec attack;
  DataSpec data;
  AblateSpec ablate;
  SweepSpec sweep;
  StabilitySpec stability;
};

RunConfig load_run_config(const std::string& path);
RunConfig default_run_config();

// Model config for a concrete vocabulary/classes pair.
ModelConfig materialize_model(const RunConfig& cfg, int vocab_size, int n_classes);

// The fully resolved configuration as canonical JSON.
std::string resolved_config_json(const RunConfig& cfg);

struct LoadedData {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> test;
  Vocabulary vocab;
  SynonymTable synonyms;
  int n_classes = 2;
};

LoadedData load_data(const RunConfig& cfg);

AttackConfig::Strategy parse_strategy(const std::string& name);
InferMode parse_mode(const std::string& name);

}  // namespace rsmi::cli

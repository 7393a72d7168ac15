#include "run_config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

namespace rsmi::cli {

namespace {

using nlohmann::json;

void require_keys(const json& obj, const std::string& section,
                  const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (allowed.count(key) == 0)
      throw ConfigError("unknown key \"" + key + "\" in section \"" + section + "\"");
  }
}

template <typename T>
void read(const json& obj, const char* key, T* out) {
  if (obj.contains(key)) *out = obj.at(key).get<T>();
}

}  // namespace

RunConfig default_run_config() { return RunConfig{}; }

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  RunConfig cfg;
  require_keys(j, "(root)",
               {"seed", "model", "train", "infer", "attack", "data", "ablate", "sweep",
                "stability"});
  read(j, "seed", &cfg.seed);

  if (j.contains("model")) {
    const json& m = j.at("model");
    require_keys(m, "model",
                 {"d_model", "n_blocks", "n_classes", "max_len", "n_noise_layers",
                  "noise_sites", "sigma"});
    read(m, "d_model", &cfg.d_model);
    read(m, "n_blocks", &cfg.n_blocks);
    read(m, "n_classes", &cfg.n_classes);
    read(m, "max_len", &cfg.max_len);
    read(m, "n_noise_layers", &cfg.n_noise_layers);
    read(m, "noise_sites", &cfg.noise_sites);
    if (m.contains("sigma")) {
      if (m.at("sigma").is_array())
        cfg.noise_sigma = m.at("sigma").get<std::vector<double>>();
      else
        cfg.sigma_scalar = m.at("sigma").get<double>();
    }
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    require_keys(t, "train",
                 {"M", "nu", "beta", "normalize_grad", "lr", "weight_decay", "epochs",
                  "batch"});
    read(t, "M", &cfg.train.masks_per_seq);
    read(t, "nu", &cfg.train.mc_samples);
    read(t, "beta", &cfg.train.grad_scale);
    read(t, "normalize_grad", &cfg.train.normalize_grad);
    read(t, "lr", &cfg.train.lr);
    read(t, "weight_decay", &cfg.train.weight_decay);
    read(t, "epochs", &cfg.train.epochs);
    read(t, "batch", &cfg.train.batch_size);
    cfg.infer.masks_per_seq = cfg.train.masks_per_seq;
  }

  if (j.contains("infer")) {
    const json& i = j.at("infer");
    require_keys(i, "infer", {"M", "N", "k0", "k1", "alpha", "nu", "mode"});
    read(i, "M", &cfg.infer.masks_per_seq);
    read(i, "N", &cfg.infer.candidate_pool);
    read(i, "k0", &cfg.infer.first_votes);
    read(i, "k1", &cfg.infer.second_votes);
    read(i, "alpha", &cfg.infer.alpha);
    read(i, "nu", &cfg.infer.mc_samples);
    if (i.contains("mode")) cfg.infer.mode = parse_mode(i.at("mode").get<std::string>());
  }

  if (j.contains("attack")) {
    const json& a = j.at("attack");
    require_keys(a, "attack", {"strategy", "victim", "max_candidates", "budget", "sample"});
    read(a, "strategy", &cfg.attack.strategy);
    read(a, "victim", &cfg.attack.victim);
    read(a, "max_candidates", &cfg.attack.max_candidates);
    read(a, "budget", &cfg.attack.budget);
    read(a, "sample", &cfg.attack.sample);
    parse_strategy(cfg.attack.strategy);
    if (cfg.attack.victim != "rsmi" && cfg.attack.victim != "baseline")
      throw ConfigError("attack.victim must be \"rsmi\" or \"baseline\"");
  }

  if (j.contains("data")) {
    const json& d = j.at("data");
    require_keys(d, "data",
                 {"synthetic", "train_tsv", "test_tsv", "vocab_json", "synonyms_tsv"});
    if (d.contains("synthetic")) {
      const json& s = d.at("synthetic");
      require_keys(s, "data.synthetic", {"n_train", "n_test", "vocab_size", "classes"});
      cfg.data.synthetic = true;
      read(s, "n_train", &cfg.data.synth.n_train);
      read(s, "n_test", &cfg.data.synth.n_test);
      read(s, "vocab_size", &cfg.data.synth.vocab_size);
      read(s, "classes", &cfg.data.synth.classes);
    } else {
      cfg.data.synthetic = false;
      read(d, "train_tsv", &cfg.data.train_tsv);
      read(d, "test_tsv", &cfg.data.test_tsv);
      read(d, "vocab_json", &cfg.data.vocab_json);
      read(d, "synonyms_tsv", &cfg.data.synonyms_tsv);
      if (cfg.data.test_tsv.empty() || cfg.data.vocab_json.empty())
        throw ConfigError("data section needs test_tsv and vocab_json (or a synthetic block)");
    }
  }

  if (j.contains("ablate")) {
    const json& a = j.at("ablate");
    require_keys(a, "ablate", {"masks", "variants", "sample"});
    read(a, "masks", &cfg.ablate.masks);
    read(a, "variants", &cfg.ablate.variants);
    read(a, "sample", &cfg.ablate.sample);
  }

  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    require_keys(s, "sweep", {"sigma", "masks", "n_noise_layers", "sample"});
    read(s, "sigma", &cfg.sweep.sigma);
    read(s, "masks", &cfg.sweep.masks);
    read(s, "n_noise_layers", &cfg.sweep.noise_layers);
    read(s, "sample", &cfg.sweep.sample);
  }

  if (j.contains("stability")) {
    const json& s = j.at("stability");
    require_keys(s, "stability", {"runs", "sample"});
    read(s, "runs", &cfg.stability.runs);
    read(s, "sample", &cfg.stability.sample);
  }

  return cfg;
}

ModelConfig materialize_model(const RunConfig& cfg, int vocab_size, int n_classes) {
  ModelConfig model;
  model.vocab_size = vocab_size;
  model.d_model = cfg.d_model;
  model.n_blocks = cfg.n_blocks;
  model.n_classes = cfg.n_classes > 0 ? cfg.n_classes : n_classes;
  model.max_len = cfg.max_len;
  model.noise_sites = cfg.noise_sites.empty()
                          ? default_noise_sites(cfg.n_blocks, cfg.n_noise_layers)
                          : cfg.noise_sites;
  if (!cfg.noise_sigma.empty()) {
    if (cfg.noise_sigma.size() != model.noise_sites.size())
      throw ConfigError("model.sigma array must match the number of noise sites");
    model.noise_sigma = cfg.noise_sigma;
  } else {
    model.noise_sigma.assign(model.noise_sites.size(), cfg.sigma_scalar);
  }
  model.validate();
  return model;
}

std::string resolved_config_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["model"] = {{"d_model", cfg.d_model},
                {"n_blocks", cfg.n_blocks},
                {"n_classes", cfg.n_classes},
                {"max_len", cfg.max_len},
                {"n_noise_layers", cfg.n_noise_layers},
                {"noise_sites", cfg.noise_sites.empty()
                                    ? default_noise_sites(cfg.n_blocks, cfg.n_noise_layers)
                                    : cfg.noise_sites},
                {"sigma", cfg.noise_sigma.empty() ? json(cfg.sigma_scalar)
                                                  : json(cfg.noise_sigma)}};
  j["train"] = {{"M", cfg.train.masks_per_seq},
                {"nu", cfg.train.mc_samples},
                {"beta", cfg.train.grad_scale},
                {"normalize_grad", cfg.train.normalize_grad},
                {"lr", cfg.train.lr},
                {"weight_decay", cfg.train.weight_decay},
                {"epochs", cfg.train.epochs},
                {"batch", cfg.train.batch_size}};
  j["infer"] = {{"M", cfg.infer.masks_per_seq},
                {"N", cfg.infer.pool_size()},
                {"k0", cfg.infer.first_votes},
                {"k1", cfg.infer.second_votes},
                {"alpha", cfg.infer.alpha},
                {"nu", cfg.infer.mc_samples},
                {"mode", cfg.infer.mode == InferMode::kLogitAverage ? "logit-average"
                                                                    : "majority-vote"}};
  j["attack"] = {{"strategy", cfg.attack.strategy},
                 {"victim", cfg.attack.victim},
                 {"max_candidates", cfg.attack.max_candidates},
                 {"budget", cfg.attack.budget},
                 {"sample", cfg.attack.sample}};
  if (cfg.data.synthetic) {
    j["data"] = {{"synthetic",
                  {{"n_train", cfg.data.synth.n_train},
                   {"n_test", cfg.data.synth.n_test},
                   {"vocab_size", cfg.data.synth.vocab_size},
                   {"classes", cfg.data.synth.classes}}}};
  } else {
    j["data"] = {{"train_tsv", cfg.data.train_tsv},
                 {"test_tsv", cfg.data.test_tsv},
                 {"vocab_json", cfg.data.vocab_json},
                 {"synonyms_tsv", cfg.data.synonyms_tsv}};
  }
  j["ablate"] = {{"masks", cfg.ablate.masks},
                 {"variants", cfg.ablate.variants},
                 {"sample", cfg.ablate.sample}};
  j["sweep"] = {{"sigma", cfg.sweep.sigma},
                {"masks", cfg.sweep.masks},
                {"n_noise_layers", cfg.sweep.noise_layers},
                {"sample", cfg.sweep.sample}};
  j["stability"] = {{"runs", cfg.stability.runs}, {"sample", cfg.stability.sample}};
  return j.dump(2) + "\n";
}

LoadedData load_data(const RunConfig& cfg) {
  LoadedData data;
  if (cfg.data.synthetic) {
    SyntheticCorpus corpus =
        gen_synthetic(cfg.seed, cfg.data.synth.n_train, cfg.data.synth.n_test,
                      cfg.data.synth.vocab_size, cfg.data.synth.classes);
    data.train = std::move(corpus.train);
    data.test = std::move(corpus.test);
    data.vocab = std::move(corpus.vocab);
    data.synonyms = std::move(corpus.synonyms);
    data.n_classes = cfg.data.synth.classes;
    return data;
  }
  data.vocab = Vocabulary::load_json(cfg.data.vocab_json);
  if (!cfg.data.train_tsv.empty()) {
    TsvDataset train = load_tsv(cfg.data.train_tsv, data.vocab, cfg.max_len);
    data.train = std::move(train.examples);
  }
  TsvDataset test = load_tsv(cfg.data.test_tsv, data.vocab, cfg.max_len);
  data.test = std::move(test.examples);
  if (!cfg.data.synonyms_tsv.empty())
    data.synonyms = SynonymTable::load_tsv(cfg.data.synonyms_tsv, data.vocab);
  int max_label = 0;
  for (const auto& ex : data.train) max_label = std::max(max_label, ex.label);
  for (const auto& ex : data.test) max_label = std::max(max_label, ex.label);
  data.n_classes = max_label + 1;
  return data;
}

AttackConfig::Strategy parse_strategy(const std::string& name) {
  if (name == "greedy-importance") return AttackConfig::Strategy::kGreedyImportance;
  if (name == "saliency-weighted") return AttackConfig::Strategy::kSaliencyWeighted;
  throw ConfigError("unknown attack.strategy \"" + name +
                    "\" (expected greedy-importance or saliency-weighted)");
}

InferMode parse_mode(const std::string& name) {
  if (name == "logit-average") return InferMode::kLogitAverage;
  if (name == "majority-vote") return InferMode::kMajorityVote;
  throw ConfigError("unknown infer.mode \"" + name +
                    "\" (expected logit-average or majority-vote)");
}

}  // namespace rsmi::cli

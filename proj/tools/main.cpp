#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <json.hpp>

#include "rsmi/analysis.hpp"
#include "rsmi/attack.hpp"
#include "rsmi/certify.hpp"
#include "rsmi/checkpoint.hpp"
#include "rsmi/dataset.hpp"
#include "rsmi/defense.hpp"
#include "rsmi/log.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace rsmi;
using cli::ConfigError;
using cli::RunConfig;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct GlobalArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<uint64_t> seed;
  int jobs = 1;
};

RunConfig resolve_config(const GlobalArgs& args) {
  RunConfig cfg = args.config_path.empty() ? cli::default_run_config()
                                           : cli::load_run_config(args.config_path);
  if (args.seed) cfg.seed = *args.seed;
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void echo_config(const RunConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  write_text(out_dir / "resolved_config.json", cli::resolved_config_json(cfg));
}

Checkpoint load_compatible_checkpoint(const std::string& path, const cli::LoadedData& data) {
  Checkpoint ckpt = checkpoint_load(path);
  if (ckpt.config.vocab_size != data.vocab.size())
    throw std::runtime_error("checkpoint vocabulary size " +
                             std::to_string(ckpt.config.vocab_size) +
                             " does not match the data vocabulary (" +
                             std::to_string(data.vocab.size()) + ")");
  return ckpt;
}

AttackConfig make_attack_config(const RunConfig& cfg, const SynonymTable& synonyms) {
  AttackConfig attack;
  attack.strategy = cli::parse_strategy(cfg.attack.strategy);
  attack.synonyms = &synonyms;
  attack.max_candidates = cfg.attack.max_candidates;
  attack.query_budget = cfg.attack.budget;
  return attack;
}

nlohmann::json summary_json(const MetricsSummary& s) {
  return nlohmann::json{{"SAcc", s.sacc},
                        {"RAcc", s.racc},
                        {"ASR", s.asr},
                        {"AvgQ_all", s.avg_queries_all},
                        {"AvgQ_success", s.avg_queries_success},
                        {"counts",
                         {{"n_total", s.n_total},
                          {"n_correct", s.n_correct},
                          {"n_attacked", s.n_attacked},
                          {"n_fooled", s.n_fooled},
                          {"n_skipped", s.n_skipped}}}};
}

int cmd_gen_data(const GlobalArgs& args) {
  RunConfig cfg = resolve_config(args);
  if (!cfg.data.synthetic)
    throw ConfigError("gen-data needs a data.synthetic block in the config");
  cli::LoadedData data = cli::load_data(cfg);
  fs::path out(args.out_dir);
  fs::create_directories(out);

  auto dump_split = [&](const std::vector<LabeledExample>& split, const fs::path& path) {
    std::ofstream file(path);
    if (!file) throw std::runtime_error("cannot write " + path.string());
    for (const auto& ex : split)
      file << ex.label << '\t' << detokenize(ex.tokens, data.vocab) << '\n';
  };
  dump_split(data.train, out / "train.tsv");
  dump_split(data.test, out / "test.tsv");
  data.vocab.save_json((out / "vocab.json").string());
  data.synonyms.save_tsv((out / "synonyms.tsv").string(), data.vocab);
  echo_config(cfg, out);
  log_info("gen-data: wrote " + std::to_string(data.train.size()) + " train / " +
           std::to_string(data.test.size()) + " test examples to " + out.string());
  return kExitOk;
}

int cmd_train(const GlobalArgs& args) {
  RunConfig cfg = resolve_config(args);
  cli::LoadedData data = cli::load_data(cfg);
  if (data.train.empty()) throw ConfigError("train needs a training split");
  ModelConfig model = cli::materialize_model(cfg, data.vocab.size(), data.n_classes);

  fs::path out(args.out_dir);
  fs::create_directories(out);
  std::ofstream loss_log(out / "loss_log.jsonl");
  if (!loss_log) throw std::runtime_error("cannot write loss log");

  Parameters params =
      train_model(data.train, model, cfg.train, cfg.seed, [&](int step, double loss) {
        loss_log << nlohmann::json{{"step", step}, {"loss", loss}}.dump() << '\n';
        if (step % 50 == 0)
          log_info("train: step " + std::to_string(step) + " loss " + std::to_string(loss));
      });

  checkpoint_save((out / "checkpoint.rsmi").string(), params, model);
  echo_config(cfg, out);
  log_info("train: checkpoint written to " + (out / "checkpoint.rsmi").string());
  return kExitOk;
}

int cmd_attack(const GlobalArgs& args, const std::string& checkpoint_path,
               const std::string& victim_override, const std::string& mode_override,
               int sample_override) {
  RunConfig cfg = resolve_config(args);
  if (!victim_override.empty()) cfg.attack.victim = victim_override;
  if (!mode_override.empty()) cfg.infer.mode = cli::parse_mode(mode_override);
  if (sample_override > 0) cfg.attack.sample = sample_override;
  if (cfg.attack.victim != "rsmi" && cfg.attack.victim != "baseline")
    throw ConfigError("victim must be \"rsmi\" or \"baseline\"");

  cli::LoadedData data = cli::load_data(cfg);
  Checkpoint ckpt = load_compatible_checkpoint(checkpoint_path, data);
  AttackConfig attack = make_attack_config(cfg, data.synonyms);

  VictimFactory victim =
      cfg.attack.victim == "rsmi"
          ? make_two_step_victim(ckpt.params, ckpt.config, cfg.infer, cfg.seed)
          : make_plain_victim(ckpt.params, ckpt.config);
  CampaignResult result =
      run_campaign(victim, data.test, attack, cfg.attack.sample, cfg.seed, args.jobs);

  fs::path out(args.out_dir);
  fs::create_directories(out);
  {
    std::ofstream records(out / "records.jsonl");
    for (const AttackRecord& r : result.records) records << record_to_json(r) << '\n';
  }
  nlohmann::json metrics = summary_json(result.summary);
  metrics["victim"] = victim.name;
  metrics["strategy"] = cfg.attack.strategy;
  metrics["mode"] =
      cfg.infer.mode == InferMode::kLogitAverage ? "logit-average" : "majority-vote";
  metrics["sample"] = cfg.attack.sample;
  metrics["seed"] = cfg.seed;
  long fwd = 0;
  for (const AttackRecord& r : result.records) fwd += r.victim_forward_passes;
  metrics["victim_forward_passes"] = fwd;
  write_text(out / "metrics.json", metrics.dump(2) + "\n");
  echo_config(cfg, out);
  log_info("attack: ASR " + std::to_string(result.summary.asr) + ", SAcc " +
           std::to_string(result.summary.sacc) + ", records in " + out.string());
  return kExitOk;
}

int cmd_certify(double p_top, double p_runner, const std::vector<double>& sigmas) {
  if (sigmas.empty()) throw ConfigError("certify needs at least one --sigma");
  RadiusInput input;
  input.sigma_embed = sigmas.front();
  input.sigma_layers.assign(sigmas.begin() + 1, sigmas.end());
  input.p_top = p_top;
  input.p_runner = p_runner;
  RadiusBreakdown detail = certified_radius_detail(input);

  std::cout.precision(10);
  if (detail.clamped)
    std::cout << "warning: probabilities clamped to [1e-9, 1 - 1e-9]\n";
  std::cout << "phi_inv(p_top)    = " << detail.phi_top << "\n";
  std::cout << "phi_inv(p_runner) = " << detail.phi_runner << "\n";
  std::cout << "base = (phi_top - phi_runner) / (2 * " << input.sigma_embed
            << ") = " << (detail.phi_top - detail.phi_runner) / (2.0 * input.sigma_embed)
            << "\n";
  for (size_t l = 0; l < detail.layer_factors.size(); ++l)
    std::cout << "layer " << l + 2 << " factor (1 + sigma^2) = " << detail.layer_factors[l]
              << "\n";
  std::cout << "radius = " << detail.radius << "\n";
  return kExitOk;
}

int cmd_ablate(const GlobalArgs& args, const std::string& checkpoint_path) {
  RunConfig cfg = resolve_config(args);
  cli::LoadedData data = cli::load_data(cfg);
  Checkpoint ckpt = load_compatible_checkpoint(checkpoint_path, data);
  AttackConfig attack = make_attack_config(cfg, data.synonyms);

  AblationTable table =
      ablate_rm_vs_gm(ckpt.params, ckpt.config, data.test, attack, cfg.ablate.masks,
                      cfg.ablate.variants, cfg.ablate.sample, cfg.seed, args.jobs);
  fs::path out(args.out_dir);
  fs::create_directories(out);
  write_text(out / "ablate.csv", ablation_to_csv(table));
  echo_config(cfg, out);
  log_info("ablate: table written to " + (out / "ablate.csv").string());
  return kExitOk;
}

int cmd_sweep(const GlobalArgs& args) {
  RunConfig cfg = resolve_config(args);
  cli::LoadedData data = cli::load_data(cfg);
  if (data.train.empty()) throw ConfigError("sweep needs a training split");
  ModelConfig base = cli::materialize_model(cfg, data.vocab.size(), data.n_classes);
  AttackConfig attack = make_attack_config(cfg, data.synonyms);

  SweepGrid grid{cfg.sweep.sigma, cfg.sweep.masks, cfg.sweep.noise_layers};
  auto points = sweep_hyperparams(grid, data.train, data.test, base, cfg.train, cfg.infer,
                                  attack, cfg.sweep.sample, cfg.seed, args.jobs);
  fs::path out(args.out_dir);
  fs::create_directories(out);
  write_text(out / "sweep.csv", sweep_to_csv(points));
  echo_config(cfg, out);
  log_info("sweep: " + std::to_string(points.size()) + " rows written to " +
           (out / "sweep.csv").string());
  return kExitOk;
}

int cmd_stability(const GlobalArgs& args, const std::string& checkpoint_path,
                  int runs_override) {
  RunConfig cfg = resolve_config(args);
  if (runs_override > 0) cfg.stability.runs = runs_override;
  cli::LoadedData data = cli::load_data(cfg);
  Checkpoint ckpt = load_compatible_checkpoint(checkpoint_path, data);

  // Seeded subsample of the test split.
  std::vector<LabeledExample> sample = data.test;
  RngStream rng(cfg.seed, 0x5AB1E);
  for (size_t i = 0; i + 1 < sample.size(); ++i) {
    size_t j = i + rng.next_below(sample.size() - i);
    std::swap(sample[i], sample[j]);
  }
  if (static_cast<int>(sample.size()) > cfg.stability.sample)
    sample.resize(static_cast<size_t>(cfg.stability.sample));

  StabilityResult result = stability_eval(ckpt.params, ckpt.config, cfg.infer, sample,
                                          cfg.stability.runs, cfg.seed, args.jobs);
  nlohmann::json j{{"per_run_accuracy", result.per_run_accuracy},
                   {"mean", result.mean},
                   {"stddev", result.stddev},
                   {"min", result.min_acc},
                   {"max", result.max_acc},
                   {"median", result.median},
                   {"runs", cfg.stability.runs},
                   {"examples", sample.size()},
                   {"seed", cfg.seed}};
  fs::path out(args.out_dir);
  fs::create_directories(out);
  write_text(out / "stability.json", j.dump(2) + "\n");
  echo_config(cfg, out);
  log_info("stability: mean " + std::to_string(result.mean) + " stddev " +
           std::to_string(result.stddev));
  return kExitOk;
}

int cmd_latent(const GlobalArgs& args, const std::string& checkpoint_path,
               const std::string& clean_text, const std::string& adv_text) {
  RunConfig cfg = resolve_config(args);
  cli::LoadedData data = cli::load_data(cfg);
  Checkpoint ckpt = load_compatible_checkpoint(checkpoint_path, data);

  std::vector<TokenId> clean = tokenize(clean_text, data.vocab, cfg.max_len);
  std::vector<TokenId> adv = tokenize(adv_text, data.vocab, cfg.max_len);
  LayerDivergence d = latent_divergence(ckpt.params, ckpt.config, clean, adv, cfg.seed);

  std::string csv = "layer,l2,cosine\n";
  for (size_t i = 0; i < d.layers.size(); ++i)
    csv += std::to_string(d.layers[i]) + "," + std::to_string(d.l2[i]) + "," +
           std::to_string(d.cosine[i]) + "\n";
  fs::path out(args.out_dir);
  fs::create_directories(out);
  write_text(out / "latent.csv", csv);
  echo_config(cfg, out);
  std::cout << csv;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Randomized smoothing with gradient-guided masked inference: training, "
               "attack evaluation, certification and analysis"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalArgs args;
  app.add_option("--config", args.config_path, "JSON run configuration");
  app.add_option("--seed", args.seed, "Override the config seed");
  app.add_option("--out", args.out_dir, "Output directory");
  app.add_option("--jobs", args.jobs, "Concurrent example-level workers");

  CLI::App* gen = app.add_subcommand("gen-data", "Write a synthetic corpus to disk");
  CLI::App* train = app.add_subcommand("train", "Train a model and save a checkpoint");

  std::string checkpoint_path;
  std::string victim_override;
  std::string mode_override;
  int sample_override = 0;
  CLI::App* attack = app.add_subcommand("attack", "Run an attack campaign");
  attack->add_option("--checkpoint", checkpoint_path, "Model checkpoint")->required();
  attack->add_option("--victim", victim_override, "rsmi or baseline");
  attack->add_option("--mode", mode_override, "logit-average or majority-vote");
  attack->add_option("--sample", sample_override, "Number of test examples to attack");

  double p_top = 0.0, p_runner = 0.0;
  std::vector<double> sigmas;
  CLI::App* certify = app.add_subcommand("certify", "Evaluate the certified radius");
  certify->add_option("--pa", p_top, "Probability of the most likely class")->required();
  certify->add_option("--pb", p_runner, "Probability of the runner-up class")->required();
  certify->add_option("--sigma", sigmas,
                      "Noise stds: first the embedding site, then deeper layers");

  std::string ablate_checkpoint;
  CLI::App* ablate = app.add_subcommand(
      "ablate", "Random-mask vs gradient-guided-mask attack comparison");
  ablate->add_option("--checkpoint", ablate_checkpoint, "Model checkpoint")->required();

  CLI::App* sweep =
      app.add_subcommand("sweep", "Train and attack across a hyperparameter grid");

  std::string stability_checkpoint;
  int runs_override = 0;
  CLI::App* stability = app.add_subcommand("stability", "Repeated-inference accuracy study");
  stability->add_option("--checkpoint", stability_checkpoint, "Model checkpoint")->required();
  stability->add_option("--runs", runs_override, "Number of independent runs");

  std::string latent_checkpoint, clean_text, adv_text;
  CLI::App* latent =
      app.add_subcommand("latent", "Per-layer divergence of a clean/adversarial pair");
  latent->add_option("--checkpoint", latent_checkpoint, "Model checkpoint")->required();
  latent->add_option("--clean", clean_text, "Clean input text")->required();
  latent->add_option("--adv", adv_text, "Adversarial input text")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(args);
    if (train->parsed()) return cmd_train(args);
    if (attack->parsed())
      return cmd_attack(args, checkpoint_path, victim_override, mode_override,
                        sample_override);
    if (certify->parsed()) return cmd_certify(p_top, p_runner, sigmas);
    if (ablate->parsed()) return cmd_ablate(args, ablate_checkpoint);
    if (sweep->parsed()) return cmd_sweep(args);
    if (stability->parsed()) return cmd_stability(args, stability_checkpoint, runs_override);
    if (latent->parsed()) return cmd_latent(args, latent_checkpoint, clean_text, adv_text);
    std::cerr << "error: no subcommand\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

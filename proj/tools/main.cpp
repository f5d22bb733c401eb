#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oqa/commands.hpp"
#include "oqa/config.hpp"
#include "oqa/errors.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out;
  std::string condition;
  uint64_t seed = 0;
  bool seed_set = false;
  bool ablation = false;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "key=value config file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", args.seed, "run seed")->each([&args](const std::string&) {
    args.seed_set = true;
  });
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_option("--condition", args.condition,
                  "degradation condition (blur|illumination|mixed|all)");
  cmd->add_flag("--ablation", args.ablation, "also run the loss-constraint ablation");
  cmd->add_option("--set", args.overrides, "override any config key (key=value)")
      ->take_all();
}

oqa::RunConfig build_config(const CommonArgs& args, bool ablation_flag) {
  oqa::RunConfig cfg;
  if (const char* env = std::getenv("OQA_DATA_DIR")) cfg.data_dir = env;
  if (!args.config_path.empty()) cfg = oqa::load_config(args.config_path);
  if (args.seed_set) cfg.seed = args.seed;
  if (!args.out.empty()) cfg.out = args.out;
  if (!args.condition.empty()) cfg.condition = args.condition;
  if (ablation_flag) cfg.ablation = true;
  for (const std::string& kv : args.overrides) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw oqa::ConfigError("--set expects key=value, got " + kv);
    oqa::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object quality assessment: synthesis, training, scoring, evaluation"};
  app.require_subcommand(1);

  CommonArgs args;
  struct Sub {
    const char* name;
    const char* help;
    void (*fn)(const oqa::RunConfig&);
  };
  const Sub subs[] = {
      {"synth", "synthesize the degraded dataset and write manifests", oqa::run_synth},
      {"pretrain", "train the recognizer and fill in ground-truth scores",
       oqa::run_pretrain},
      {"train-rqa", "train the relative quality module", oqa::run_train_rqa},
      {"train-aqa", "train the absolute quality module", oqa::run_train_aqa},
      {"score", "write per-image scores for the test split", oqa::run_score},
      {"eval", "group-wise SROCC/LCC report", oqa::run_eval},
      {"gate", "quality-gated sequence recognition report", oqa::run_gate},
  };
  for (const Sub& s : subs) {
    CLI::App* cmd = app.add_subcommand(s.name, s.help);
    add_common(cmd, args);
    cmd->callback([&args, &s]() {
      const oqa::RunConfig cfg = build_config(args, args.ablation);
      s.fn(cfg);
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const oqa::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#pragma once

#include <cstdint>
#include <string>

#include "oqa/rqa.hpp"

namespace oqa {

// Every knob of a run. All fields have usable defaults; unknown keys in a
// config file or override are rejected.
struct RunConfig {
  uint64_t seed = 12345;
  std::string out = "out";
  std::string data_dir;  // IDX dataset root; empty = procedural glyphs

  // dataset
  int clean_count = 1000;

  // extractor
  int feature_dim = 64;
  int hidden = 256;
  int pre_epochs = 12;
  int pre_batch = 64;
  double pre_lr = 1e-3;
  // Degraded variants included in recognizer pretraining:
  // none | illumination | light (illumination + blur kernels <= 7) | all.
  // Stronger augmentation makes recognition more robust but flattens the
  // directional feature response that cosine-based scoring relies on.
  std::string pre_augment = "illumination";

  // rqa
  int heads = 4;
  std::string attention = "standard";  // standard | as-printed
  int rqa_epochs = 400;
  int rqa_steps = 8;
  int rqa_batch = 32;
  double rqa_lr = 5e-4;
  double rqa_decay = 0.94;
  int rqa_decay_every = 200;
  double lambda_c = 1.0;

  // aqa
  int aqa_epochs = 300;
  int aqa_steps = 8;
  int aqa_batch = 32;
  double aqa_lr = 1e-3;
  double aqa_wd = 5e-4;
  double eps = 0.02;
  double zeta = 0.01;
  double lambda_intra = 1.0;
  double lambda_a1 = 1.0;
  double lambda_a2 = 1.0;

  // evaluation
  std::string condition = "all";  // blur | illumination | mixed | all
  int groups_per_set = 1000;
  int group_min = 3;
  int group_max = 10;
  int ref_per_class = 16;
  bool ablation = false;

  // gating benchmark
  int sequences = 200;
  int seq_min = 5;
  int seq_max = 9;

  AttentionMode attention_mode() const { return attention_mode_from_name(attention); }
  void validate() const;  // throws ConfigError on out-of-range values
};

// key=value per line; '#' starts a comment. Unknown keys raise ConfigError.
void apply_config_text(RunConfig& cfg, const std::string& text);
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);
RunConfig load_config(const std::string& path);

}  // namespace oqa

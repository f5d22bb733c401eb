#pragma once

#include "oqa/config.hpp"

namespace oqa {

// Pipeline commands behind the CLI subcommands. Each reads and writes
// files under cfg.out; failures surface as oqa::Error subclasses.
void run_synth(const RunConfig& cfg);
void run_pretrain(const RunConfig& cfg);
void run_train_rqa(const RunConfig& cfg);
void run_train_aqa(const RunConfig& cfg);
void run_score(const RunConfig& cfg);
void run_eval(const RunConfig& cfg);
void run_gate(const RunConfig& cfg);

}  // namespace oqa

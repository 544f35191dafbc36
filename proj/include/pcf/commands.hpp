#pragma once

#include "pcf/run_config.hpp"

namespace pcf {

// One function per CLI subcommand. Each validates what it needs, runs the
// work, writes its files under cfg.out, and prints a one-line summary.
// Errors surface as ValidationError / NumericError for the exit-code mapping.
void cmd_generate(const RunConfig& cfg);
void cmd_train_predictor(const RunConfig& cfg);
void cmd_train_corrector(const RunConfig& cfg);
void cmd_evaluate(const RunConfig& cfg);
void cmd_ablate(const RunConfig& cfg);

}  // namespace pcf

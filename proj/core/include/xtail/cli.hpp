#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xtail/config.hpp"
#include "xtail/encoder.hpp"

namespace xtail::cli {

// Full command line entry point: parses flags, loads the config, dispatches
// to one of the commands below, and maps any Error to a single stderr line
// of the form "error: <code>: <message>" with exit status 1.
int run(const std::vector<std::string>& args);

// The individual commands throw Error on failure and write their outputs
// under the configured work directory.
void cmd_synth(const PipelineConfig& config);
void cmd_train_sparse(const PipelineConfig& config, bool dump_features_flag);
void cmd_keywords(const PipelineConfig& config);
void cmd_train_encoder(const PipelineConfig& config, EncoderMode mode);
void cmd_eval(const PipelineConfig& config, const std::filesystem::path& predictions,
              const std::optional<std::filesystem::path>& baseline,
              const std::optional<std::filesystem::path>& out);
void cmd_theory(const PipelineConfig& config);
void cmd_report(const PipelineConfig& config);

}  // namespace xtail::cli

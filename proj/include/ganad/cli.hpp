#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ganad/config.hpp"

namespace ganad {

// Paths passed to the commands beside the config document.
struct CliInputs {
    std::optional<std::filesystem::path> data;        // stored dataset directory
    std::optional<std::filesystem::path> checkpoint;  // checkpoint directory
    std::optional<std::filesystem::path> input;       // dataset directory or PNG folder with manifest
    std::optional<std::filesystem::path> scores;      // scores CSV
    std::optional<std::filesystem::path> labels;      // labels CSV (source_id,label)
    std::optional<std::filesystem::path> run;         // run directory for report
};

// Every command writes only under out and echoes the resolved config there.
void cmd_gen_data(const RunConfig& config, const std::filesystem::path& out);
void cmd_train(const RunConfig& config, const CliInputs& in, const std::filesystem::path& out);
void cmd_score(const RunConfig& config, const CliInputs& in, const std::filesystem::path& out);
void cmd_evaluate(const RunConfig& config, const CliInputs& in, const std::filesystem::path& out);
void cmd_sweep(const RunConfig& config, const std::filesystem::path& out);
void cmd_report(const std::filesystem::path& run_dir);

// Parses argv, dispatches, maps failures to exit codes (2 config, 3 missing
// input, 1 anything else) with a JSON error document on stderr.
int run_cli(const std::vector<std::string>& args);

}  // namespace ganad

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "ganad/data.hpp"
#include "ganad/evaluation.hpp"
#include "ganad/scoring.hpp"
#include "ganad/training.hpp"

namespace ganad {

struct EvaluateConfig {
    int bins = 50;
    ScoreVariant variant = ScoreVariant::Combined;
};

// One JSON document drives every command. Unknown keys are rejected.
struct RunConfig {
    std::uint64_t seed = 1;
    std::string out = "run";
    int jobs = 1;
    CorpusConfig corpus;
    double gamma = 0.0;
    TrainConfig train;
    ScoreConfig score;
    SweepConfig sweep;  // corpus/train/score/jobs copied from the sections above
    EvaluateConfig evaluate;

    // Pushes seed, jobs and the shared sections into the nested structs.
    void resolve();
    void validate() const;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string dump_run_config(const RunConfig& config);

}  // namespace ganad

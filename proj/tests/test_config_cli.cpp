#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "ganad/checkpoint.hpp"
#include "ganad/cli.hpp"
#include "ganad/config.hpp"
#include "ganad/errors.hpp"

using namespace ganad;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("ganad_test_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write(const fs::path& p, const std::string& text)
{
    std::ofstream(p) << text;
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

struct CliResult {
    int code;
    std::string err;
};

CliResult cli(std::vector<std::string> args)
{
    ::testing::internal::CaptureStderr();
    const int code = run_cli(args);
    return {code, ::testing::internal::GetCapturedStderr()};
}

// Small enough that training a handful of steps takes well under a second.
const char* tiny_config = R"({
  "seed": 4,
  "data": {"resolution": 8, "train_normals": 12, "anomaly_pool": 4, "test_normals": 6, "test_anomalies": 6},
  "train": {"latent_dim": 8, "base_channels": 4, "batch_start": 4, "batch_end": 4, "steps_per_phase": 0,
            "log_every": 1}
})";

}  // namespace

TEST(Config, DefaultsAndResolution)
{
    auto c = parse_run_config("{}");
    EXPECT_EQ(c.seed, 1u);
    EXPECT_EQ(c.train.model.latent_dim, 64);
    EXPECT_EQ(c.score.lambda, 0.05);
    EXPECT_EQ(c.corpus.shapes.resolution, 16);
    EXPECT_EQ(c.train.seed, 1u);
    EXPECT_EQ(c.corpus.shapes.seed, 1u);
    EXPECT_NO_THROW(c.validate());
}

TEST(Config, SectionsAreParsed)
{
    const auto c = parse_run_config(R"({"seed": 9, "jobs": 2,
        "data": {"resolution": 8, "gamma": 0.02, "rotations": 3, "anomaly_families": ["cross"]},
        "train": {"encoder_mode": "joint_latent", "learning_rate": 0.0005, "detach_inner_sample": true,
                  "latent_target": "unit", "progressive": false},
        "score": {"lambda": 0.2, "alpha": -0.5},
        "sweep": {"gammas": [0, 0.02], "modes": ["joint_image", "posthoc"], "variants": ["L_o", "combined"],
                  "seeds": [1, 2, 3], "step_budget": 100000},
        "evaluate": {"bins": 20, "variant": "L_n"}})");
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.jobs, 2);
    EXPECT_EQ(c.corpus.shapes.resolution, 8);
    EXPECT_EQ(c.train.model.target_resolution, 8);
    EXPECT_EQ(c.gamma, 0.02);
    EXPECT_EQ(c.corpus.rotations, 3);
    EXPECT_EQ(c.corpus.shapes.anomaly_families, std::vector<ShapeFamily>{ShapeFamily::Cross});
    EXPECT_EQ(c.train.encoder_mode, EncoderMode::JointLatentSpace);
    EXPECT_EQ(c.train.adam.learning_rate, 0.0005);
    EXPECT_TRUE(c.train.detach_inner_sample);
    EXPECT_EQ(c.train.latent_target, LatentTarget::Unit);
    EXPECT_EQ(c.train.progressive, std::optional<bool>(false));
    EXPECT_EQ(c.score.lambda, 0.2);
    EXPECT_EQ(c.score.alpha, -0.5);
    EXPECT_EQ(c.sweep.gammas, (std::vector<double>{0, 0.02}));
    EXPECT_EQ(c.sweep.modes.size(), 2u);
    EXPECT_EQ(c.sweep.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
    EXPECT_EQ(c.sweep.jobs, 2);
    EXPECT_EQ(c.sweep.train.model.target_resolution, 8);
    EXPECT_EQ(c.evaluate.bins, 20);
    EXPECT_EQ(c.evaluate.variant, ScoreVariant::ResidualNormalized);
}

TEST(Config, DumpRoundTrips)
{
    const auto c = parse_run_config(tiny_config);
    const auto text = dump_run_config(c);
    EXPECT_EQ(dump_run_config(parse_run_config(text)), text);
}

TEST(Config, UnknownKeyNamesThePath)
{
    try {
        parse_run_config(R"({"train": {"learnin_rate": 0.1}})");
        FAIL() << "accepted an unknown key";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.key(), "train.learnin_rate");
    }
    EXPECT_THROW(parse_run_config(R"({"bogus": 1})"), ConfigError);
    EXPECT_THROW(parse_run_config(R"({"score": {"lambda": 2}})").validate(), ConfigError);
    EXPECT_THROW(parse_run_config(R"({"train": {"encoder_mode": "sideways"}})"), ConfigError);
    EXPECT_THROW(parse_run_config(R"({"train": {"latent_dim": "big"}})"), ConfigError);
    EXPECT_THROW(parse_run_config("{not json"), ConfigError);
}

TEST(Cli, UnknownConfigKeyExitsTwoWithJsonError)
{
    const auto dir = scratch("badkey");
    write(dir / "c.json", R"({"data": {"resolutio": 8}})");
    const auto r = cli({"train", "--config", (dir / "c.json").string(), "--out", (dir / "out").string()});
    EXPECT_EQ(r.code, 2);
    const auto doc = json::parse(r.err.substr(r.err.find('{')));
    EXPECT_EQ(doc["error"]["exit_code"], 2);
    EXPECT_EQ(doc["error"]["key"], "data.resolutio");
    EXPECT_NE(doc["error"]["message"].get<std::string>().find("data.resolutio"), std::string::npos);
}

TEST(Cli, MissingInputsExitThree)
{
    const auto dir = scratch("missing");
    EXPECT_EQ(cli({"train", "--config", (dir / "nope.json").string(), "--out", (dir / "o").string()}).code, 3);
    EXPECT_EQ(cli({"score", "--checkpoint", (dir / "nockpt").string(), "--input", dir.string(), "--out",
                   (dir / "o").string()})
                  .code,
              3);
    EXPECT_EQ(cli({"evaluate", "--scores", (dir / "none.csv").string(), "--out", (dir / "o").string()}).code, 3);
    EXPECT_EQ(cli({"report", "--run", (dir / "no_run").string()}).code, 3);
}

TEST(Cli, UnknownCommandOrFlagIsAUsageError)
{
    EXPECT_EQ(cli({"frobnicate"}).code, 2);
    EXPECT_EQ(cli({"train", "--no-such-flag"}).code, 2);
}

TEST(Cli, EvaluateHandBuiltScoresGivesThreeQuarters)
{
    const auto dir = scratch("eval");
    write(dir / "scores.csv", "source_id,a,label\nn1,0.1,normal\nn2,0.3,normal\na1,0.2,anomaly\na2,0.4,anomaly\n");
    ASSERT_EQ(cli({"evaluate", "--scores", (dir / "scores.csv").string(), "--out", (dir / "out").string()}).code, 0);
    const auto summary = json::parse(slurp(dir / "out" / "summary.json"));
    EXPECT_DOUBLE_EQ(summary["auc"].get<double>(), 0.75);
    EXPECT_TRUE(fs::exists(dir / "out" / "roc.csv"));
    EXPECT_TRUE(fs::exists(dir / "out" / "roc.svg"));

    // labels joined from a separate file
    write(dir / "s2.csv", "source_id,L_n,L_r,L_o,a,is_anomaly\nn1,0,0,0,0.1,0\nn2,0,0,0,0.3,1\na1,0,0,0,0.2,1\n"
                          "a2,0,0,0,0.4,1\n");
    write(dir / "labels.csv", "source_id,label\na2,anomaly\nn1,normal\na1,anomaly\nn2,normal\n");
    ASSERT_EQ(cli({"evaluate", "--scores", (dir / "s2.csv").string(), "--labels", (dir / "labels.csv").string(),
                   "--out", (dir / "out2").string()})
                  .code,
              0);
    EXPECT_DOUBLE_EQ(json::parse(slurp(dir / "out2" / "summary.json"))["auc"].get<double>(), 0.75);
}

TEST(Cli, ZeroStepTrainWritesTheInitialCheckpoint)
{
    const auto dir = scratch("train0");
    write(dir / "c.json", tiny_config);
    ASSERT_EQ(cli({"train", "--config", (dir / "c.json").string(), "--out", (dir / "run").string()}).code, 0);
    const auto config = load_run_config(dir / "c.json");
    ModelConfig mc = config.train.model;
    mc.seed = derive_seed(config.train.seed, 100);
    const auto init = init_bundle<float>(mc);
    const auto saved = load_checkpoint(dir / "run" / "checkpoint");
    EXPECT_EQ(params_digest(saved.generator), params_digest(init.generator));
    EXPECT_EQ(params_digest(saved.discriminator), params_digest(init.discriminator));
    EXPECT_EQ(params_digest(saved.encoder), params_digest(init.encoder));
    EXPECT_TRUE(fs::exists(dir / "run" / "config.json"));
    EXPECT_TRUE(fs::exists(dir / "run" / "dataset" / "meta.json"));
}

TEST(Cli, SeedFlagOverridesConfig)
{
    const auto dir = scratch("seed");
    write(dir / "c.json", tiny_config);
    ASSERT_EQ(cli({"gen-data", "--config", (dir / "c.json").string(), "--seed", "77", "--out", (dir / "d").string()})
                  .code,
              0);
    EXPECT_EQ(json::parse(slurp(dir / "d" / "config.json"))["seed"], 77);
}

TEST(Cli, TrainScoreEvaluateReportPipeline)
{
    const auto dir = scratch("pipeline");
    auto cfg = json::parse(tiny_config);
    cfg["train"]["steps_per_phase"] = 3;
    write(dir / "c.json", cfg.dump());
    const auto c = (dir / "c.json").string();
    const auto run = dir / "run";
    ASSERT_EQ(cli({"train", "--config", c, "--out", run.string()}).code, 0);
    ASSERT_EQ(cli({"score", "--config", c, "--checkpoint", (run / "checkpoint").string(), "--input",
                   (run / "dataset").string(), "--out", (dir / "scored").string()})
                  .code,
              0);
    const auto scores = slurp(dir / "scored" / "scores.csv");
    EXPECT_EQ(std::count(scores.begin(), scores.end(), '\n'), 13);
    ASSERT_EQ(cli({"evaluate", "--config", c, "--checkpoint", (run / "checkpoint").string(), "--input",
                   (run / "dataset").string(), "--out", run.string()})
                  .code,
              0);
    for (const char* f : {"summary.json", "roc.csv", "latent_coeffs.csv", "latent_norms.csv", "projection.csv",
                          "latents.csv"})
        EXPECT_TRUE(fs::exists(run / f)) << f;
    ASSERT_EQ(cli({"report", "--run", run.string()}).code, 0);
    const auto report = slurp(run / "report.md");
    EXPECT_NE(report.find("training.svg"), std::string::npos);
    EXPECT_NE(report.find("roc.svg"), std::string::npos);
    EXPECT_TRUE(fs::exists(run / "training.svg"));
}

TEST(Cli, SweepWritesTableAndRespectsBudget)
{
    const auto dir = scratch("sweep");
    auto cfg = json::parse(tiny_config);
    cfg["sweep"] = {{"gammas", {0.0, 0.25}}, {"seeds", {1, 2}}, {"variants", {"L_o", "combined"}}};
    write(dir / "c.json", cfg.dump());
    ASSERT_EQ(cli({"sweep", "--config", (dir / "c.json").string(), "--out", (dir / "s").string()}).code, 0);
    const auto csv = slurp(dir / "s" / "sweep.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 2 * 2);
    EXPECT_TRUE(fs::exists(dir / "s" / "table.md"));

    cfg["train"]["steps_per_phase"] = 10;
    cfg["sweep"]["step_budget"] = 30;
    write(dir / "c2.json", cfg.dump());
    EXPECT_EQ(cli({"sweep", "--config", (dir / "c2.json").string(), "--out", (dir / "s2").string()}).code, 2);
}

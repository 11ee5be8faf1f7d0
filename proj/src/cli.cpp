#include "ganad/cli.hpp"

#include <algorithm>
#include <chrono>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "binary_io.hpp"
#include "csv.hpp"
#include "ganad/checkpoint.hpp"
#include "ganad/errors.hpp"
#include "ganad/report.hpp"

namespace ganad {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void prepare_out(const RunConfig& config, const fs::path& out)
{
    fs::create_directories(out);
    io::write_text(out / "config.json", dump_run_config(config));
}

const fs::path& require_path(const std::optional<fs::path>& p, const char* flag)
{
    if (!p)
        throw ConfigError(std::string("missing required flag ") + flag, flag);
    if (!fs::exists(*p))
        throw MissingInputError(std::string(flag) + " path not found: " + p->string());
    return *p;
}

// Either a stored dataset (meta.json) or a PNG folder with a manifest.
LabeledDataset load_eval_set(const fs::path& input, int resolution, int channels, std::size_t* skipped)
{
    if (fs::exists(input / "meta.json")) {
        auto ds = read_dataset(input);
        if (ds.resolution != resolution || ds.channels != channels)
            throw Error("dataset " + input.string() + " is " + std::to_string(ds.resolution) + "px/" +
                        std::to_string(ds.channels) + "ch, model expects " + std::to_string(resolution) + "px/" +
                        std::to_string(channels) + "ch");
        return std::move(ds.test);
    }
    IngestOptions opt;
    opt.resolution = resolution;
    opt.channels = channels;
    auto result = ingest_folder(input, opt);
    for (const auto& w : result.warnings)
        std::cerr << "warning: " << w << "\n";
    if (skipped)
        *skipped = result.skipped;
    return std::move(result.dataset);
}

std::string labels_csv(const LabeledDataset& ds)
{
    std::ostringstream os;
    os << "source_id,label\n";
    for (const auto& s : ds)
        os << s.source_id << ',' << to_string(s.label) << '\n';
    return os.str();
}

std::vector<ScoreReport> score_dataset(const ModelBundle& bundle, const LabeledDataset& ds, const ScoreConfig& config)
{
    std::vector<Image> images;
    images.reserve(ds.size());
    for (const auto& s : ds)
        images.push_back(s.image);
    auto reports = score_batch(bundle, images, config);
    for (std::size_t i = 0; i < reports.size(); ++i)
        reports[i].source_id = ds[i].source_id;
    return reports;
}

std::string score_column(ScoreVariant v)
{
    return v == ScoreVariant::Combined ? "a" : std::string(to_string(v));
}

json norm_json(const NormStats& s)
{
    return {{"count", s.count}, {"mean", s.mean}, {"median", s.median}, {"q1", s.q1}, {"q3", s.q3}};
}

void write_roc_outputs(const fs::path& out, const RocResult& roc, ScoreVariant variant, json extra)
{
    io::write_text(out / "roc.csv", roc_csv(roc));
    io::write_text(out / "roc.svg", svg_roc(roc));
    json summary = {{"auc", roc.auc},
                    {"variant", std::string(to_string(variant))},
                    {"positives", roc.positives},
                    {"negatives", roc.negatives}};
    summary.update(extra);
    io::write_text(out / "summary.json", summary.dump(2) + "\n");
}

}  // namespace

void cmd_gen_data(const RunConfig& config, const fs::path& out)
{
    config.validate();
    prepare_out(config, out);
    write_dataset(out / "dataset", make_stored_dataset(config.corpus, config.gamma));
}

void cmd_train(const RunConfig& config, const CliInputs& in, const fs::path& out)
{
    config.validate();
    prepare_out(config, out);
    StoredDataset data;
    if (in.data) {
        data = read_dataset(require_path(in.data, "--data"));
        if (data.resolution != config.train.model.target_resolution || data.channels != config.train.model.image_channels)
            throw ConfigError("dataset resolution/channels do not match data.resolution/data.channels", "data.resolution");
    } else {
        data = make_stored_dataset(config.corpus, config.gamma);
        write_dataset(out / "dataset", data);
    }

    std::string log = train_log_header() + "\n";
    TrainCallbacks cb;
    cb.on_log = [&](const TrainLogRecord& r) { log += train_log_row(r) + "\n"; };
    cb.checkpoint = [&](const ModelBundle& b, const std::string& tag) {
        if (tag != "final")
            save_checkpoint(b, out / "checkpoints" / tag);
    };
    // Only the label-free stream reaches the trainer.
    auto result = train(data.train, config.train, cb);
    save_checkpoint(result.bundle, out / "checkpoint");
    io::write_text(out / "train_log.csv", log);
}

void cmd_score(const RunConfig& config, const CliInputs& in, const fs::path& out)
{
    config.validate();
    const auto bundle = load_checkpoint(require_path(in.checkpoint, "--checkpoint"));
    const auto& input = require_path(in.input, "--input");
    prepare_out(config, out);
    std::size_t skipped = 0;
    const auto ds = load_eval_set(input, bundle.phase.resolution, bundle.image_channels(), &skipped);
    const auto reports = score_dataset(bundle, ds, config.score);
    io::write_text(out / "scores.csv", scores_csv(reports));
    io::write_text(out / "labels.csv", labels_csv(ds));
    if (skipped > 0)
        std::cerr << "warning: skipped " << skipped << " undecodable input(s)\n";
}

void cmd_evaluate(const RunConfig& config, const CliInputs& in, const fs::path& out)
{
    config.validate();
    const auto variant = config.evaluate.variant;
    if (in.scores) {
        const auto table = csv::read(require_path(in.scores, "--scores"));
        const int col = table.column(score_column(variant));
        if (col < 0)
            throw FormatError("scores file has no '" + score_column(variant) + "' column");
        int label_col = table.column("label");
        std::map<std::string, Label> by_id;
        if (label_col < 0) {
            const auto labels = csv::read(require_path(in.labels, "--labels"));
            const int id = labels.column("source_id"), lab = labels.column("label");
            if (id < 0 || lab < 0)
                throw FormatError("labels file needs source_id and label columns");
            for (const auto& r : labels.rows)
                by_id[r[id]] = parse_label(r[lab]);
        }
        const int id_col = table.column("source_id");
        std::vector<double> scores;
        std::vector<Label> labels;
        for (const auto& r : table.rows) {
            scores.push_back(std::stod(r[col]));
            if (label_col >= 0) {
                labels.push_back(parse_label(r[label_col]));
            } else {
                if (id_col < 0)
                    throw FormatError("scores file has no source_id column to join labels on");
                const auto it = by_id.find(r[id_col]);
                if (it == by_id.end())
                    throw FormatError("no label for source_id '" + r[id_col] + "'");
                labels.push_back(it->second);
            }
        }
        prepare_out(config, out);
        write_roc_outputs(out, compute_roc(scores, labels), variant, json::object());
        return;
    }

    const auto bundle = load_checkpoint(require_path(in.checkpoint, "--checkpoint"));
    const auto& input = require_path(in.input, "--input");
    prepare_out(config, out);
    const auto ds = load_eval_set(input, bundle.phase.resolution, bundle.image_channels(), nullptr);
    const auto reports = score_dataset(bundle, ds, config.score);
    io::write_text(out / "scores.csv", scores_csv(reports));
    io::write_text(out / "labels.csv", labels_csv(ds));

    std::vector<double> scores;
    std::vector<Label> labels;
    std::vector<LatentSample> latents;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        scores.push_back(variant_value(reports[i], variant));
        labels.push_back(ds[i].label);
        latents.push_back({ds[i].source_id, ds[i].label, reports[i].z_hat.values});
    }
    const auto analysis = analyze_latents(std::move(latents), config.evaluate.bins);
    io::write_text(out / "latent_coeffs.csv", latent_coeffs_csv(analysis));
    io::write_text(out / "latent_norms.csv", latent_norms_csv(analysis));
    io::write_text(out / "projection.csv", projection_csv(analysis));
    io::write_text(out / "latents.csv", latents_csv(analysis));
    io::write_text(out / "latent_hist.svg", svg_latent_histogram(analysis));

    json norms = json::object();
    for (const auto& [label, st] : analysis.norms)
        norms[std::string(to_string(label))] = norm_json(st);
    json per_variant = json::object();
    for (auto v : {ScoreVariant::ResidualNormalized, ScoreVariant::OriginDistance, ScoreVariant::ResidualRaw,
                   ScoreVariant::Combined}) {
        std::vector<double> s;
        for (const auto& r : reports)
            s.push_back(variant_value(r, v));
        per_variant[std::string(to_string(v))] = compute_roc(s, labels).auc;
    }
    write_roc_outputs(out, compute_roc(scores, labels), variant,
                      {{"latent_norms", norms}, {"auc_by_variant", per_variant}});
}

void cmd_sweep(const RunConfig& config, const fs::path& out)
{
    config.validate();
    prepare_out(config, out);
    const auto result = run_sweep(config.sweep, {[](const SweepRun& r) {
        std::cerr << "run gamma=" << r.gamma << " mode=" << to_string(r.mode) << " seed=" << r.seed << ": "
                  << (r.ok ? "ok" : "failed: " + r.error) << "\n";
    }});
    io::write_text(out / "sweep.csv", sweep_csv(result));

    std::ostringstream runs;
    runs << "gamma,mode,seed,ok,median_norm_normal,median_norm_anomaly,error\n";
    for (const auto& r : result.runs)
        runs << r.gamma << ',' << to_string(r.mode) << ',' << r.seed << ',' << (r.ok ? 1 : 0) << ','
             << r.normal_norms.median << ',' << r.anomaly_norms.median << ',' << r.error << '\n';
    io::write_text(out / "runs.csv", runs.str());

    json matrix = json::array();
    for (double g : config.sweep.gammas)
        for (auto m : config.sweep.modes)
            for (auto v : config.sweep.variants) {
                const double auc = result.median_auc(g, m, v);
                matrix.push_back({{"gamma", g},
                                  {"mode", std::string(to_string(m))},
                                  {"variant", std::string(to_string(v))},
                                  {"median_auc", std::isnan(auc) ? json(nullptr) : json(auc)}});
            }
    const json summary = {{"steps_per_run", result.steps_per_run},
                          {"seeds", config.sweep.seeds},
                          {"auc_matrix", matrix}};
    io::write_text(out / "summary.json", summary.dump(2) + "\n");
    io::write_text(out / "table.md", sweep_table_markdown(result, config.sweep));
}

void cmd_report(const fs::path& run_dir) { write_report(run_dir); }

int run_cli(const std::vector<std::string>& args)
{
    CLI::App app{"GAN-based anomaly detection harness", "ganad"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    CliInputs in;
    app.add_option("--config", config_path, "JSON run config")->envname("GANAD_CONFIG");
    app.add_option("--out", out_dir, "run directory")->envname("GANAD_OUT");
    app.add_option("--seed", seed, "global seed")->envname("GANAD_SEED");
    app.add_option("--jobs", jobs, "parallel sweep runs")->envname("GANAD_JOBS");
    app.add_option("--data", in.data, "stored dataset directory (train)");
    app.add_option("--checkpoint", in.checkpoint, "checkpoint directory");
    app.add_option("--input", in.input, "dataset directory or PNG folder with manifest.csv");
    app.add_option("--scores", in.scores, "scores CSV (evaluate)");
    app.add_option("--labels", in.labels, "labels CSV with source_id,label (evaluate)");
    app.add_option("--run", in.run, "run directory (report)");

    auto* gen = app.add_subcommand("gen-data", "generate the synthetic corpus");
    auto* tr = app.add_subcommand("train", "train generator, critic and encoder");
    auto* sc = app.add_subcommand("score", "score images with a trained checkpoint");
    auto* ev = app.add_subcommand("evaluate", "ROC/AUC and latent analysis");
    auto* sw = app.add_subcommand("sweep", "contamination and ablation sweep");
    auto* rp = app.add_subcommand("report", "markdown + SVG summary of a run directory");

    auto fail = [](const std::string& kind, const std::string& message, int code, const std::string& key = {}) {
        json err = {{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
        if (!key.empty())
            err["error"]["key"] = key;
        std::cerr << err.dump() << std::endl;
        return code;
    };

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), 2);
    }

    try {
        RunConfig config = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        if (seed)
            config.seed = *seed;
        if (jobs)
            config.jobs = *jobs;
        if (!out_dir.empty())
            config.out = out_dir;
        config.resolve();
        const fs::path out = config.out;

        if (gen->parsed())
            cmd_gen_data(config, out);
        else if (tr->parsed())
            cmd_train(config, in, out);
        else if (sc->parsed())
            cmd_score(config, in, out);
        else if (ev->parsed())
            cmd_evaluate(config, in, out);
        else if (sw->parsed())
            cmd_sweep(config, out);
        else if (rp->parsed())
            cmd_report(in.run ? *in.run : out);
        return 0;
    } catch (const ConfigError& e) {
        return fail("config", e.what(), 2, e.key());
    } catch (const MissingInputError& e) {
        return fail("missing_input", e.what(), 3);
    } catch (const std::exception& e) {
        return fail("runtime", e.what(), 1);
    }
}

}  // namespace ganad

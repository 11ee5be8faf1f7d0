#include "ganad/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"
#include "ganad/errors.hpp"

namespace ganad {

using nlohmann::json;

namespace {

// Reads typed fields from one JSON object and rejects keys nobody asked for.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            throw ConfigError("'" + path_ + "' must be an object", path_);
    }

    template <typename T>
    void get(const char* key, T& out)
    {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end())
            return;
        try {
            out = it->template get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("bad value for '" + name(key) + "': " + e.what(), name(key));
        }
    }

    template <typename T, typename Parse>
    void get_parsed(const char* key, T& out, Parse parse)
    {
        std::string text;
        get(key, text);
        if (text.empty())
            return;
        try {
            out = parse(text);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("bad value for '" + name(key) + "': " + e.what(), name(key));
        }
    }

    template <typename T, typename Parse>
    void get_list(const char* key, std::vector<T>& out, Parse parse)
    {
        std::vector<std::string> texts;
        seen_.insert(key);
        if (!j_.contains(key))
            return;
        get(key, texts);
        out.clear();
        try {
            for (const auto& t : texts)
                out.push_back(parse(t));
        } catch (const std::invalid_argument& e) {
            throw ConfigError("bad value for '" + name(key) + "': " + e.what(), name(key));
        }
    }

    bool has(const char* key) const { return j_.contains(key); }

    Section sub(const char* key)
    {
        seen_.insert(key);
        const auto it = j_.find(key);
        static const json empty = json::object();
        return Section(it == j_.end() ? empty : *it, name(key));
    }

    void finish() const
    {
        for (const auto& [k, v] : j_.items())
            if (!seen_.contains(k))
                throw ConfigError("unknown config key '" + name(k) + "'", name(k));
    }

private:
    std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace

RunConfig parse_run_config(const std::string& json_text)
{
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig c;
    Section top(root, "");
    top.get("seed", c.seed);
    top.get("out", c.out);
    top.get("jobs", c.jobs);

    {
        auto s = top.sub("data");
        auto& shapes = c.corpus.shapes;
        s.get("resolution", shapes.resolution);
        s.get("channels", shapes.channels);
        s.get_parsed("normal_family", shapes.normal_family, parse_shape_family);
        s.get_list("anomaly_families", shapes.anomaly_families, parse_shape_family);
        s.get("noise", shapes.noise);
        s.get("train_normals", c.corpus.train_normals);
        s.get("anomaly_pool", c.corpus.anomaly_pool);
        s.get("test_normals", c.corpus.test_normals);
        s.get("test_anomalies", c.corpus.test_anomalies);
        s.get("rotations", c.corpus.rotations);
        s.get("gamma", c.gamma);
        s.finish();
    }
    {
        auto s = top.sub("train");
        auto& t = c.train;
        s.get("latent_dim", t.model.latent_dim);
        s.get("base_channels", t.model.base_channels);
        s.get("leaky_slope", t.model.leaky_slope);
        s.get_parsed("encoder_mode", t.encoder_mode, parse_encoder_mode);
        s.get("critic_steps", t.critic_steps);
        s.get("gp_weight", t.gp_weight);
        s.get("learning_rate", t.adam.learning_rate);
        s.get("beta1", t.adam.beta1);
        s.get("beta2", t.adam.beta2);
        s.get("epsilon", t.adam.epsilon);
        s.get("batch_start", t.batch_start);
        s.get("batch_end", t.batch_end);
        s.get("steps_per_phase", t.steps_per_phase);
        if (s.has("progressive")) {
            bool progressive = false;
            s.get("progressive", progressive);
            t.progressive = progressive;
        }
        s.get("posthoc_encoder_steps", t.posthoc_encoder_steps);
        s.get("detach_inner_sample", t.detach_inner_sample);
        s.get_parsed("latent_target", t.latent_target, [](const std::string& v) {
            if (v == "raw")
                return LatentTarget::Raw;
            if (v == "unit")
                return LatentTarget::Unit;
            throw std::invalid_argument("expected 'raw' or 'unit', got '" + v + "'");
        });
        s.get("encoder_loss_weight", t.encoder_loss_weight);
        s.get("log_every", t.log_every);
        s.finish();
    }
    {
        auto s = top.sub("score");
        s.get("lambda", c.score.lambda);
        s.get("alpha", c.score.alpha);
        s.finish();
    }
    {
        auto s = top.sub("sweep");
        s.get("gammas", c.sweep.gammas);
        s.get_list("modes", c.sweep.modes, parse_encoder_mode);
        s.get_list("variants", c.sweep.variants, parse_score_variant);
        s.get("seeds", c.sweep.seeds);
        s.get("step_budget", c.sweep.step_budget);
        s.finish();
    }
    {
        auto s = top.sub("evaluate");
        s.get("bins", c.evaluate.bins);
        s.get_parsed("variant", c.evaluate.variant, parse_score_variant);
        s.finish();
    }
    top.finish();
    c.resolve();
    return c;
}

void RunConfig::resolve()
{
    corpus.shapes.seed = seed;
    train.seed = seed;
    train.model.target_resolution = corpus.shapes.resolution;
    train.model.image_channels = corpus.shapes.channels;
    sweep.corpus = corpus;
    sweep.train = train;
    sweep.score = score;
    sweep.jobs = jobs;
}

void RunConfig::validate() const
{
    try {
        auto shapes = corpus.shapes;
        shapes.normals = corpus.train_normals + corpus.test_normals;
        shapes.anomalies = corpus.anomaly_pool + corpus.test_anomalies;
        shapes.validate();
        ContaminationSpec::make(gamma, corpus.train_normals, seed).validate();
        train.validate();
        score.validate();
        sweep.validate();
        if (evaluate.bins < 1)
            throw std::invalid_argument("evaluate.bins must be >= 1");
        if (jobs < 1)
            throw std::invalid_argument("jobs must be >= 1");
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path))
        throw MissingInputError("config file not found: " + path.string());
    return parse_run_config(io::read_text(path));
}

std::string dump_run_config(const RunConfig& c)
{
    json families = json::array();
    for (auto f : c.corpus.shapes.anomaly_families)
        families.push_back(std::string(to_string(f)));
    json modes = json::array();
    for (auto m : c.sweep.modes)
        modes.push_back(std::string(to_string(m)));
    json variants = json::array();
    for (auto v : c.sweep.variants)
        variants.push_back(std::string(to_string(v)));
    const auto& t = c.train;
    json train = {
        {"latent_dim", t.model.latent_dim},
        {"base_channels", t.model.base_channels},
        {"leaky_slope", t.model.leaky_slope},
        {"encoder_mode", std::string(to_string(t.encoder_mode))},
        {"critic_steps", t.critic_steps},
        {"gp_weight", t.gp_weight},
        {"learning_rate", t.adam.learning_rate},
        {"beta1", t.adam.beta1},
        {"beta2", t.adam.beta2},
        {"epsilon", t.adam.epsilon},
        {"batch_start", t.batch_start},
        {"batch_end", t.batch_end},
        {"steps_per_phase", t.steps_per_phase},
        {"progressive", t.progressive_enabled()},
        {"posthoc_encoder_steps", t.posthoc_encoder_steps},
        {"detach_inner_sample", t.detach_inner_sample},
        {"latent_target", t.latent_target == LatentTarget::Raw ? "raw" : "unit"},
        {"encoder_loss_weight", t.encoder_loss_weight},
        {"log_every", t.log_every},
    };
    json root = {
        {"seed", c.seed},
        {"out", c.out},
        {"jobs", c.jobs},
        {"data",
         {{"resolution", c.corpus.shapes.resolution},
          {"channels", c.corpus.shapes.channels},
          {"normal_family", std::string(to_string(c.corpus.shapes.normal_family))},
          {"anomaly_families", families},
          {"noise", c.corpus.shapes.noise},
          {"train_normals", c.corpus.train_normals},
          {"anomaly_pool", c.corpus.anomaly_pool},
          {"test_normals", c.corpus.test_normals},
          {"test_anomalies", c.corpus.test_anomalies},
          {"rotations", c.corpus.rotations},
          {"gamma", c.gamma}}},
        {"train", train},
        {"score", {{"lambda", c.score.lambda}, {"alpha", c.score.alpha}}},
        {"sweep",
         {{"gammas", c.sweep.gammas},
          {"modes", modes},
          {"variants", variants},
          {"seeds", c.sweep.seeds},
          {"step_budget", c.sweep.step_budget}}},
        {"evaluate", {{"bins", c.evaluate.bins}, {"variant", std::string(to_string(c.evaluate.variant))}}},
    };
    return root.dump(2) + "\n";
}

}  // namespace ganad

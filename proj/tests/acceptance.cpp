// Acceptance runner: one PASS/FAIL line per criterion, details indented
// beneath. Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ganad/checkpoint.hpp"
#include "ganad/cli.hpp"
#include "ganad/config.hpp"
#include "ganad/evaluation.hpp"
#include "ganad/scoring.hpp"
#include "ganad/training.hpp"
#include "gradcheck.hpp"

using namespace ganad;
namespace fs = std::filesystem;
using V = Var<double>;
using T = Tensor<double>;

namespace {

int failures = 0;

void verdict(int id, bool ok, const std::string& summary)
{
    std::cout << "criterion " << id << ": " << (ok ? "PASS" : "FAIL") << "  " << summary << std::endl;
    failures += ok ? 0 : 1;
}

void detail(const std::string& line)
{
    std::cout << "    " << line << std::endl;
}

std::string fmt(double v, int precision = 4)
{
    std::ostringstream os;
    os.precision(precision);
    os << std::fixed << v;
    return os.str();
}

std::string sci(double v)
{
    std::ostringstream os;
    os.precision(2);
    os << std::scientific << v;
    return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1: oracle suite

struct OracleSuite {
    int total = 0;
    std::vector<std::string> failed;

    void check(const std::string& name, double got, double want, double tol)
    {
        ++total;
        if (!(std::abs(got - want) <= tol))
            failed.push_back(name + ": got " + std::to_string(got) + ", want " + std::to_string(want));
    }
};

Image flat(std::vector<float> v, int w, int h)
{
    return Image(w, h, 1, std::move(v));
}

NetFn<double> linear_critic(std::vector<double> u)
{
    return [u](const V& x) {
        T w(x.shape());
        const std::size_t per = w.size() / static_cast<std::size_t>(x.shape()[0]);
        for (std::size_t i = 0; i < w.size(); ++i)
            w.data[i] = u[i % per];
        return ag::sum_rows(ag::mul_const(x, w));
    };
}

T rows(int n, int d, double start)
{
    T t({n, d});
    for (std::size_t i = 0; i < t.size(); ++i)
        t.data[i] = start + 0.1 * static_cast<double>(i);
    return t;
}

void criterion_1()
{
    OracleSuite s;
    constexpr double exact = 1e-9, numeric = 1e-6;

    auto w = [](std::vector<float> v) { return minmax_normalize(flat(v, static_cast<int>(v.size()), 1)).values; };
    const auto w1 = w({0, 2, 4});
    s.check("w([0,2,4])[1]", w1[1], 0.5, exact);
    s.check("w([0,2,4])[2]", w1[2], 1.0, exact);
    const auto w2 = w({-1, 1});
    s.check("w([-1,1])[0]", w2[0], 0.0, exact);
    s.check("w([-1,1])[1]", w2[1], 1.0, exact);
    for (float v : w({0.3f, 0.3f, 0.3f}))
        s.check("w(constant)", v, 0.0, exact);

    const auto q = flat({0, 1, 0, 1}, 2, 2);
    const auto half = flat({0, 0.5f, 0, 0.5f}, 2, 2);
    s.check("L_n(Q,Q)", residual_normalized(q, q), 0.0, exact);
    s.check("L_n(Q,0.5Q)", residual_normalized(q, half), 0.0, exact);
    s.check("L_n(checker, inverse)", residual_normalized(flat({0, 1, 1, 0}, 2, 2), flat({1, 0, 0, 1}, 2, 2)), 0.5,
            exact);

    s.check("L_r(Q,Q)", residual_raw(q, q), 0.0, exact);
    s.check("L_r([0,0],[1,0])", residual_raw(flat({0, 0}, 2, 1), flat({1, 0}, 2, 1)), 1.0, exact);
    s.check("L_r(Q,0.5Q)", residual_raw(q, half), std::sqrt(0.5), exact);

    s.check("L_o(0)", origin_distance(LatentVector{{0, 0, 0, 0}}), 0.0, exact);
    s.check("L_o(1,1,1,1)", origin_distance(LatentVector{{1, 1, 1, 1}}), -1.0, exact);
    std::vector<float> unit(512, 0.0f);
    unit[0] = 1.0f;
    s.check("L_o(unit, N_z=512)", origin_distance(LatentVector{unit}), -0.04419, 1e-5);

    s.check("a(lambda=0.05)", combined_score(0.02, -0.5, 0.05), -0.474, exact);
    s.check("a(lambda=1)", combined_score(0.3, -0.7, 1.0), 0.3, exact);
    s.check("a(lambda=0)", combined_score(0.3, -0.7, 0.0), -0.7, exact);

    const NetFn<double> identity = [](const V& v) { return v; };
    const NetFn<double> doubling = [](const V& v) { return ag::scale(v, 2.0); };
    const V z = V::constant(T({1, 4}, {1, 0, 0, 0}));
    for (auto [mode, name] : {std::pair{EncoderMode::JointImageSpace, "d_I"},
                              std::pair{EncoderMode::JointLatentSpace, "d_z"}}) {
        s.check(std::string(name) + "(identity stubs)",
                generator_encoder_loss<double>(identity, {}, identity, z, z, mode, false).encoder_loss, 0.0, exact);
        s.check(std::string(name) + "(E = 2x)",
                generator_encoder_loss<double>(identity, {}, doubling, z, z, mode, false).encoder_loss, 0.25, exact);
    }

    const NetFn<double> constant = [](const V& x) { return ag::add_scalar(ag::scale(ag::sum_rows(x), 0.0), 3.5); };
    const auto flat_critic =
        critic_loss<double>(constant, V::constant(rows(3, 4, 0)), V::constant(rows(3, 4, 1)), T({3}, 0.5), 10.0);
    s.check("W(constant critic)", flat_critic.wasserstein, 0.0, exact);
    s.check("GP(constant critic)", flat_critic.gradient_penalty, 1.0, numeric);
    s.check("GP(<u,x>, u=(1/2,...))", gradient_penalty<double>(linear_critic({0.5, 0.5, 0.5, 0.5}), rows(5, 4, -1)).item(),
            0.0, numeric);
    s.check("GP(<u,x>, u=e1)", gradient_penalty<double>(linear_critic({1, 0, 0, 0}), rows(5, 4, -1)).item(), 0.0,
            numeric);

    s.check("N_a(gamma=0)", static_cast<double>(ContaminationSpec::make(0.0, 1000, 1).n_anomaly), 0, exact);
    s.check("N_a(1000, 0.02)", static_cast<double>(ContaminationSpec::make(0.02, 1000, 1).n_anomaly), 20, exact);
    s.check("N_a(525657, 0.02)", static_cast<double>(ContaminationSpec::make(0.02, 525657, 1).n_anomaly), 10728,
            exact);

    verdict(1, s.failed.empty(), std::to_string(s.total - static_cast<int>(s.failed.size())) + "/" +
                                     std::to_string(s.total) + " oracle cases");
    for (const auto& f : s.failed)
        detail(f);
}

// ---------------------------------------------------------------------------
// 2: AUC vs brute-force Mann-Whitney

void criterion_2()
{
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = std::uniform_int_distribution<int>(2, 200)(rng);
        const int levels = std::uniform_int_distribution<int>(1, 40)(rng);
        std::vector<double> s(static_cast<std::size_t>(n));
        std::vector<Label> l(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            s[i] = std::uniform_int_distribution<int>(0, levels)(rng) * 0.37 - 3.0;
            l[i] = rng() % 2 ? Label::Anomaly : Label::Normal;
        }
        l[0] = Label::Anomaly;
        l[1] = Label::Normal;
        double wins = 0.0, pairs = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (l[i] == Label::Anomaly && l[j] == Label::Normal) {
                    pairs += 1;
                    wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
                }
        worst = std::max(worst, std::abs(compute_roc(s, l).auc - wins / pairs));
    }
    verdict(2, worst <= 1e-9, "200 random sets, max |AUC - Mann-Whitney| = " + std::to_string(worst));
}

// ---------------------------------------------------------------------------
// 3: gradient check

void criterion_3()
{
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::size_t max_params = 0, entries = 0, kinked = 0, unresolved = 0;
    std::string worst_case;
    auto note = [&](const testing::GradCheck& r, const std::string& what) {
        entries += r.parameters;
        kinked += r.kinked;
        unresolved += r.unresolved;
        if (r.relative_error > worst || std::isnan(r.relative_error)) {
            worst = std::isnan(r.relative_error) ? INFINITY : r.relative_error;
            worst_case = what;
        }
    };
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto p = testing::make_toy(seed);
        for (const auto* set : {&p.bundle.generator, &p.bundle.discriminator, &p.bundle.encoder})
            max_params = std::max(max_params, testing::count_parameters(*set));
        note(testing::check_critic_loss(seed), "critic seed " + std::to_string(seed));
        note(testing::check_encoder_loss(seed, EncoderMode::JointImageSpace), "d_I seed " + std::to_string(seed));
        note(testing::check_encoder_loss(seed, EncoderMode::JointLatentSpace), "d_z seed " + std::to_string(seed));
    }
    const double secs = seconds_since(t0);
    const bool ok = worst < 1e-4 && max_params <= 500 && secs < 60.0 && unresolved == 0;
    verdict(3, ok, "10 seeds x {critic+GP, d_I, d_z}, max relative error " + sci(worst) + " (" +
                       worst_case + "), largest net " + std::to_string(max_params) + " params, " + fmt(secs, 1) +
                       " s");
    detail(std::to_string(entries) + " parameter entries checked; " + std::to_string(kinked) +
           " crossed an activation kink under the central stencil and used a one-sided or shorter one; " +
           std::to_string(unresolved) + " unresolved");
}

// ---------------------------------------------------------------------------
// 4-7: end-to-end runs

double median_of(const SweepResult& r, double gamma, EncoderMode mode)
{
    return r.median_auc(gamma, mode, ScoreVariant::Combined);
}

std::string seed_aucs(const SweepResult& r, double gamma, EncoderMode mode, ScoreVariant v = ScoreVariant::Combined)
{
    std::string out;
    for (const auto& c : r.cells)
        if (c.gamma == gamma && c.mode == mode && c.variant == v)
            out += (out.empty() ? "" : " ") + (c.ok ? fmt(c.auc) : std::string("failed"));
    return out;
}

void criteria_4_to_7(const RunConfig& base)
{
    const std::vector<std::uint64_t> seeds{1, 2, 3};
    SweepConfig sweep = base.sweep;
    sweep.seeds = seeds;
    sweep.jobs = 1;
    sweep.variants = {ScoreVariant::ResidualNormalized, ScoreVariant::OriginDistance, ScoreVariant::ResidualRaw,
                      ScoreVariant::Combined};
    const long steps = sweep.steps_per_run();
    std::cout << "    training: 16x16 corpus, " << steps << " outer steps per run, seeds 1-3, N_z "
              << sweep.train.model.latent_dim << std::endl;

    SweepHooks hooks;
    hooks.on_run = [](const SweepRun& r) {
        std::cout << "    run gamma=" << r.gamma << " mode=" << to_string(r.mode) << " seed=" << r.seed << ": "
                  << (r.ok ? "ok" : "failed: " + r.error) << " (" << fmt(r.seconds, 0) << " s)" << std::endl;
    };

    // Joint image-space runs at both contamination levels, latent-space runs at gamma = 0.
    sweep.gammas = {0.0, 0.02};
    sweep.modes = {EncoderMode::JointImageSpace};
    const auto image_space = run_sweep(sweep, hooks);
    sweep.gammas = {0.0};
    sweep.modes = {EncoderMode::JointLatentSpace};
    const auto latent_space = run_sweep(sweep, hooks);

    // Reference: the same seeds scored before any training.
    auto untrained = sweep;
    untrained.modes = {EncoderMode::JointImageSpace};
    untrained.train.steps_per_phase = 0;
    const auto initial = run_sweep(untrained);

    const auto di = EncoderMode::JointImageSpace;
    const double auc0 = median_of(image_space, 0.0, di);
    double slowest = 0.0;
    for (const auto& r : image_space.runs)
        slowest = std::max(slowest, r.seconds);
    for (const auto& r : latent_space.runs)
        slowest = std::max(slowest, r.seconds);
    verdict(4, auc0 >= 0.85 && steps <= 5000 && slowest <= 1800.0,
            "gamma=0, d_I, combined score: median AUC " + fmt(auc0) + " (need >= 0.85), " + std::to_string(steps) +
                " steps, slowest run " + fmt(slowest, 0) + " s");
    detail("per seed: " + seed_aucs(image_space, 0.0, di));
    for (auto v : {ScoreVariant::ResidualNormalized, ScoreVariant::OriginDistance, ScoreVariant::ResidualRaw})
        detail(std::string(to_string(v)) + " per seed: " + seed_aucs(image_space, 0.0, di, v));
    detail("untrained model, combined score per seed: " + seed_aucs(initial, 0.0, di));

    const double auc2 = median_of(image_space, 0.02, di);
    verdict(5, auc0 - auc2 <= 0.05,
            "median AUC gamma=0 " + fmt(auc0) + " vs gamma=0.02 " + fmt(auc2) + ", drop " + fmt(auc0 - auc2) +
                " (need <= 0.05)");
    detail("gamma=0.02 per seed: " + seed_aucs(image_space, 0.02, di));

    const double aucz = median_of(latent_space, 0.0, EncoderMode::JointLatentSpace);
    verdict(6, auc0 >= aucz, "median AUC d_I " + fmt(auc0) + " vs d_z " + fmt(aucz));
    detail("d_z per seed: " + seed_aucs(latent_space, 0.0, EncoderMode::JointLatentSpace));

    int closer = 0;
    std::string per_seed;
    for (const auto& r : image_space.runs)
        if (r.gamma == 0.0 && r.ok) {
            const bool below = r.anomaly_norms.median < r.normal_norms.median;
            closer += below;
            per_seed += " seed " + std::to_string(r.seed) + ": anomaly " + fmt(r.anomaly_norms.median) +
                        " vs normal " + fmt(r.normal_norms.median) + ";";
        }
    verdict(7, closer >= 2, std::to_string(closer) + "/3 seeds with median anomaly |z| below median normal |z|");
    detail(per_seed.substr(1));
}

// ---------------------------------------------------------------------------
// 8-9: checkpoint contract and determinism

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

// Drops the wall_time column (last field) of every row.
std::string without_wall_time(const std::string& log)
{
    std::istringstream in(log);
    std::string line, out;
    while (std::getline(in, line))
        out += line.substr(0, line.rfind(',')) + "\n";
    return out;
}

struct TreeDiff {
    std::size_t files = 0;
    std::vector<std::string> differing;
};

TreeDiff compare_runs(const fs::path& a, const fs::path& b)
{
    TreeDiff d;
    std::vector<fs::path> rel;
    for (const auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file())
            rel.push_back(fs::relative(e.path(), a));
    for (const auto& e : fs::recursive_directory_iterator(b))
        if (e.is_regular_file() && !fs::exists(a / fs::relative(e.path(), b)))
            d.differing.push_back(fs::relative(e.path(), b).string() + " (only in second run)");
    for (const auto& r : rel) {
        ++d.files;
        std::string x = slurp(a / r), y = fs::exists(b / r) ? slurp(b / r) : std::string("\x01missing");
        if (r.filename() == "train_log.csv") {
            x = without_wall_time(x);
            y = without_wall_time(y);
        }
        if (x != y)
            d.differing.push_back(r.string());
    }
    return d;
}

fs::path criterion_9(const fs::path& work)
{
    fs::remove_all(work);
    fs::create_directories(work);
    nlohmann::json cfg = {{"seed", 17}, {"train", {{"steps_per_phase", 20}, {"log_every", 5}}}};
    std::ofstream(work / "config.json") << cfg.dump(2);
    // Both runs write to the same --out path (echoed into config.json), then
    // move aside for comparison.
    const auto out = work / "run", run1 = work / "run1", run2 = work / "run2";
    int codes = 0;
    for (const auto& dest : {run1, run2}) {
        codes += run_cli({"train", "--config", (work / "config.json").string(), "--out", out.string()});
        fs::rename(out, dest);
    }
    const auto diff = compare_runs(run1, run2);
    const bool ok = codes == 0 && diff.differing.empty() && fs::exists(run1 / "checkpoint" / "manifest.json");
    verdict(9, ok, "two cmd_train runs, " + std::to_string(diff.files) + " files compared (train_log wall_time "
                       "excluded), " + std::to_string(diff.differing.size()) + " differ");
    for (const auto& f : diff.differing)
        detail("differs: " + f);
    return run1;
}

void criterion_8(const fs::path& run, const fs::path& work)
{
    const auto full_dir = run / "checkpoint";
    const auto stripped_dir = work / "no_discriminator";
    fs::remove_all(stripped_dir);
    fs::copy(full_dir, stripped_dir, fs::copy_options::recursive);
    // Remove θ_D from disk: manifest entry and tensor files.
    auto manifest = nlohmann::json::parse(slurp(stripped_dir / "manifest.json"));
    manifest["networks"].erase("discriminator");
    std::ofstream(stripped_dir / "manifest.json") << manifest.dump(2);
    std::size_t removed = 0;
    for (const auto& e : fs::directory_iterator(stripped_dir))
        if (e.path().filename().string().rfind("discriminator.", 0) == 0)
            removed += fs::remove(e.path());

    const auto full = load_checkpoint(full_dir);
    const auto stripped = load_checkpoint(stripped_dir);
    const auto data = read_dataset(run / "dataset");
    std::vector<Image> images;
    for (const auto& s : data.test)
        images.push_back(s.image);
    const auto a = score_batch(full, images, ScoreConfig());
    const auto b = score_batch(stripped, images, ScoreConfig());
    bool identical = a.size() == b.size();
    for (std::size_t i = 0; identical && i < a.size(); ++i)
        identical = a[i].z_hat == b[i].z_hat && a[i].reconstruction == b[i].reconstruction &&
                    std::memcmp(&a[i].score, &b[i].score, sizeof(double)) == 0 &&
                    std::memcmp(&a[i].residual_normalized, &b[i].residual_normalized, sizeof(double)) == 0 &&
                    std::memcmp(&a[i].origin_distance, &b[i].origin_distance, sizeof(double)) == 0;
    identical = identical && scores_csv(a) == scores_csv(b);
    verdict(8, identical && !stripped.has_discriminator() && removed > 0,
            std::to_string(a.size()) + " test queries scored with and without theta_D (" + std::to_string(removed) +
                " tensor files removed): " + (identical ? "bit-identical" : "DIFFERENT"));
}

}  // namespace

// usage: acceptance [work_dir] [criteria, e.g. 1,2,3]   (default: all)
int main(int argc, char** argv)
{
    const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "ganad_acceptance";
    std::vector<bool> wanted(10, argc <= 2);
    if (argc > 2) {
        std::istringstream list(argv[2]);
        for (std::string item; std::getline(list, item, ',');)
            wanted.at(static_cast<std::size_t>(std::stoi(item))) = true;
    }
    const auto t0 = std::chrono::steady_clock::now();
    auto run = [&](std::vector<int> ids, const std::function<void()>& f) {
        if (!wanted[static_cast<std::size_t>(ids.front())])
            return;
        try {
            f();
        } catch (const std::exception& e) {
            for (int id : ids)
                verdict(id, false, std::string("error: ") + e.what());
        }
    };
    run({1}, criterion_1);
    run({2}, criterion_2);
    run({3}, criterion_3);
    fs::path run1 = work / "run1";
    run({9}, [&] { run1 = criterion_9(work); });
    run({8}, [&] {
        if (!fs::exists(run1))
            run1 = criterion_9(work);
        criterion_8(run1, work);
    });
    run({4, 5, 6, 7}, [] {
        auto config = parse_run_config("{}");
        config.validate();
        criteria_4_to_7(config);
    });
    std::cout << "acceptance: " << failures << " criteria failed, " << fmt(seconds_since(t0), 0) << " s total"
              << std::endl;
    return failures;
}

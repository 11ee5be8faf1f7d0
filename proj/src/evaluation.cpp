#include "ganad/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "ganad/errors.hpp"

namespace ganad {

RocResult compute_roc(std::span<const double> scores, std::span<const Label> labels)
{
    if (scores.size() != labels.size())
        throw std::invalid_argument("compute_roc: " + std::to_string(scores.size()) + " scores but " +
                                    std::to_string(labels.size()) + " labels");
    RocResult roc;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i]))
            throw NonFiniteError("compute_roc: non-finite score at row " + std::to_string(i));
        (labels[i] == Label::Anomaly ? roc.positives : roc.negatives) += 1;
    }
    if (roc.positives == 0 || roc.negatives == 0)
        throw std::invalid_argument("compute_roc: need at least one normal and one anomalous sample");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    const double P = static_cast<double>(roc.positives);
    const double N = static_cast<double>(roc.negatives);
    roc.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::size_t tp = 0, fp = 0;
    double area = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        const double s = scores[order[i]];
        const std::size_t tp0 = tp, fp0 = fp;
        for (; i < order.size() && scores[order[i]] == s; ++i)
            (labels[order[i]] == Label::Anomaly ? tp : fp) += 1;
        // trapezoid in count space, normalized once at the end
        area += static_cast<double>(fp - fp0) * 0.5 * static_cast<double>(tp + tp0);
        roc.points.push_back({static_cast<double>(fp) / N, static_cast<double>(tp) / P, s});
    }
    roc.auc = area / (P * N);
    return roc;
}

double quantile(std::vector<double> values, double q)
{
    if (values.empty())
        throw std::invalid_argument("quantile of empty set");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double f = pos - static_cast<double>(lo);
    return values[lo] + f * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

NormStats norm_stats(const std::vector<double>& norms)
{
    NormStats s;
    s.count = norms.size();
    if (norms.empty())
        return s;
    s.mean = std::accumulate(norms.begin(), norms.end(), 0.0) / static_cast<double>(norms.size());
    s.median = quantile(norms, 0.5);
    s.q1 = quantile(norms, 0.25);
    s.q3 = quantile(norms, 0.75);
    return s;
}

Projection pca_2d(const Eigen::MatrixXd& x)
{
    if (x.rows() == 0)
        throw std::invalid_argument("pca_2d: no samples");
    Projection p;
    p.mean = x.colwise().mean().transpose();
    const Eigen::MatrixXd centered = x.rowwise() - p.mean.transpose();
    const Eigen::MatrixXd cov = centered.transpose() * centered / std::max<double>(1.0, static_cast<double>(x.rows()));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("pca_2d: eigen decomposition failed");
    const auto d = x.cols();
    p.components = Eigen::MatrixXd::Zero(d, 2);
    // eigenvalues come in increasing order
    for (Eigen::Index k = 0; k < std::min<Eigen::Index>(2, d); ++k) {
        Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - k);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0)
            v = -v;
        p.components.col(k) = v;
    }
    p.coords = centered * p.components;
    return p;
}

LatentAnalysis analyze_latents(std::vector<LatentSample> samples, int bins)
{
    if (samples.empty())
        throw std::invalid_argument("latent analysis needs at least one sample");
    if (bins < 1)
        throw std::invalid_argument("latent analysis needs at least one bin");
    LatentAnalysis a;
    a.latent_dim = static_cast<int>(samples.front().z.size());
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : samples) {
        if (static_cast<int>(s.z.size()) != a.latent_dim)
            throw std::invalid_argument("latent analysis: inconsistent latent sizes");
        for (float v : s.z) {
            lo = std::min<double>(lo, v);
            hi = std::max<double>(hi, v);
        }
    }
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
    std::vector<double> edges(bins + 1);
    for (int i = 0; i <= bins; ++i)
        edges[i] = lo + (hi - lo) * i / bins;

    std::map<Label, std::vector<double>> norms;
    Eigen::MatrixXd x(samples.size(), a.latent_dim);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto& s = samples[i];
        auto& h = a.histograms[s.label];
        if (h.counts.empty()) {
            h.edges = edges;
            h.counts.assign(bins, 0);
        }
        double sq = 0.0;
        for (int j = 0; j < a.latent_dim; ++j) {
            const double v = s.z[j];
            sq += v * v;
            x(i, j) = v;
            auto b = static_cast<int>((v - lo) / (hi - lo) * bins);
            h.counts[std::clamp(b, 0, bins - 1)] += 1;
        }
        s.norm = std::sqrt(sq);
        norms[s.label].push_back(s.norm);
    }
    for (const auto& [label, v] : norms)
        a.norms[label] = norm_stats(v);
    const auto proj = pca_2d(x);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        samples[i].pc1 = proj.coords(i, 0);
        samples[i].pc2 = proj.coords(i, 1);
    }
    a.samples = std::move(samples);
    return a;
}

LatentAnalysis latent_analysis(const ModelBundle& bundle, const LabeledDataset& eval_set, int bins)
{
    if (eval_set.empty())
        throw std::invalid_argument("latent analysis on an empty set");
    if (!bundle.frozen)
        throw std::logic_error("latent analysis requires a frozen bundle");
    std::vector<Image> images;
    images.reserve(eval_set.size());
    for (const auto& s : eval_set)
        images.push_back(s.image);
    std::vector<LatentSample> samples;
    samples.reserve(eval_set.size());
    constexpr std::size_t chunk = 64;
    for (std::size_t start = 0; start < images.size(); start += chunk) {
        const auto n = std::min(chunk, images.size() - start);
        auto z = encode_batch(bundle, std::span<const Image>(images).subspan(start, n));
        for (std::size_t i = 0; i < n; ++i)
            samples.push_back({eval_set[start + i].source_id, eval_set[start + i].label, std::move(z[i].values)});
    }
    return analyze_latents(std::move(samples), bins);
}

void SweepConfig::validate() const
{
    train.validate();
    score.validate();
    if (gammas.empty() || modes.empty() || variants.empty() || seeds.empty())
        throw std::invalid_argument("sweep grid must have at least one gamma, mode, variant and seed");
    for (double g : gammas)
        if (!(g >= 0.0 && g < 1.0))
            throw std::invalid_argument("sweep gamma must lie in [0, 1)");
    if (corpus.shapes.resolution != train.model.target_resolution)
        throw std::invalid_argument("corpus resolution " + std::to_string(corpus.shapes.resolution) +
                                    " differs from model target resolution " +
                                    std::to_string(train.model.target_resolution));
    if (corpus.shapes.channels != train.model.image_channels)
        throw std::invalid_argument("corpus channels differ from model image channels");
    if (jobs < 1)
        throw std::invalid_argument("jobs must be >= 1");
    const long total = steps_per_run() * static_cast<long>(gammas.size() * modes.size() * seeds.size());
    if (step_budget > 0 && total > step_budget)
        throw std::invalid_argument("sweep needs " + std::to_string(total) + " training steps, budget is " +
                                    std::to_string(step_budget));
}

long SweepConfig::steps_per_run() const
{
    long steps = 0;
    for (const auto& p : plan_phases(train))
        steps += p.steps;
    const bool posthoc = std::find(modes.begin(), modes.end(), EncoderMode::PostHoc) != modes.end();
    if (posthoc)
        steps += train.posthoc_encoder_steps > 0 ? train.posthoc_encoder_steps : train.steps_per_phase;
    return steps;
}

double SweepResult::median_auc(double gamma, EncoderMode mode, ScoreVariant variant) const
{
    std::vector<double> v;
    for (const auto& c : cells)
        if (c.ok && c.gamma == gamma && c.mode == mode && c.variant == variant)
            v.push_back(c.auc);
    return v.empty() ? std::numeric_limits<double>::quiet_NaN() : median(std::move(v));
}

RunOutcome train_and_score(const SweepConfig& config, double gamma, EncoderMode mode, std::uint64_t seed)
{
    CorpusConfig corpus = config.corpus;
    corpus.shapes.seed = seed;
    const StoredDataset data = make_stored_dataset(corpus, gamma);

    TrainConfig tc = config.train;
    tc.encoder_mode = mode;
    tc.seed = seed;
    auto trained = train(data.train, tc);

    RunOutcome out;
    std::vector<Image> images;
    images.reserve(data.test.size());
    for (const auto& s : data.test) {
        images.push_back(s.image);
        out.labels.push_back(s.label);
    }
    out.reports = score_batch(trained.bundle, images, config.score);
    for (std::size_t i = 0; i < out.reports.size(); ++i)
        out.reports[i].source_id = data.test[i].source_id;
    out.bundle = std::move(trained.bundle);
    return out;
}

SweepResult run_sweep(const SweepConfig& config, const SweepHooks& hooks)
{
    config.validate();
    struct Coord {
        double gamma;
        EncoderMode mode;
        std::uint64_t seed;
    };
    std::vector<Coord> coords;
    for (double g : config.gammas)
        for (auto m : config.modes)
            for (auto s : config.seeds)
                coords.push_back({g, m, s});

    SweepResult result;
    result.steps_per_run = config.steps_per_run();
    result.runs.resize(coords.size());
    std::vector<std::vector<double>> aucs(coords.size());

    std::atomic<std::size_t> next{0};
    std::mutex hook_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < coords.size(); i = next++) {
            const auto& c = coords[i];
            SweepRun run;
            run.gamma = c.gamma;
            run.mode = c.mode;
            run.seed = c.seed;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                const auto outcome = train_and_score(config, c.gamma, c.mode, c.seed);
                for (auto v : config.variants) {
                    std::vector<double> s;
                    for (const auto& r : outcome.reports)
                        s.push_back(variant_value(r, v));
                    aucs[i].push_back(compute_roc(s, outcome.labels).auc);
                }
                std::vector<double> nn, na;
                for (std::size_t k = 0; k < outcome.reports.size(); ++k)
                    (outcome.labels[k] == Label::Anomaly ? na : nn).push_back(-outcome.reports[k].origin_distance *
                                                                              std::sqrt(static_cast<double>(
                                                                                  config.train.model.latent_dim)));
                run.normal_norms = norm_stats(nn);
                run.anomaly_norms = norm_stats(na);
                run.ok = true;
            } catch (const std::exception& e) {
                run.error = e.what();
            }
            run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            result.runs[i] = run;
            if (hooks.on_run) {
                std::lock_guard lock(hook_mutex);
                hooks.on_run(run);
            }
        }
    };
    const int jobs = std::min<int>(config.jobs, static_cast<int>(coords.size()));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int j = 0; j < jobs; ++j)
            pool.emplace_back(worker);
    }

    for (double g : config.gammas)
        for (auto m : config.modes)
            for (std::size_t vi = 0; vi < config.variants.size(); ++vi)
                for (auto s : config.seeds) {
                    const auto it = std::find_if(coords.begin(), coords.end(), [&](const Coord& c) {
                        return c.gamma == g && c.mode == m && c.seed == s;
                    });
                    const auto i = static_cast<std::size_t>(it - coords.begin());
                    const auto& run = result.runs[i];
                    SweepCell cell;
                    cell.gamma = g;
                    cell.mode = m;
                    cell.variant = config.variants[vi];
                    cell.seed = s;
                    cell.ok = run.ok;
                    if (run.ok)
                        cell.auc = aucs[i][vi];
                    else
                        cell.error = run.error;
                    result.cells.push_back(cell);
                }
    return result;
}

namespace {

std::ostringstream csv_stream()
{
    std::ostringstream os;
    os << std::setprecision(10);
    return os;
}

}  // namespace

std::string roc_csv(const RocResult& roc)
{
    auto os = csv_stream();
    os << "fpr,tpr,threshold\n";
    for (const auto& p : roc.points) {
        os << p.fpr << ',' << p.tpr << ',';
        if (std::isinf(p.threshold))
            os << "inf";
        else
            os << p.threshold;
        os << '\n';
    }
    return os.str();
}

std::string sweep_csv(const SweepResult& result)
{
    auto os = csv_stream();
    os << "gamma,mode,variant,seed,auc\n";
    for (const auto& c : result.cells) {
        os << c.gamma << ',' << to_string(c.mode) << ',' << to_string(c.variant) << ',' << c.seed << ',';
        if (c.ok)
            os << c.auc;
        else
            os << "failed";
        os << '\n';
    }
    return os.str();
}

std::string latent_coeffs_csv(const LatentAnalysis& a)
{
    auto os = csv_stream();
    os << "label,bin_lo,bin_hi,count\n";
    for (const auto& [label, h] : a.histograms)
        for (std::size_t b = 0; b < h.counts.size(); ++b)
            os << to_string(label) << ',' << h.edges[b] << ',' << h.edges[b + 1] << ',' << h.counts[b] << '\n';
    return os.str();
}

std::string latent_norms_csv(const LatentAnalysis& a)
{
    auto os = csv_stream();
    os << "source_id,label,norm\n";
    for (const auto& s : a.samples)
        os << s.source_id << ',' << to_string(s.label) << ',' << s.norm << '\n';
    return os.str();
}

std::string projection_csv(const LatentAnalysis& a)
{
    auto os = csv_stream();
    os << "source_id,label,pc1,pc2\n";
    for (const auto& s : a.samples)
        os << s.source_id << ',' << to_string(s.label) << ',' << s.pc1 << ',' << s.pc2 << '\n';
    return os.str();
}

std::string latents_csv(const LatentAnalysis& a)
{
    auto os = csv_stream();
    os << "source_id,label";
    for (int j = 0; j < a.latent_dim; ++j)
        os << ",z" << j;
    os << '\n';
    for (const auto& s : a.samples) {
        os << s.source_id << ',' << to_string(s.label);
        for (float v : s.z)
            os << ',' << v;
        os << '\n';
    }
    return os.str();
}

std::string sweep_table_markdown(const SweepResult& result, const SweepConfig& config)
{
    std::ostringstream os;
    os << std::fixed << std::setprecision(3);
    os << "| mode | score |";
    for (double g : config.gammas)
        os << " γ=" << g * 100 << "% |";
    os << "\n|---|---|";
    for (std::size_t i = 0; i < config.gammas.size(); ++i)
        os << "---|";
    os << '\n';
    for (auto m : config.modes)
        for (auto v : config.variants) {
            os << "| " << to_string(m) << " | " << to_string(v) << " |";
            for (double g : config.gammas) {
                const double auc = result.median_auc(g, m, v);
                if (std::isnan(auc))
                    os << " failed |";
                else
                    os << ' ' << auc << " |";
            }
            os << '\n';
        }
    return os.str();
}

}  // namespace ganad

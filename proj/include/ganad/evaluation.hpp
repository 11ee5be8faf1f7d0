#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "ganad/data.hpp"
#include "ganad/model.hpp"
#include "ganad/scoring.hpp"
#include "ganad/training.hpp"

namespace ganad {

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;  // +inf for the (0,0) point
};

// Positives are anomalies, negatives normals.
struct RocResult {
    std::vector<RocPoint> points;
    double auc = 0.0;
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

// Higher score = more anomalous. Equal scores form a single threshold step,
// so the trapezoid AUC gives ties half credit.
RocResult compute_roc(std::span<const double> scores, std::span<const Label> labels);

struct Histogram {
    std::vector<double> edges;  // bins + 1 edges, last bin closed
    std::vector<std::size_t> counts;
};

struct NormStats {
    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
};

// Linear-interpolated quantile of unsorted data, q in [0, 1].
double quantile(std::vector<double> values, double q);
double median(std::vector<double> values);
NormStats norm_stats(const std::vector<double>& norms);

struct Projection {
    Eigen::VectorXd mean;
    Eigen::MatrixXd components;  // N_z x 2, unit columns
    Eigen::MatrixXd coords;      // samples x 2
};

// Top-2 principal components of the rows of x. Component signs are fixed so
// the largest-magnitude entry is positive.
Projection pca_2d(const Eigen::MatrixXd& x);

struct LatentSample {
    std::string source_id;
    Label label = Label::Normal;
    std::vector<float> z;
    double norm = 0.0;
    double pc1 = 0.0;
    double pc2 = 0.0;
};

struct LatentAnalysis {
    int latent_dim = 0;
    std::map<Label, Histogram> histograms;  // shared bin edges
    std::map<Label, NormStats> norms;
    std::vector<LatentSample> samples;
};

LatentAnalysis latent_analysis(const ModelBundle& bundle, const LabeledDataset& eval_set, int bins = 50);
// Same analysis over precomputed latents.
LatentAnalysis analyze_latents(std::vector<LatentSample> samples, int bins = 50);

struct SweepConfig {
    CorpusConfig corpus;
    TrainConfig train;
    ScoreConfig score;
    std::vector<double> gammas{0.0};
    std::vector<EncoderMode> modes{EncoderMode::JointImageSpace};
    std::vector<ScoreVariant> variants{ScoreVariant::ResidualNormalized, ScoreVariant::OriginDistance,
                                       ScoreVariant::ResidualRaw, ScoreVariant::Combined};
    std::vector<std::uint64_t> seeds{1};
    long step_budget = 0;  // max total outer steps across runs; 0 = unlimited
    int jobs = 1;

    void validate() const;
    long steps_per_run() const;
};

// One training run = one (gamma, mode, seed) coordinate.
struct SweepRun {
    double gamma = 0.0;
    EncoderMode mode = EncoderMode::JointImageSpace;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double seconds = 0.0;
    NormStats normal_norms;
    NormStats anomaly_norms;
};

struct SweepCell {
    double gamma = 0.0;
    EncoderMode mode = EncoderMode::JointImageSpace;
    ScoreVariant variant = ScoreVariant::Combined;
    std::uint64_t seed = 0;
    bool ok = false;
    double auc = 0.0;
    std::string error;
};

struct SweepResult {
    std::vector<SweepRun> runs;
    std::vector<SweepCell> cells;  // ordered by (gamma, mode, variant, seed)
    long steps_per_run = 0;

    // Median over successful seeds; NaN when none succeeded.
    double median_auc(double gamma, EncoderMode mode, ScoreVariant variant) const;
};

struct SweepHooks {
    // Called after each run; may be invoked from worker threads.
    std::function<void(const SweepRun&)> on_run;
};

SweepResult run_sweep(const SweepConfig& config, const SweepHooks& hooks = {});

// Trains one sweep run and scores the held-out test split.
struct RunOutcome {
    ModelBundle bundle;
    std::vector<ScoreReport> reports;
    std::vector<Label> labels;
};
RunOutcome train_and_score(const SweepConfig& config, double gamma, EncoderMode mode, std::uint64_t seed);

// Writers for the evaluation artifacts.
std::string roc_csv(const RocResult& roc);
std::string sweep_csv(const SweepResult& result);
std::string latent_coeffs_csv(const LatentAnalysis& analysis);
std::string latent_norms_csv(const LatentAnalysis& analysis);
std::string projection_csv(const LatentAnalysis& analysis);
std::string latents_csv(const LatentAnalysis& analysis);
std::string sweep_table_markdown(const SweepResult& result, const SweepConfig& config);

}  // namespace ganad

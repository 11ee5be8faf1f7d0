#pragma once

#include <span>
#include <string>
#include <vector>

#include "ganad/data.hpp"
#include "ganad/model.hpp"

namespace ganad {

struct ScoreConfig {
    double lambda = 0.05;  // weight of L_n in the combined score
    double alpha = 0.0;    // anomaly iff a > alpha

    ScoreConfig() = default;
    ScoreConfig(double lambda_, double alpha_);
    void validate() const;
};

// Global min/max rescaling to [0,1]; a constant image maps to all zeros.
Image minmax_normalize(const Image& image);
std::vector<double> minmax_normalize(std::span<const double> values);

// L_n = ||w(Q) - w(R)||_2 / N_X
double residual_normalized(const Image& query, const Image& reconstruction);
// L_r = ||Q - R||_2
double residual_raw(const Image& query, const Image& reconstruction);
// L_o = -||z_hat||_2 / sqrt(N_z)
double origin_distance(std::span<const float> z_hat);
double origin_distance(const LatentVector& z_hat);
// a = lambda * L_n + (1 - lambda) * L_o
double combined_score(double residual_normalized, double origin_distance, double lambda);

struct ScoreReport {
    std::string source_id;
    LatentVector z_hat;
    Image reconstruction;
    double residual_normalized = 0.0;  // L_n
    double residual_raw = 0.0;         // L_r
    double origin_distance = 0.0;      // L_o
    double score = 0.0;                // a
    bool is_anomaly = false;
};

// Uses θ_G and θ_E only; the bundle must be frozen and at the query resolution.
ScoreReport anomaly_score(const ModelBundle& bundle, const Image& query, const ScoreConfig& config);
std::vector<ScoreReport> score_batch(const ModelBundle& bundle, std::span<const Image> queries,
                                     const ScoreConfig& config, std::size_t chunk = 64);
// Reports built from already computed (Q, z_hat, G(z_hat)) triples.
ScoreReport make_report(const Image& query, LatentVector z_hat, Image reconstruction, const ScoreConfig& config);

// Score variants compared in the ablation grid.
enum class ScoreVariant { ResidualNormalized, OriginDistance, ResidualRaw, Combined };

std::string_view to_string(ScoreVariant v);
ScoreVariant parse_score_variant(std::string_view text);
double variant_value(const ScoreReport& report, ScoreVariant v);

// CSV with columns source_id,L_n,L_r,L_o,a,is_anomaly.
std::string scores_csv(const std::vector<ScoreReport>& reports);

}  // namespace ganad

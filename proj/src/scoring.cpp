#include "ganad/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "ganad/errors.hpp"

namespace ganad {

namespace {
constexpr double kDegenerateSpan = 1e-12;
}

ScoreConfig::ScoreConfig(double lambda_, double alpha_) : lambda(lambda_), alpha(alpha_) { validate(); }

void ScoreConfig::validate() const
{
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw std::invalid_argument("score weight lambda must lie in [0, 1], got " + std::to_string(lambda));
    if (!std::isfinite(alpha))
        throw std::invalid_argument("threshold alpha must be finite");
}

std::vector<double> minmax_normalize(std::span<const double> values)
{
    std::vector<double> out(values.size(), 0.0);
    if (values.empty())
        return out;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double span = *hi - *lo;
    if (span < kDegenerateSpan)
        return out;
    for (std::size_t i = 0; i < values.size(); ++i)
        out[i] = (values[i] - *lo) / span;
    return out;
}

Image minmax_normalize(const Image& image)
{
    std::vector<double> v(image.values.begin(), image.values.end());
    const auto n = minmax_normalize(std::span<const double>(v));
    Image out(image.width, image.height, image.depth, 0.0f, ValueRange{0.0f, 1.0f});
    for (std::size_t i = 0; i < n.size(); ++i)
        out.values[i] = static_cast<float>(n[i]);
    return out;
}

namespace {

void require_same_shape(const Image& q, const Image& r)
{
    if (!q.same_shape(r) || q.size() != r.size())
        throw std::invalid_argument("query and reconstruction differ in shape");
}

}  // namespace

double residual_normalized(const Image& query, const Image& reconstruction)
{
    require_same_shape(query, reconstruction);
    std::vector<double> q(query.values.begin(), query.values.end());
    std::vector<double> r(reconstruction.values.begin(), reconstruction.values.end());
    const auto wq = minmax_normalize(std::span<const double>(q));
    const auto wr = minmax_normalize(std::span<const double>(r));
    double acc = 0.0;
    for (std::size_t i = 0; i < wq.size(); ++i)
        acc += (wq[i] - wr[i]) * (wq[i] - wr[i]);
    return std::sqrt(acc) / static_cast<double>(wq.size());
}

double residual_raw(const Image& query, const Image& reconstruction)
{
    require_same_shape(query, reconstruction);
    double acc = 0.0;
    for (std::size_t i = 0; i < query.size(); ++i) {
        const double d = static_cast<double>(query.values[i]) - reconstruction.values[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

double origin_distance(std::span<const float> z_hat)
{
    if (z_hat.empty())
        throw std::invalid_argument("origin_distance: empty latent vector");
    double acc = 0.0;
    for (float v : z_hat)
        acc += static_cast<double>(v) * v;
    return -std::sqrt(acc) / std::sqrt(static_cast<double>(z_hat.size()));
}

double origin_distance(const LatentVector& z_hat) { return origin_distance(std::span<const float>(z_hat.values)); }

double combined_score(double ln, double lo, double lambda) { return lambda * ln + (1.0 - lambda) * lo; }

ScoreReport make_report(const Image& query, LatentVector z_hat, Image reconstruction, const ScoreConfig& config)
{
    ScoreReport r;
    r.residual_normalized = residual_normalized(query, reconstruction);
    r.residual_raw = residual_raw(query, reconstruction);
    r.origin_distance = origin_distance(z_hat);
    r.score = combined_score(r.residual_normalized, r.origin_distance, config.lambda);
    r.is_anomaly = r.score > config.alpha;
    r.z_hat = std::move(z_hat);
    r.reconstruction = std::move(reconstruction);
    return r;
}

std::vector<ScoreReport> score_batch(const ModelBundle& bundle, std::span<const Image> queries,
                                     const ScoreConfig& config, std::size_t chunk)
{
    config.validate();
    if (!bundle.frozen)
        throw std::logic_error("scoring requires a frozen bundle (finish training first)");
    const int res = bundle.phase.resolution;
    for (const auto& q : queries)
        if (q.width != res || q.height != res || q.depth != bundle.image_channels())
            throw std::invalid_argument("query " + std::to_string(q.width) + "x" + std::to_string(q.height) + "x" +
                                        std::to_string(q.depth) + " does not match bundle resolution " +
                                        std::to_string(res));
    std::vector<ScoreReport> out;
    out.reserve(queries.size());
    chunk = std::max<std::size_t>(chunk, 1);
    for (std::size_t start = 0; start < queries.size(); start += chunk) {
        const auto part = queries.subspan(start, std::min(chunk, queries.size() - start));
        auto latents = encode_batch(bundle, part);
        auto recon = generate_batch(bundle, latents);
        for (std::size_t i = 0; i < part.size(); ++i)
            out.push_back(make_report(part[i], std::move(latents[i]), std::move(recon[i]), config));
    }
    return out;
}

ScoreReport anomaly_score(const ModelBundle& bundle, const Image& query, const ScoreConfig& config)
{
    return score_batch(bundle, std::span<const Image>(&query, 1), config).front();
}

std::string_view to_string(ScoreVariant v)
{
    switch (v) {
    case ScoreVariant::ResidualNormalized: return "L_n";
    case ScoreVariant::OriginDistance: return "L_o";
    case ScoreVariant::ResidualRaw: return "L_r";
    case ScoreVariant::Combined: return "combined";
    }
    return "?";
}

ScoreVariant parse_score_variant(std::string_view text)
{
    if (text == "L_n")
        return ScoreVariant::ResidualNormalized;
    if (text == "L_o")
        return ScoreVariant::OriginDistance;
    if (text == "L_r")
        return ScoreVariant::ResidualRaw;
    if (text == "combined" || text == "a")
        return ScoreVariant::Combined;
    throw std::invalid_argument("unknown score variant '" + std::string(text) + "'");
}

double variant_value(const ScoreReport& r, ScoreVariant v)
{
    switch (v) {
    case ScoreVariant::ResidualNormalized: return r.residual_normalized;
    case ScoreVariant::OriginDistance: return r.origin_distance;
    case ScoreVariant::ResidualRaw: return r.residual_raw;
    case ScoreVariant::Combined: return r.score;
    }
    return 0.0;
}

std::string scores_csv(const std::vector<ScoreReport>& reports)
{
    std::ostringstream os;
    os << "source_id,L_n,L_r,L_o,a,is_anomaly\n" << std::setprecision(10);
    for (const auto& r : reports)
        os << r.source_id << ',' << r.residual_normalized << ',' << r.residual_raw << ',' << r.origin_distance << ','
           << r.score << ',' << (r.is_anomaly ? 1 : 0) << '\n';
    return os.str();
}

}  // namespace ganad

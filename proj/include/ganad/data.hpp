#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ganad {

struct ValueRange {
    float lo = -1.0f;
    float hi = 1.0f;
    bool operator==(const ValueRange&) const = default;
};

// Channel-major image: values[(c * height + y) * width + x].
struct Image {
    int width = 0;
    int height = 0;
    int depth = 0;
    std::vector<float> values;
    ValueRange range;

    Image() = default;
    Image(int w, int h, int d, float fill = 0.0f, ValueRange r = {});
    Image(int w, int h, int d, std::vector<float> v, ValueRange r = {});

    std::size_t size() const { return values.size(); }
    float& at(int c, int y, int x) { return values[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    float at(int c, int y, int x) const { return values[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    bool same_shape(const Image& o) const { return width == o.width && height == o.height && depth == o.depth; }
    // Checks both Image invariants; throws std::invalid_argument.
    void validate() const;

    bool operator==(const Image&) const = default;
};

enum class Label { Normal, Anomaly };

std::string_view to_string(Label label);
Label parse_label(std::string_view text);

struct LabeledSample {
    Image image;
    Label label = Label::Normal;
    std::string source_id;
    bool operator==(const LabeledSample&) const = default;
};

using LabeledDataset = std::vector<LabeledSample>;

std::size_t count_label(const LabeledDataset& ds, Label label);

// N_a = round(gamma * N_n / (1 - gamma)), rounding half away from zero.
std::size_t anomaly_count(double gamma, std::size_t n_normal);

struct ContaminationSpec {
    double gamma = 0.0;
    std::size_t n_normal = 0;
    std::size_t n_anomaly = 0;
    std::uint64_t seed = 0;

    static ContaminationSpec make(double gamma, std::size_t n_normal, std::uint64_t seed);
    void validate() const;
};

// Label-free training sequence. Nothing in here identifies anomalies.
struct TrainStream {
    std::vector<Image> images;
};

// Which stream positions hold contaminating anomalies. Analysis only.
struct AuditLog {
    std::vector<std::size_t> anomalous_indices;
    std::vector<std::string> source_ids;  // per stream position
};

struct ContaminationResult {
    TrainStream stream;
    AuditLog audit;
};

ContaminationResult contaminate(const LabeledDataset& normals, const LabeledDataset& anomalies,
                                const ContaminationSpec& spec);

enum class ShapeFamily { FilledDisc, Cross, HollowSquare };

std::string_view to_string(ShapeFamily family);
ShapeFamily parse_shape_family(std::string_view text);

struct SyntheticCorpusConfig {
    int resolution = 16;
    int channels = 1;
    ShapeFamily normal_family = ShapeFamily::FilledDisc;
    std::vector<ShapeFamily> anomaly_families{ShapeFamily::Cross, ShapeFamily::HollowSquare};
    std::size_t normals = 0;
    std::size_t anomalies = 0;
    double noise = 0.05;
    std::uint64_t seed = 0;

    void validate() const;
};

bool supported_resolution(int resolution);

// Rasterizes the requested shapes (4x4 supersampled) on a -1 background,
// adds clipped Gaussian noise. Normals first, then anomalies.
LabeledDataset generate_synthetic(const SyntheticCorpusConfig& config);

// Draws one shape of the family into a fresh image; exposed for tests and previews.
Image render_shape(ShapeFamily family, int resolution, int channels, double noise, std::uint64_t seed);

struct IngestOptions {
    int resolution = 16;
    int channels = 1;
    std::optional<int> center_crop;  // square crop (pixels) taken before resizing
    std::string manifest = "manifest.csv";
};

struct IngestResult {
    LabeledDataset dataset;
    std::size_t skipped = 0;
    std::vector<std::string> warnings;
};

// Reads `filename,label` lines from the manifest and decodes the listed PNGs.
// Undecodable entries are skipped and reported.
IngestResult ingest_folder(const std::filesystem::path& folder, const IngestOptions& options);

// Maps an 8-bit intensity onto [-1, 1].
inline float byte_to_unit(std::uint8_t v) { return 2.0f * (static_cast<float>(v) / 255.0f) - 1.0f; }

// Bilinear rotation about the image centre; samples falling outside the
// source are filled with the image minimum.
Image rotate_image(const Image& image, double angle);

using AngleSource = std::function<double()>;

// Each input sample is followed by k rotated copies with the same label.
LabeledDataset augment_rotations(const LabeledDataset& dataset, int k, std::uint64_t seed);
LabeledDataset augment_rotations(const LabeledDataset& dataset, int k, const AngleSource& angles);

// Bilinear resample (box-filtered when shrinking by integer factors).
Image resize_image(const Image& image, int width, int height);

// On-disk dataset: meta.json, one float32 tensor per split, labels.csv for the
// labeled split, audit.csv for the contamination audit.
struct StoredDataset {
    int resolution = 16;
    int channels = 1;
    std::uint64_t seed = 0;
    double gamma = 0.0;
    std::size_t train_normals = 0;
    std::size_t train_anomalies = 0;
    TrainStream train;
    LabeledDataset test;
    std::optional<AuditLog> audit;
};

void write_dataset(const std::filesystem::path& dir, const StoredDataset& ds);
StoredDataset read_dataset(const std::filesystem::path& dir);

// Experiment corpus: normal training pool, anomaly pool for contamination,
// and a labeled test split, each from its own derived seed.
struct CorpusConfig {
    SyntheticCorpusConfig shapes;  // counts ignored; see fields below
    std::size_t train_normals = 1000;
    std::size_t anomaly_pool = 200;
    std::size_t test_normals = 200;
    std::size_t test_anomalies = 200;
    int rotations = 0;  // rotation augmentation of training samples
};

struct Corpus {
    LabeledDataset train_normals;
    LabeledDataset anomaly_pool;
    LabeledDataset test;
};

Corpus build_corpus(const CorpusConfig& config);

// Builds the contaminated training set and the stored layout in one go.
StoredDataset make_stored_dataset(const CorpusConfig& config, double gamma);

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace ganad

#include "ganad/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"
#include "ganad/errors.hpp"
#include "ganad/png_io.hpp"

namespace ganad {

using nlohmann::json;

Image::Image(int w, int h, int d, float fill, ValueRange r)
    : width(w), height(h), depth(d), values(static_cast<std::size_t>(w) * h * d, fill), range(r)
{
}

Image::Image(int w, int h, int d, std::vector<float> v, ValueRange r)
    : width(w), height(h), depth(d), values(std::move(v)), range(r)
{
}

void Image::validate() const
{
    if (width <= 0 || height <= 0 || depth <= 0)
        throw std::invalid_argument("image dimensions must be positive");
    if (values.size() != static_cast<std::size_t>(width) * height * depth)
        throw std::invalid_argument("image holds " + std::to_string(values.size()) + " values, expected " +
                                    std::to_string(static_cast<std::size_t>(width) * height * depth));
    for (float v : values)
        if (!(v >= range.lo && v <= range.hi))
            throw std::invalid_argument("image value " + std::to_string(v) + " outside declared range");
}

std::string_view to_string(Label label) { return label == Label::Normal ? "normal" : "anomaly"; }

Label parse_label(std::string_view text)
{
    if (text == "normal")
        return Label::Normal;
    if (text == "anomaly")
        return Label::Anomaly;
    throw std::invalid_argument("unknown label '" + std::string(text) + "'");
}

std::size_t count_label(const LabeledDataset& ds, Label label)
{
    return static_cast<std::size_t>(
        std::count_if(ds.begin(), ds.end(), [label](const LabeledSample& s) { return s.label == label; }));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream)
{
    // splitmix64 finalizer over (seed, stream)
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Contamination

std::size_t anomaly_count(double gamma, std::size_t n_normal)
{
    if (!(gamma >= 0.0 && gamma < 1.0))
        throw std::invalid_argument("contamination gamma must lie in [0, 1), got " + std::to_string(gamma));
    if (gamma == 0.0)
        return 0;
    return static_cast<std::size_t>(std::round(gamma * static_cast<double>(n_normal) / (1.0 - gamma)));
}

ContaminationSpec ContaminationSpec::make(double gamma, std::size_t n_normal, std::uint64_t seed)
{
    return ContaminationSpec{gamma, n_normal, anomaly_count(gamma, n_normal), seed};
}

void ContaminationSpec::validate() const
{
    if (n_anomaly != anomaly_count(gamma, n_normal))
        throw std::invalid_argument("contamination spec: N_a=" + std::to_string(n_anomaly) +
                                    " inconsistent with gamma and N_n");
}

ContaminationResult contaminate(const LabeledDataset& normals, const LabeledDataset& anomalies,
                                const ContaminationSpec& spec)
{
    spec.validate();
    if (normals.size() != spec.n_normal)
        throw std::invalid_argument("contaminate: " + std::to_string(normals.size()) + " normals supplied, spec says " +
                                    std::to_string(spec.n_normal));
    if (anomalies.size() < spec.n_anomaly)
        throw std::invalid_argument("contaminate: anomaly pool of " + std::to_string(anomalies.size()) +
                                    " cannot supply " + std::to_string(spec.n_anomaly) + " samples");

    for (const auto& s : normals)
        if (s.label != Label::Normal)
            throw std::invalid_argument("contaminate: normal pool contains '" + s.source_id + "' labeled anomaly");
    for (const auto& s : anomalies)
        if (s.label != Label::Anomaly)
            throw std::invalid_argument("contaminate: anomaly pool contains '" + s.source_id + "' labeled normal");

    std::mt19937_64 rng(spec.seed);
    std::vector<std::size_t> pool(anomalies.size());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    // Partial Fisher-Yates: the first n_anomaly entries are a sample without replacement.
    for (std::size_t i = 0; i < spec.n_anomaly; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }

    struct Entry {
        const LabeledSample* sample;
        bool anomalous;
    };
    std::vector<Entry> entries;
    entries.reserve(spec.n_normal + spec.n_anomaly);
    for (const auto& s : normals)
        entries.push_back({&s, false});
    for (std::size_t i = 0; i < spec.n_anomaly; ++i)
        entries.push_back({&anomalies[pool[i]], true});
    std::shuffle(entries.begin(), entries.end(), rng);

    ContaminationResult result;
    result.stream.images.reserve(entries.size());
    result.audit.source_ids.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        result.stream.images.push_back(entries[i].sample->image);
        result.audit.source_ids.push_back(entries[i].sample->source_id);
        if (entries[i].anomalous)
            result.audit.anomalous_indices.push_back(i);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Synthetic shapes

std::string_view to_string(ShapeFamily family)
{
    switch (family) {
    case ShapeFamily::FilledDisc: return "disc";
    case ShapeFamily::Cross: return "cross";
    case ShapeFamily::HollowSquare: return "hollow_square";
    }
    return "?";
}

ShapeFamily parse_shape_family(std::string_view text)
{
    if (text == "disc")
        return ShapeFamily::FilledDisc;
    if (text == "cross")
        return ShapeFamily::Cross;
    if (text == "hollow_square")
        return ShapeFamily::HollowSquare;
    throw std::invalid_argument("unknown shape family '" + std::string(text) + "'");
}

bool supported_resolution(int resolution) { return resolution == 8 || resolution == 16 || resolution == 32; }

void SyntheticCorpusConfig::validate() const
{
    if (!supported_resolution(resolution))
        throw std::invalid_argument("unsupported resolution " + std::to_string(resolution) + " (use 8, 16 or 32)");
    if (channels != 1 && channels != 3)
        throw std::invalid_argument("channels must be 1 or 3");
    if (normals + anomalies == 0)
        throw std::invalid_argument("synthetic corpus needs at least one sample");
    if (anomalies > 0 && anomaly_families.empty())
        throw std::invalid_argument("anomalies requested but no anomaly shape family given");
    if (std::find(anomaly_families.begin(), anomaly_families.end(), normal_family) != anomaly_families.end())
        throw std::invalid_argument("normal and anomaly shape families must be disjoint");
    if (!(noise >= 0.0))
        throw std::invalid_argument("noise level must be >= 0");
}

namespace {

// Shape parameters scale with the resolution; r is the image side.
struct ShapeParams {
    double cx, cy, size, thickness;
};

ShapeParams draw_params(ShapeFamily family, int r, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> centre(0.38 * r, 0.62 * r);
    ShapeParams p{};
    p.cx = centre(rng);
    p.cy = centre(rng);
    switch (family) {
    case ShapeFamily::FilledDisc:
        p.size = std::uniform_real_distribution<double>(0.2 * r, 0.34 * r)(rng);
        break;
    case ShapeFamily::Cross:
        p.size = std::uniform_real_distribution<double>(0.2 * r, 0.36 * r)(rng);
        p.thickness = std::uniform_real_distribution<double>(0.05 * r, 0.1 * r)(rng);
        break;
    case ShapeFamily::HollowSquare:
        p.size = std::uniform_real_distribution<double>(0.2 * r, 0.34 * r)(rng);
        p.thickness = std::uniform_real_distribution<double>(0.06 * r, 0.11 * r)(rng);
        break;
    }
    return p;
}

bool inside(ShapeFamily family, const ShapeParams& p, double x, double y)
{
    const double dx = x - p.cx, dy = y - p.cy;
    switch (family) {
    case ShapeFamily::FilledDisc:
        return dx * dx + dy * dy <= p.size * p.size;
    case ShapeFamily::Cross:
        return (std::abs(dx) <= p.thickness && std::abs(dy) <= p.size) ||
               (std::abs(dy) <= p.thickness && std::abs(dx) <= p.size);
    case ShapeFamily::HollowSquare: {
        const double m = std::max(std::abs(dx), std::abs(dy));
        return m <= p.size && m >= p.size - p.thickness;
    }
    }
    return false;
}

Image rasterize(ShapeFamily family, int r, int channels, double noise, std::mt19937_64& rng)
{
    constexpr int kSuper = 4;
    const ShapeParams p = draw_params(family, r, rng);
    Image img(r, r, channels, -1.0f);
    std::normal_distribution<double> jitter(0.0, 1.0);
    for (int y = 0; y < r; ++y)
        for (int x = 0; x < r; ++x) {
            int hits = 0;
            for (int sy = 0; sy < kSuper; ++sy)
                for (int sx = 0; sx < kSuper; ++sx)
                    hits += inside(family, p, x + (sx + 0.5) / kSuper, y + (sy + 0.5) / kSuper) ? 1 : 0;
            const double coverage = static_cast<double>(hits) / (kSuper * kSuper);
            double v = -1.0 + 2.0 * coverage;
            if (noise > 0.0)
                v += noise * jitter(rng);
            const float clipped = static_cast<float>(std::clamp(v, -1.0, 1.0));
            for (int c = 0; c < channels; ++c)
                img.at(c, y, x) = clipped;
        }
    return img;
}

}  // namespace

Image render_shape(ShapeFamily family, int resolution, int channels, double noise, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    return rasterize(family, resolution, channels, noise, rng);
}

LabeledDataset generate_synthetic(const SyntheticCorpusConfig& config)
{
    config.validate();
    std::mt19937_64 rng(config.seed);
    LabeledDataset out;
    out.reserve(config.normals + config.anomalies);
    for (std::size_t i = 0; i < config.normals; ++i)
        out.push_back({rasterize(config.normal_family, config.resolution, config.channels, config.noise, rng),
                       Label::Normal, "normal_" + std::to_string(i)});
    std::uniform_int_distribution<std::size_t> family_pick(0, config.anomaly_families.empty()
                                                                  ? 0
                                                                  : config.anomaly_families.size() - 1);
    for (std::size_t i = 0; i < config.anomalies; ++i) {
        const ShapeFamily family = config.anomaly_families[family_pick(rng)];
        out.push_back({rasterize(family, config.resolution, config.channels, config.noise, rng), Label::Anomaly,
                       "anomaly_" + std::to_string(i)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Geometry

Image rotate_image(const Image& image, double angle)
{
    const float fill = *std::min_element(image.values.begin(), image.values.end());
    Image out(image.width, image.height, image.depth, fill, image.range);
    const double cx = 0.5 * (image.width - 1), cy = 0.5 * (image.height - 1);
    const double c = std::cos(angle), s = std::sin(angle);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            // inverse mapping: output pixel -> source location
            const double dx = x - cx, dy = y - cy;
            const double sx = c * dx + s * dy + cx;
            const double sy = -s * dx + c * dy + cy;
            if (sx < 0.0 || sy < 0.0 || sx > image.width - 1 || sy > image.height - 1)
                continue;
            const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
            const int x1 = std::min(x0 + 1, image.width - 1), y1 = std::min(y0 + 1, image.height - 1);
            const float fx = static_cast<float>(sx - x0), fy = static_cast<float>(sy - y0);
            for (int ch = 0; ch < image.depth; ++ch) {
                const float top = image.at(ch, y0, x0) * (1.0f - fx) + image.at(ch, y0, x1) * fx;
                const float bottom = image.at(ch, y1, x0) * (1.0f - fx) + image.at(ch, y1, x1) * fx;
                out.at(ch, y, x) = top * (1.0f - fy) + bottom * fy;
            }
        }
    return out;
}

LabeledDataset augment_rotations(const LabeledDataset& dataset, int k, const AngleSource& angles)
{
    if (k < 0)
        throw std::invalid_argument("rotations per sample must be >= 0");
    LabeledDataset out;
    out.reserve(dataset.size() * static_cast<std::size_t>(k + 1));
    for (const auto& sample : dataset) {
        out.push_back(sample);
        for (int r = 1; r <= k; ++r)
            out.push_back({rotate_image(sample.image, angles()), sample.label,
                           sample.source_id + "#rot" + std::to_string(r)});
    }
    return out;
}

LabeledDataset augment_rotations(const LabeledDataset& dataset, int k, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    return augment_rotations(dataset, k, AngleSource([&] { return angle(rng); }));
}

Image resize_image(const Image& image, int width, int height)
{
    if (width <= 0 || height <= 0)
        throw std::invalid_argument("resize target must be positive");
    if (width == image.width && height == image.height)
        return image;
    Image out(width, height, image.depth, 0.0f, image.range);
    if (image.width % width == 0 && image.height % height == 0) {
        const int fx = image.width / width, fy = image.height / height;
        const float inv = 1.0f / static_cast<float>(fx * fy);
        for (int c = 0; c < image.depth; ++c)
            for (int y = 0; y < height; ++y)
                for (int x = 0; x < width; ++x) {
                    float acc = 0.0f;
                    for (int j = 0; j < fy; ++j)
                        for (int i = 0; i < fx; ++i)
                            acc += image.at(c, y * fy + j, x * fx + i);
                    out.at(c, y, x) = acc * inv;
                }
        return out;
    }
    const double sx = static_cast<double>(image.width) / width, sy = static_cast<double>(image.height) / height;
    for (int c = 0; c < image.depth; ++c)
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const double px = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
                const double py = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
                const int x0 = static_cast<int>(px), y0 = static_cast<int>(py);
                const int x1 = std::min(x0 + 1, image.width - 1), y1 = std::min(y0 + 1, image.height - 1);
                const float ax = static_cast<float>(px - x0), ay = static_cast<float>(py - y0);
                const float top = image.at(c, y0, x0) * (1 - ax) + image.at(c, y0, x1) * ax;
                const float bottom = image.at(c, y1, x0) * (1 - ax) + image.at(c, y1, x1) * ax;
                out.at(c, y, x) = std::clamp(top * (1 - ay) + bottom * ay, image.range.lo, image.range.hi);
            }
    return out;
}

// ---------------------------------------------------------------------------
// Folder ingestion

namespace {

std::string trim(std::string s)
{
    const auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

Image raw_to_image(const RawImage& raw, int channels)
{
    Image img(raw.width, raw.height, channels);
    for (int y = 0; y < raw.height; ++y)
        for (int x = 0; x < raw.width; ++x) {
            const std::uint8_t* px =
                raw.pixels.data() + (static_cast<std::size_t>(y) * raw.width + x) * raw.channels;
            for (int c = 0; c < channels; ++c) {
                float v;
                if (raw.channels == channels)
                    v = byte_to_unit(px[c]);
                else if (raw.channels == 1)
                    v = byte_to_unit(px[0]);
                else  // RGB -> gray: channel mean
                    v = 2.0f * ((static_cast<float>(px[0]) + px[1] + px[2]) / (3.0f * 255.0f)) - 1.0f;
                img.at(c, y, x) = v;
            }
        }
    return img;
}

Image center_crop(const Image& img, int size)
{
    if (size > img.width || size > img.height)
        throw std::invalid_argument("crop of " + std::to_string(size) + " exceeds image size");
    const int ox = (img.width - size) / 2, oy = (img.height - size) / 2;
    Image out(size, size, img.depth, 0.0f, img.range);
    for (int c = 0; c < img.depth; ++c)
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                out.at(c, y, x) = img.at(c, y + oy, x + ox);
    return out;
}

}  // namespace

IngestResult ingest_folder(const std::filesystem::path& folder, const IngestOptions& options)
{
    namespace fs = std::filesystem;
    if (!fs::is_directory(folder))
        throw MissingInputError("image folder not found: " + folder.string());
    const fs::path manifest = folder / options.manifest;
    if (!fs::exists(manifest))
        throw MissingInputError("manifest not found: " + manifest.string());
    if (options.channels != 1 && options.channels != 3)
        throw std::invalid_argument("channels must be 1 or 3");
    if (options.resolution <= 0)
        throw std::invalid_argument("resolution must be positive");

    std::ifstream in(manifest);
    IngestResult result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#')
            continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw FormatError(manifest.string() + ":" + std::to_string(line_no) + ": expected 'filename,label'");
        const std::string name = trim(line.substr(0, comma));
        const std::string label_text = trim(line.substr(comma + 1));
        if (line_no == 1 && name == "filename" && label_text == "label")
            continue;
        const Label label = parse_label(label_text);
        try {
            Image img = raw_to_image(read_png(folder / name), options.channels);
            if (options.center_crop)
                img = center_crop(img, *options.center_crop);
            img = resize_image(img, options.resolution, options.resolution);
            result.dataset.push_back({std::move(img), label, name});
        } catch (const Error& e) {
            ++result.skipped;
            result.warnings.push_back(name + ": " + e.what());
        }
    }
    for (const auto& w : result.warnings)
        std::cerr << "warning: skipped " << w << '\n';
    if (result.dataset.empty())
        throw Error("no decodable images listed in " + manifest.string() + " (" + std::to_string(result.skipped) +
                    " skipped)");
    return result;
}

// ---------------------------------------------------------------------------
// Storage

namespace {

std::vector<float> flatten(const std::vector<const Image*>& images, int resolution, int channels)
{
    std::vector<float> out;
    out.reserve(images.size() * static_cast<std::size_t>(resolution) * resolution * channels);
    for (const Image* img : images) {
        if (img->width != resolution || img->height != resolution || img->depth != channels)
            throw std::invalid_argument("dataset image does not match declared resolution/channels");
        out.insert(out.end(), img->values.begin(), img->values.end());
    }
    return out;
}

std::vector<Image> unflatten(const std::vector<float>& values, std::size_t count, int resolution, int channels)
{
    const std::size_t per = static_cast<std::size_t>(resolution) * resolution * channels;
    if (values.size() != count * per)
        throw FormatError("tensor holds " + std::to_string(values.size()) + " floats, expected " +
                          std::to_string(count * per));
    std::vector<Image> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        out.emplace_back(resolution, resolution, channels,
                         std::vector<float>(values.begin() + static_cast<std::ptrdiff_t>(i * per),
                                            values.begin() + static_cast<std::ptrdiff_t>((i + 1) * per)));
    return out;
}

void write_floats(const std::filesystem::path& path, const std::vector<float>& values)
{
    const auto bytes = io::encode_f32(values);
    io::write_bytes(path, bytes);
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const StoredDataset& ds)
{
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    std::vector<const Image*> train, test;
    for (const auto& img : ds.train.images)
        train.push_back(&img);
    for (const auto& s : ds.test)
        test.push_back(&s.image);
    write_floats(dir / "train.f32", flatten(train, ds.resolution, ds.channels));
    write_floats(dir / "test.f32", flatten(test, ds.resolution, ds.channels));

    std::ostringstream labels;
    labels << "index,source_id,label\n";
    for (std::size_t i = 0; i < ds.test.size(); ++i)
        labels << i << ',' << ds.test[i].source_id << ',' << to_string(ds.test[i].label) << '\n';
    io::write_text(dir / "labels.csv", labels.str());

    if (ds.audit) {
        std::ostringstream audit;
        audit << "index,source_id,contaminant\n";
        std::vector<bool> flagged(ds.audit->source_ids.size(), false);
        for (std::size_t idx : ds.audit->anomalous_indices)
            flagged.at(idx) = true;
        for (std::size_t i = 0; i < ds.audit->source_ids.size(); ++i)
            audit << i << ',' << ds.audit->source_ids[i] << ',' << (flagged[i] ? 1 : 0) << '\n';
        io::write_text(dir / "audit.csv", audit.str());
    }

    json meta = {
        {"format_version", 1},
        {"resolution", ds.resolution},
        {"channels", ds.channels},
        {"seed", ds.seed},
        {"gamma", ds.gamma},
        {"value_range", {-1.0, 1.0}},
        {"counts",
         {{"train", ds.train.images.size()},
          {"train_normals", ds.train_normals},
          {"train_anomalies", ds.train_anomalies},
          {"test", ds.test.size()},
          {"test_normals", count_label(ds.test, Label::Normal)},
          {"test_anomalies", count_label(ds.test, Label::Anomaly)}}},
        {"splits",
         {{"train", {{"file", "train.f32"}, {"labeled", false}}},
          {"test", {{"file", "test.f32"}, {"labeled", true}, {"labels", "labels.csv"}}}}},
    };
    io::write_text(dir / "meta.json", meta.dump(2) + "\n");
}

StoredDataset read_dataset(const std::filesystem::path& dir)
{
    namespace fs = std::filesystem;
    if (!fs::exists(dir / "meta.json"))
        throw MissingInputError("dataset meta.json not found in " + dir.string());
    json meta;
    try {
        meta = json::parse(io::read_text(dir / "meta.json"));
    } catch (const json::exception& e) {
        throw FormatError("meta.json: " + std::string(e.what()));
    }
    if (meta.value("format_version", 0) != 1)
        throw FormatError("unsupported dataset format version");
    StoredDataset ds;
    ds.resolution = meta.at("resolution").get<int>();
    ds.channels = meta.at("channels").get<int>();
    ds.seed = meta.at("seed").get<std::uint64_t>();
    ds.gamma = meta.at("gamma").get<double>();
    const auto& counts = meta.at("counts");
    ds.train_normals = counts.at("train_normals").get<std::size_t>();
    ds.train_anomalies = counts.at("train_anomalies").get<std::size_t>();
    const auto train_count = counts.at("train").get<std::size_t>();
    const auto test_count = counts.at("test").get<std::size_t>();

    ds.train.images = unflatten(io::decode_f32(io::read_bytes(dir / "train.f32")), train_count, ds.resolution,
                                ds.channels);
    auto test_images =
        unflatten(io::decode_f32(io::read_bytes(dir / "test.f32")), test_count, ds.resolution, ds.channels);

    std::ifstream labels(dir / "labels.csv");
    if (!labels)
        throw MissingInputError("labels.csv not found in " + dir.string());
    std::string line;
    std::getline(labels, line);  // header
    std::size_t i = 0;
    while (std::getline(labels, line)) {
        if (trim(line).empty())
            continue;
        std::stringstream row(line);
        std::string idx, id, label;
        std::getline(row, idx, ',');
        std::getline(row, id, ',');
        std::getline(row, label, ',');
        if (i >= test_images.size())
            throw FormatError("labels.csv has more rows than the test split");
        ds.test.push_back({std::move(test_images[i]), parse_label(trim(label)), id});
        ++i;
    }
    if (i != test_images.size())
        throw FormatError("labels.csv has " + std::to_string(i) + " rows, test split has " +
                          std::to_string(test_images.size()));

    if (fs::exists(dir / "audit.csv")) {
        AuditLog audit;
        std::ifstream in(dir / "audit.csv");
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (trim(line).empty())
                continue;
            std::stringstream row(line);
            std::string idx, id, flag;
            std::getline(row, idx, ',');
            std::getline(row, id, ',');
            std::getline(row, flag, ',');
            if (trim(flag) == "1")
                audit.anomalous_indices.push_back(audit.source_ids.size());
            audit.source_ids.push_back(id);
        }
        if (audit.source_ids.size() != ds.train.images.size())
            throw FormatError("audit.csv does not cover the training split");
        ds.audit = std::move(audit);
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Experiment corpus

Corpus build_corpus(const CorpusConfig& config)
{
    auto split = [&](std::size_t normals, std::size_t anomalies, std::uint64_t stream) {
        SyntheticCorpusConfig c = config.shapes;
        c.normals = normals;
        c.anomalies = anomalies;
        c.seed = derive_seed(config.shapes.seed, stream);
        return generate_synthetic(c);
    };
    Corpus corpus;
    corpus.train_normals = split(config.train_normals, 0, 1);
    if (config.anomaly_pool > 0)
        corpus.anomaly_pool = split(0, config.anomaly_pool, 2);
    corpus.test = split(config.test_normals, config.test_anomalies, 3);
    for (auto& s : corpus.anomaly_pool)
        s.source_id = "pool_" + s.source_id;
    for (auto& s : corpus.test)
        s.source_id = "test_" + s.source_id;
    if (config.rotations > 0) {
        corpus.train_normals =
            augment_rotations(corpus.train_normals, config.rotations, derive_seed(config.shapes.seed, 4));
        corpus.anomaly_pool =
            augment_rotations(corpus.anomaly_pool, config.rotations, derive_seed(config.shapes.seed, 5));
    }
    return corpus;
}

StoredDataset make_stored_dataset(const CorpusConfig& config, double gamma)
{
    Corpus corpus = build_corpus(config);
    const auto spec =
        ContaminationSpec::make(gamma, corpus.train_normals.size(), derive_seed(config.shapes.seed, 6));
    ContaminationResult mixed = contaminate(corpus.train_normals, corpus.anomaly_pool, spec);
    StoredDataset ds;
    ds.resolution = config.shapes.resolution;
    ds.channels = config.shapes.channels;
    ds.seed = config.shapes.seed;
    ds.gamma = gamma;
    ds.train_normals = spec.n_normal;
    ds.train_anomalies = spec.n_anomaly;
    ds.train = std::move(mixed.stream);
    ds.test = std::move(corpus.test);
    ds.audit = std::move(mixed.audit);
    return ds;
}

}  // namespace ganad

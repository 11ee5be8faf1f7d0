#include "ganad/checkpoint.hpp"

#include <openssl/evp.h>

#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"
#include "ganad/errors.hpp"

namespace ganad {

using nlohmann::json;

std::string sha256_hex(const void* data, std::size_t size)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data, size, md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 computation failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i)
        os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

std::string params_digest(const ParamSet<float>& params)
{
    std::string blob;
    for (const auto& [name, v] : params) {
        blob += name;
        blob += shape_str(v.shape());
        const auto bytes = io::encode_f32(v.value().data);
        blob.append(bytes.begin(), bytes.end());
    }
    return sha256_hex(blob.data(), blob.size());
}

namespace {

json spec_to_json(const NetworkSpec& s)
{
    return {{"kind", to_string(s.kind)},
            {"base_channels", s.base_channels},
            {"resolutions", s.resolutions},
            {"image_channels", s.image_channels},
            {"latent_dim", s.latent_dim},
            {"leaky_slope", s.leaky_slope}};
}

NetworkSpec spec_from_json(const json& j, NetworkKind kind)
{
    NetworkSpec s;
    s.kind = kind;
    if (j.at("kind").get<std::string>() != to_string(kind))
        throw FormatError("manifest spec kind mismatch for " + std::string(to_string(kind)));
    s.base_channels = j.at("base_channels").get<int>();
    s.resolutions = j.at("resolutions").get<std::vector<int>>();
    s.image_channels = j.at("image_channels").get<int>();
    s.latent_dim = j.at("latent_dim").get<int>();
    s.leaky_slope = j.at("leaky_slope").get<double>();
    if (s.resolutions.empty())
        throw FormatError("manifest spec without resolutions");
    return s;
}

json save_params(const ParamSet<float>& params, const std::string& prefix, const std::filesystem::path& dir)
{
    json tensors = json::array();
    for (const auto& [name, v] : params) {
        const std::string file = prefix + "." + name + ".f32";
        const auto bytes = io::encode_f32(v.value().data);
        io::write_bytes(dir / file, bytes);
        tensors.push_back({{"name", name},
                           {"file", file},
                           {"shape", v.shape()},
                           {"sha256", sha256_hex(bytes.data(), bytes.size())}});
    }
    return {{"tensors", tensors}};
}

ParamSet<float> load_params(const json& section, const std::filesystem::path& dir)
{
    ParamSet<float> params;
    for (const auto& t : section.at("tensors")) {
        const auto name = t.at("name").get<std::string>();
        const auto file = t.at("file").get<std::string>();
        const auto shape = t.at("shape").get<Shape>();
        const auto path = dir / file;
        if (!std::filesystem::exists(path))
            throw FormatError("checkpoint tensor file missing: " + file);
        const auto bytes = io::read_bytes(path);
        if (bytes.size() != numel(shape) * 4)
            throw FormatError("truncated tensor " + file + ": " + std::to_string(bytes.size()) + " bytes, expected " +
                              std::to_string(numel(shape) * 4));
        if (sha256_hex(bytes.data(), bytes.size()) != t.at("sha256").get<std::string>())
            throw FormatError("digest mismatch for tensor " + file);
        params.emplace(name, Var<float>::leaf(Tensor<float>(shape, io::decode_f32(bytes))));
    }
    return params;
}

}  // namespace

void save_checkpoint(const ModelBundle& bundle, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    json networks = {{"generator", save_params(bundle.generator, "generator", dir)},
                     {"encoder", save_params(bundle.encoder, "encoder", dir)}};
    if (bundle.has_discriminator())
        networks["discriminator"] = save_params(bundle.discriminator, "discriminator", dir);
    json manifest = {
        {"format", "ganad-checkpoint"},
        {"format_version", kCheckpointFormatVersion},
        {"latent_dim", bundle.latent_dim()},
        {"specs",
         {{"generator", spec_to_json(bundle.generator_spec)},
          {"discriminator", spec_to_json(bundle.discriminator_spec)},
          {"encoder", spec_to_json(bundle.encoder_spec)}}},
        {"phase", {{"resolution", bundle.phase.resolution}, {"fade_in", bundle.phase.fade_in}}},
        {"init_seed", bundle.init_seed},
        {"frozen", bundle.frozen},
        {"networks", networks},
    };
    io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

ModelBundle load_checkpoint(const std::filesystem::path& dir)
{
    const auto manifest_path = dir / "manifest.json";
    if (!std::filesystem::exists(manifest_path))
        throw MissingInputError("checkpoint manifest not found: " + manifest_path.string());
    json m;
    try {
        m = json::parse(io::read_text(manifest_path));
    } catch (const json::exception& e) {
        throw FormatError("checkpoint manifest unreadable: " + std::string(e.what()));
    }
    try {
        if (m.value("format", "") != "ganad-checkpoint")
            throw FormatError("not a ganad checkpoint: " + dir.string());
        const int version = m.at("format_version").get<int>();
        if (version != kCheckpointFormatVersion)
            throw FormatError("checkpoint format version " + std::to_string(version) + " unsupported (expected " +
                              std::to_string(kCheckpointFormatVersion) + ")");
        ModelBundle b;
        const auto& specs = m.at("specs");
        b.generator_spec = spec_from_json(specs.at("generator"), NetworkKind::Generator);
        b.discriminator_spec = spec_from_json(specs.at("discriminator"), NetworkKind::Discriminator);
        b.encoder_spec = spec_from_json(specs.at("encoder"), NetworkKind::Encoder);
        if (m.at("latent_dim").get<int>() != b.generator_spec.latent_dim)
            throw FormatError("manifest latent_dim disagrees with generator spec");
        b.phase.resolution = m.at("phase").at("resolution").get<int>();
        b.phase.fade_in = m.at("phase").at("fade_in").get<double>();
        b.init_seed = m.at("init_seed").get<std::uint64_t>();
        b.frozen = m.at("frozen").get<bool>();
        const auto& nets = m.at("networks");
        b.generator = load_params(nets.at("generator"), dir);
        b.encoder = load_params(nets.at("encoder"), dir);
        if (nets.contains("discriminator"))
            b.discriminator = load_params(nets.at("discriminator"), dir);
        return b;
    } catch (const json::exception& e) {
        throw FormatError("checkpoint manifest malformed: " + std::string(e.what()));
    }
}

ModelBundle strip_discriminator(const ModelBundle& bundle)
{
    ModelBundle out = bundle;
    out.discriminator.clear();
    return out;
}

}  // namespace ganad

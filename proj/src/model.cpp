#include "ganad/model.hpp"

#include <cmath>
#include <stdexcept>

namespace ganad {

std::string_view to_string(NetworkKind kind)
{
    switch (kind) {
    case NetworkKind::Generator: return "generator";
    case NetworkKind::Discriminator: return "discriminator";
    case NetworkKind::Encoder: return "encoder";
    }
    return "?";
}

void ModelConfig::validate() const
{
    if (latent_dim <= 0)
        throw std::invalid_argument("latent_dim must be positive");
    if (base_channels <= 0)
        throw std::invalid_argument("base_channels must be positive");
    if (image_channels <= 0)
        throw std::invalid_argument("image_channels must be positive");
    if (target_resolution < 4 || (target_resolution & (target_resolution - 1)) != 0)
        throw std::invalid_argument("target resolution must be a power of two >= 4");
    if (!(leaky_slope >= 0.0 && leaky_slope < 1.0))
        throw std::invalid_argument("leaky slope must lie in [0, 1)");
}

std::vector<int> resolution_ladder(int target)
{
    if (target < 4 || (target & (target - 1)) != 0)
        throw std::invalid_argument("resolution " + std::to_string(target) + " is not a power of two >= 4");
    std::vector<int> out;
    for (int r = 4; r <= target; r *= 2)
        out.push_back(r);
    return out;
}

namespace {

std::string block(int r) { return "block" + std::to_string(r); }

template <typename T>
void add_param(ParamSet<T>& params, const std::string& name, Shape shape)
{
    params.emplace(name, Var<T>::leaf(Tensor<T>(std::move(shape))));
}

template <typename T>
void add_conv(ParamSet<T>& params, const std::string& name, int out, int in, int k)
{
    add_param(params, name + ".weight", Shape{out, in, k, k});
    add_param(params, name + ".bias", Shape{out});
}

template <typename T>
void add_dense(ParamSet<T>& params, const std::string& name, int out, int in)
{
    add_param(params, name + ".weight", Shape{out, in});
    add_param(params, name + ".bias", Shape{out});
}

template <typename T>
ParamSet<T> make_generator(const NetworkSpec& s)
{
    ParamSet<T> p;
    const int c = s.base_channels;
    add_dense(p, "fc", c * 16, s.latent_dim);
    add_conv(p, block(4) + ".conv", c, c, 3);
    for (int r : s.resolutions) {
        if (r > 4) {
            add_conv(p, block(r) + ".conv1", c, c, 3);
            add_conv(p, block(r) + ".conv2", c, c, 3);
        }
        add_conv(p, "to_image" + std::to_string(r), s.image_channels, c, 1);
    }
    return p;
}

template <typename T>
ParamSet<T> make_trunk(const NetworkSpec& s, int outputs)
{
    ParamSet<T> p;
    const int c = s.base_channels;
    for (int r : s.resolutions) {
        add_conv(p, "from_image" + std::to_string(r), c, s.image_channels, 1);
        if (r > 4) {
            add_conv(p, block(r) + ".conv1", c, c, 3);
            add_conv(p, block(r) + ".conv2", c, c, 3);
        }
    }
    add_conv(p, block(4) + ".conv", c, c, 3);
    add_dense(p, "head", outputs, c * 16);
    return p;
}

bool is_output_layer(const std::string& name)
{
    return name.rfind("to_image", 0) == 0 || name.rfind("head", 0) == 0;
}

template <typename T>
void init_params(ParamSet<T>& params, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& [name, var] : params) {
        Tensor<T>& t = var.mutable_value();
        if (name.size() >= 5 && name.compare(name.size() - 5, 5, ".bias") == 0) {
            std::fill(t.data.begin(), t.data.end(), T(0));
            continue;
        }
        const std::size_t fan_in = t.size() / static_cast<std::size_t>(t.shape[0]);
        const double gain = is_output_layer(name) ? 1.0 : std::sqrt(2.0);
        const double stddev = gain / std::sqrt(static_cast<double>(fan_in));
        for (auto& v : t.data)
            v = static_cast<T>(stddev * gauss(rng));
    }
}

template <typename T>
const Var<T>& param(const ParamSet<T>& params, const std::string& name)
{
    auto it = params.find(name);
    if (it == params.end())
        throw std::out_of_range("missing parameter '" + name + "'");
    return it->second;
}

template <typename T>
Var<T> conv_layer(const ParamSet<T>& p, const std::string& name, const Var<T>& x)
{
    return ag::add_bias(ag::conv2d(x, param(p, name + ".weight")), param(p, name + ".bias"));
}

template <typename T>
Var<T> act(const Var<T>& x, double slope)
{
    return ag::leaky_relu(x, static_cast<T>(slope));
}

void check_phase(const NetworkSpec& spec, const GrowthPhase& phase)
{
    const auto& rs = spec.resolutions;
    if (std::find(rs.begin(), rs.end(), phase.resolution) == rs.end())
        throw std::invalid_argument("phase resolution " + std::to_string(phase.resolution) +
                                    " not in the network's ladder");
    if (!(phase.fade_in >= 0.0 && phase.fade_in <= 1.0))
        throw std::invalid_argument("fade-in coefficient must lie in [0, 1]");
}

template <typename T>
void check_image_input(const NetworkSpec& spec, const Var<T>& x, const GrowthPhase& phase)
{
    const Shape& s = x.shape();
    if (s.size() != 4 || s[1] != spec.image_channels || s[2] != phase.resolution || s[3] != phase.resolution)
        throw std::invalid_argument(std::string(to_string(spec.kind)) + ": input " + shape_str(s) +
                                    " does not match phase resolution " + std::to_string(phase.resolution));
}

template <typename T>
Var<T> trunk_forward(const NetworkSpec& spec, const ParamSet<T>& p, const Var<T>& x, const GrowthPhase& phase)
{
    check_phase(spec, phase);
    check_image_input(spec, x, phase);
    const double slope = spec.leaky_slope;
    const int res = phase.resolution;
    Var<T> h = act(conv_layer(p, "from_image" + std::to_string(res), x), slope);
    for (int r = res; r > 4; r /= 2) {
        h = act(conv_layer(p, block(r) + ".conv1", h), slope);
        h = act(conv_layer(p, block(r) + ".conv2", h), slope);
        h = ag::avgpool2(h);
        if (r == res && phase.fade_in < 1.0) {
            Var<T> low = act(conv_layer(p, "from_image" + std::to_string(r / 2), ag::avgpool2(x)), slope);
            h = ag::lerp(low, h, static_cast<T>(phase.fade_in));
        }
    }
    h = act(conv_layer(p, block(4) + ".conv", h), slope);
    const int n = h.shape()[0];
    h = ag::reshape(h, Shape{n, spec.base_channels * 16});
    return ag::linear(h, param(p, "head.weight"), param(p, "head.bias"));
}

}  // namespace

template <typename T>
BasicBundle<T> init_bundle(const ModelConfig& config)
{
    config.validate();
    BasicBundle<T> b;
    NetworkSpec base;
    base.base_channels = config.base_channels;
    base.resolutions = resolution_ladder(config.target_resolution);
    base.image_channels = config.image_channels;
    base.latent_dim = config.latent_dim;
    base.leaky_slope = config.leaky_slope;
    b.generator_spec = base;
    b.generator_spec.kind = NetworkKind::Generator;
    b.discriminator_spec = base;
    b.discriminator_spec.kind = NetworkKind::Discriminator;
    b.encoder_spec = base;
    b.encoder_spec.kind = NetworkKind::Encoder;

    b.generator = make_generator<T>(b.generator_spec);
    b.discriminator = make_trunk<T>(b.discriminator_spec, 1);
    b.encoder = make_trunk<T>(b.encoder_spec, config.latent_dim);
    init_params(b.generator, derive_seed(config.seed, 101));
    init_params(b.discriminator, derive_seed(config.seed, 102));
    init_params(b.encoder, derive_seed(config.seed, 103));
    b.phase = GrowthPhase{config.target_resolution, 1.0};
    b.init_seed = config.seed;
    return b;
}

template <typename To, typename From>
BasicBundle<To> convert_bundle(const BasicBundle<From>& src)
{
    BasicBundle<To> b;
    b.generator_spec = src.generator_spec;
    b.discriminator_spec = src.discriminator_spec;
    b.encoder_spec = src.encoder_spec;
    auto convert = [](const ParamSet<From>& in) {
        ParamSet<To> out;
        for (const auto& [name, v] : in)
            out.emplace(name, Var<To>::leaf(v.value().template cast<To>()));
        return out;
    };
    b.generator = convert(src.generator);
    b.discriminator = convert(src.discriminator);
    b.encoder = convert(src.encoder);
    b.phase = src.phase;
    b.init_seed = src.init_seed;
    b.frozen = src.frozen;
    return b;
}

template <typename T>
Var<T> generator_forward(const BasicBundle<T>& bundle, const Var<T>& z, const GrowthPhase& phase)
{
    const NetworkSpec& spec = bundle.generator_spec;
    const ParamSet<T>& p = bundle.generator;
    check_phase(spec, phase);
    if (z.shape().size() != 2 || z.shape()[1] != spec.latent_dim)
        throw std::invalid_argument("generator: latent batch " + shape_str(z.shape()) + " does not match N_z=" +
                                    std::to_string(spec.latent_dim));
    const double slope = spec.leaky_slope;
    const int n = z.shape()[0];
    const int c = spec.base_channels;
    Var<T> h = act(ag::linear(z, param(p, "fc.weight"), param(p, "fc.bias")), slope);
    h = ag::reshape(h, Shape{n, c, 4, 4});
    h = act(conv_layer(p, block(4) + ".conv", h), slope);
    Var<T> previous = h;
    for (int r = 8; r <= phase.resolution; r *= 2) {
        previous = h;
        h = ag::upsample2(h);
        h = act(conv_layer(p, block(r) + ".conv1", h), slope);
        h = act(conv_layer(p, block(r) + ".conv2", h), slope);
    }
    Var<T> out = ag::tanh(conv_layer(p, "to_image" + std::to_string(phase.resolution), h));
    if (phase.resolution > 4 && phase.fade_in < 1.0) {
        Var<T> low =
            ag::upsample2(ag::tanh(conv_layer(p, "to_image" + std::to_string(phase.resolution / 2), previous)));
        out = ag::lerp(low, out, static_cast<T>(phase.fade_in));
    }
    return out;
}

template <typename T>
Var<T> critic_forward(const BasicBundle<T>& bundle, const Var<T>& x, const GrowthPhase& phase)
{
    if (!bundle.has_discriminator())
        throw std::logic_error("bundle carries no discriminator parameters");
    return trunk_forward(bundle.discriminator_spec, bundle.discriminator, x, phase);
}

template <typename T>
Var<T> encoder_forward(const BasicBundle<T>& bundle, const Var<T>& x, const GrowthPhase& phase)
{
    return trunk_forward(bundle.encoder_spec, bundle.encoder, x, phase);
}

// ---------------------------------------------------------------------------

std::vector<LatentVector> PriorBatch::unit_vectors() const
{
    std::vector<LatentVector> out(static_cast<std::size_t>(unit.dim(0)));
    const std::size_t d = static_cast<std::size_t>(unit.dim(1));
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i].values.assign(unit.data.begin() + static_cast<std::ptrdiff_t>(i * d),
                             unit.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
    return out;
}

std::vector<LatentVector> PriorBatch::raw_vectors() const
{
    std::vector<LatentVector> out(static_cast<std::size_t>(raw.dim(0)));
    const std::size_t d = static_cast<std::size_t>(raw.dim(1));
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i].values.assign(raw.data.begin() + static_cast<std::ptrdiff_t>(i * d),
                             raw.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
    return out;
}

PriorBatch sample_prior(std::size_t n, int latent_dim, std::mt19937_64& rng)
{
    if (n == 0)
        throw std::invalid_argument("sample_prior: n must be >= 1");
    if (latent_dim <= 0)
        throw std::invalid_argument("sample_prior: latent dimension must be positive");
    std::normal_distribution<double> gauss(0.0, 1.0);
    PriorBatch batch{Tensor<float>(Shape{static_cast<int>(n), latent_dim}),
                     Tensor<float>(Shape{static_cast<int>(n), latent_dim})};
    const std::size_t d = static_cast<std::size_t>(latent_dim);
    std::vector<double> row(d);
    for (std::size_t i = 0; i < n; ++i) {
        double norm2 = 0.0;
        for (auto& v : row) {
            v = gauss(rng);
            norm2 += v * v;
        }
        const double inv = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            batch.raw[i * d + j] = static_cast<float>(row[j]);
            batch.unit[i * d + j] = static_cast<float>(row[j] * inv);
        }
    }
    return batch;
}

PriorBatch sample_prior(std::size_t n, int latent_dim, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    return sample_prior(n, latent_dim, rng);
}

template <typename T>
Tensor<T> images_to_tensor(std::span<const Image> images)
{
    if (images.empty())
        throw std::invalid_argument("empty image batch");
    const Image& first = images.front();
    Tensor<T> t(Shape{static_cast<int>(images.size()), first.depth, first.height, first.width});
    std::size_t offset = 0;
    for (const Image& img : images) {
        if (!img.same_shape(first))
            throw std::invalid_argument("image batch mixes shapes");
        std::copy(img.values.begin(), img.values.end(), t.data.begin() + static_cast<std::ptrdiff_t>(offset));
        offset += img.size();
    }
    return t;
}

std::vector<Image> tensor_to_images(const Tensor<float>& t)
{
    if (t.rank() != 4)
        throw std::invalid_argument("expected NCHW tensor");
    const int n = t.dim(0), c = t.dim(1), h = t.dim(2), w = t.dim(3);
    const std::size_t per = static_cast<std::size_t>(c) * h * w;
    std::vector<Image> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        out.emplace_back(w, h, c,
                         std::vector<float>(t.data.begin() + static_cast<std::ptrdiff_t>(i * per),
                                            t.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * per)));
    return out;
}

// Inference runs one sample per forward pass: GEMM kernels pick different
// summation orders for different row counts, and a query's score must not
// depend on what else shares its batch.
std::vector<Image> generate_batch(const ModelBundle& bundle, std::span<const LatentVector> zs)
{
    const int d = bundle.latent_dim();
    NoGradGuard guard;
    std::vector<Image> result;
    result.reserve(zs.size());
    for (const auto& zv : zs) {
        if (zv.size() != static_cast<std::size_t>(d))
            throw std::invalid_argument("latent vector of length " + std::to_string(zv.size()) + ", expected " +
                                        std::to_string(d));
        Tensor<float> z(Shape{1, d}, zv.values);
        result.push_back(
            tensor_to_images(generator_forward(bundle, Var<float>::constant(std::move(z)), bundle.phase).value())
                .front());
    }
    return result;
}

std::vector<LatentVector> encode_batch(const ModelBundle& bundle, std::span<const Image> images)
{
    NoGradGuard guard;
    std::vector<LatentVector> result(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        const Var<float> out =
            encoder_forward(bundle, Var<float>::constant(images_to_tensor<float>(images.subspan(i, 1))), bundle.phase);
        result[i].values = out.value().data;
    }
    return result;
}

Image generate(const ModelBundle& bundle, const LatentVector& z)
{
    return generate_batch(bundle, std::span<const LatentVector>(&z, 1)).front();
}

LatentVector encode(const ModelBundle& bundle, const Image& image)
{
    return encode_batch(bundle, std::span<const Image>(&image, 1)).front();
}

double discriminate(const ModelBundle& bundle, const Image& image)
{
    NoGradGuard guard;
    return critic_forward(bundle, Var<float>::constant(images_to_tensor<float>(std::span<const Image>(&image, 1))),
                          bundle.phase)
        .item();
}

#define GANAD_INSTANTIATE_MODEL(T)                                                                     \
    template BasicBundle<T> init_bundle<T>(const ModelConfig&);                                       \
    template Var<T> generator_forward<T>(const BasicBundle<T>&, const Var<T>&, const GrowthPhase&);   \
    template Var<T> critic_forward<T>(const BasicBundle<T>&, const Var<T>&, const GrowthPhase&);      \
    template Var<T> encoder_forward<T>(const BasicBundle<T>&, const Var<T>&, const GrowthPhase&);     \
    template Tensor<T> images_to_tensor<T>(std::span<const Image>);

GANAD_INSTANTIATE_MODEL(float)
GANAD_INSTANTIATE_MODEL(double)
template BasicBundle<double> convert_bundle<double, float>(const BasicBundle<float>&);
template BasicBundle<float> convert_bundle<float, double>(const BasicBundle<double>&);
template BasicBundle<float> convert_bundle<float, float>(const BasicBundle<float>&);

}  // namespace ganad

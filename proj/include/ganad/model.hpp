#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ganad/autograd.hpp"
#include "ganad/data.hpp"

namespace ganad {

enum class NetworkKind { Generator, Discriminator, Encoder };

std::string_view to_string(NetworkKind kind);

// Desk-scale progressive topology: every resolution block holds two 3x3
// convolutions with leaky-ReLU (the 4x4 block holds one plus the dense
// layer), nearest upsampling in the generator, average pooling in the
// critic/encoder trunk, and 1x1 image adapters per resolution.
struct NetworkSpec {
    NetworkKind kind = NetworkKind::Generator;
    int base_channels = 16;
    std::vector<int> resolutions;  // 4, 8, ..., target
    int image_channels = 1;
    int latent_dim = 64;
    double leaky_slope = 0.2;

    int target_resolution() const { return resolutions.back(); }
    bool operator==(const NetworkSpec&) const = default;
};

struct GrowthPhase {
    int resolution = 4;
    double fade_in = 1.0;  // weight of the newest block
    bool operator==(const GrowthPhase&) const = default;
};

template <typename T>
using ParamSet = std::map<std::string, Var<T>>;

template <typename T>
struct BasicBundle {
    NetworkSpec generator_spec;
    NetworkSpec discriminator_spec;
    NetworkSpec encoder_spec;
    ParamSet<T> generator;
    ParamSet<T> discriminator;  // empty once stripped
    ParamSet<T> encoder;
    GrowthPhase phase;
    std::uint64_t init_seed = 0;
    bool frozen = false;

    int latent_dim() const { return generator_spec.latent_dim; }
    int image_channels() const { return generator_spec.image_channels; }
    int target_resolution() const { return generator_spec.target_resolution(); }
    bool has_discriminator() const { return !discriminator.empty(); }
};

using ModelBundle = BasicBundle<float>;

struct ModelConfig {
    int latent_dim = 64;
    int base_channels = 16;
    int image_channels = 1;
    int target_resolution = 16;
    double leaky_slope = 0.2;
    std::uint64_t seed = 0;

    void validate() const;
};

// Powers of two from 4 up to target inclusive.
std::vector<int> resolution_ladder(int target);

// Fresh parameters: zero biases, weights ~ N(0, gain^2 / fan_in) with
// gain sqrt(2) ahead of leaky-ReLU and 1 on output layers.
template <typename T>
BasicBundle<T> init_bundle(const ModelConfig& config);

// Copies parameter values into fresh leaves of another precision.
template <typename To, typename From>
BasicBundle<To> convert_bundle(const BasicBundle<From>& bundle);

template <typename T>
Var<T> generator_forward(const BasicBundle<T>& bundle, const Var<T>& z, const GrowthPhase& phase);
template <typename T>
Var<T> critic_forward(const BasicBundle<T>& bundle, const Var<T>& x, const GrowthPhase& phase);
template <typename T>
Var<T> encoder_forward(const BasicBundle<T>& bundle, const Var<T>& x, const GrowthPhase& phase);

struct LatentVector {
    std::vector<float> values;
    std::size_t size() const { return values.size(); }
    bool operator==(const LatentVector&) const = default;
};

// Prior draws: raw N(0, I) vectors and their unit-length rescaling (the
// generator input). Both [n, latent_dim].
struct PriorBatch {
    Tensor<float> raw;
    Tensor<float> unit;

    std::vector<LatentVector> unit_vectors() const;
    std::vector<LatentVector> raw_vectors() const;
};

PriorBatch sample_prior(std::size_t n, int latent_dim, std::uint64_t seed);
PriorBatch sample_prior(std::size_t n, int latent_dim, std::mt19937_64& rng);

// Single-sample conveniences at the bundle's current phase (no graph recorded).
Image generate(const ModelBundle& bundle, const LatentVector& z);
LatentVector encode(const ModelBundle& bundle, const Image& image);
double discriminate(const ModelBundle& bundle, const Image& image);

std::vector<Image> generate_batch(const ModelBundle& bundle, std::span<const LatentVector> zs);
std::vector<LatentVector> encode_batch(const ModelBundle& bundle, std::span<const Image> images);

// Stacks images into an NCHW tensor; all must share shape.
template <typename T>
Tensor<T> images_to_tensor(std::span<const Image> images);
std::vector<Image> tensor_to_images(const Tensor<float>& t);

}  // namespace ganad

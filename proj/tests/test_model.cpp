#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "ganad/model.hpp"

using namespace ganad;

namespace {

ModelConfig small_model(int target = 8, std::uint64_t seed = 3)
{
    ModelConfig c;
    c.latent_dim = 8;
    c.base_channels = 4;
    c.target_resolution = target;
    c.seed = seed;
    return c;
}

Tensor<double> prior_tensor(int n, int nz, std::uint64_t seed)
{
    return sample_prior(n, nz, seed).unit.cast<double>();
}

void perturb(ParamSet<double>& params, const std::string& prefix)
{
    for (auto& [name, v] : params)
        if (name.rfind(prefix, 0) == 0)
            for (auto& x : v.mutable_value().data)
                x += 0.37;
}

}  // namespace

TEST(Model, ResolutionLadder)
{
    EXPECT_EQ(resolution_ladder(4), (std::vector<int>{4}));
    EXPECT_EQ(resolution_ladder(16), (std::vector<int>{4, 8, 16}));
    EXPECT_THROW(resolution_ladder(12), std::invalid_argument);
}

TEST(Model, FreshBundleProducesFiniteOutputs)
{
    const auto b = init_bundle<float>(small_model(16));
    const auto prior = sample_prior(5, 8, 1);
    for (const auto& z : prior.unit_vectors()) {
        const auto img = generate(b, z);
        EXPECT_EQ(img.width, 16);
        for (float v : img.values) {
            ASSERT_TRUE(std::isfinite(v));
            ASSERT_LE(std::abs(v), 1.0f);
        }
        EXPECT_TRUE(std::isfinite(discriminate(b, img)));
        const auto zhat = encode(b, img);
        EXPECT_EQ(zhat.size(), 8u);
        for (float v : zhat.values)
            ASSERT_TRUE(std::isfinite(v));
    }
}

TEST(Model, InitIsDeterministicPerSeed)
{
    const auto a = init_bundle<float>(small_model(8, 3));
    const auto b = init_bundle<float>(small_model(8, 3));
    const auto c = init_bundle<float>(small_model(8, 4));
    for (const auto& [name, v] : a.generator) {
        EXPECT_EQ(v.value(), b.generator.at(name).value());
    }
    EXPECT_NE(a.generator.at("fc.weight").value(), c.generator.at("fc.weight").value());
    // networks draw from separate streams
    EXPECT_NE(a.discriminator.at("head.weight").value().data[0], a.encoder.at("head.weight").value().data[0]);
}

TEST(Model, BiasesStartAtZero)
{
    const auto b = init_bundle<float>(small_model());
    for (const auto* params : {&b.generator, &b.discriminator, &b.encoder})
        for (const auto& [name, v] : *params)
            if (name.ends_with("bias")) {
                for (float x : v.value().data)
                    EXPECT_EQ(x, 0.0f) << name;
            }
}

TEST(Model, GeneratorFadeZeroIsTheUpsampledCoarseBranch)
{
    const auto b = init_bundle<double>(small_model(8));
    const auto z = Var<double>::constant(prior_tensor(3, 8, 2));
    const auto coarse = generator_forward(b, z, {4, 1.0});
    const auto faded = generator_forward(b, z, {8, 0.0});
    EXPECT_EQ(faded.value(), ag::upsample2(coarse).value());
}

TEST(Model, GeneratorFadeOneIgnoresTheCoarseAdapter)
{
    auto b = init_bundle<double>(small_model(8));
    const auto z = Var<double>::constant(prior_tensor(3, 8, 2));
    const auto full = generator_forward(b, z, {8, 1.0}).value();
    perturb(b.generator, "to_image4");
    EXPECT_EQ(generator_forward(b, z, {8, 1.0}).value(), full);
    EXPECT_NE(generator_forward(b, z, {8, 0.5}).value(), full);
}

TEST(Model, TrunkFadeEndpoints)
{
    auto b = init_bundle<double>(small_model(8));
    const auto imgs = generator_forward(b, Var<double>::constant(prior_tensor(2, 8, 5)), {8, 1.0});
    const auto x = Var<double>::constant(imgs.value());
    // alpha = 0: only the pooled coarse path matters
    const auto zero = critic_forward(b, x, {8, 0.0}).value();
    auto b2 = b;
    for (auto& [name, v] : b2.discriminator)
        v = Var<double>::leaf(v.value());
    perturb(b2.discriminator, "from_image8");
    perturb(b2.discriminator, "block8");
    EXPECT_EQ(critic_forward(b2, x, {8, 0.0}).value(), zero);
    EXPECT_EQ(critic_forward(b2, x, {8, 0.0}).value(),
              critic_forward(b, Var<double>::constant(ag::avgpool2(x).value()), {4, 1.0}).value());
    // alpha = 1: the coarse adapter is unused
    const auto one = encoder_forward(b, x, {8, 1.0}).value();
    perturb(b.encoder, "from_image4");
    EXPECT_EQ(encoder_forward(b, x, {8, 1.0}).value(), one);
}

TEST(Model, DiscriminateIsPure)
{
    const auto b = init_bundle<float>(small_model());
    const auto img = generate(b, sample_prior(1, 8, 9).unit_vectors()[0]);
    EXPECT_EQ(discriminate(b, img), discriminate(b, img));
    EXPECT_EQ(encode(b, img), encode(b, img));
}

TEST(Model, BatchAndSingleSampleAgree)
{
    const auto b = init_bundle<float>(small_model());
    const auto zs = sample_prior(4, 8, 10).unit_vectors();
    const auto imgs = generate_batch(b, zs);
    for (std::size_t i = 0; i < zs.size(); ++i) {
        const auto single = generate(b, zs[i]);
        for (std::size_t k = 0; k < single.size(); ++k)
            EXPECT_NEAR(single.values[k], imgs[i].values[k], 1e-6);
    }
}

TEST(Model, LinearLayerMatchesHandComputedAffineMap)
{
    // y = x W^T + b with x = [1, 2, 3], W = [[1, 0, -1], [2, 1, 0]], b = [0.5, -1]
    const auto x = Var<double>::constant(Tensor<double>({1, 3}, {1, 2, 3}));
    const auto w = Var<double>::constant(Tensor<double>({2, 3}, {1, 0, -1, 2, 1, 0}));
    const auto bias = Var<double>::constant(Tensor<double>({2}, {0.5, -1}));
    const auto y = ag::linear(x, w, bias).value();
    EXPECT_EQ(y.shape, (Shape{1, 2}));
    EXPECT_DOUBLE_EQ(y.data[0], 1 - 3 + 0.5);
    EXPECT_DOUBLE_EQ(y.data[1], 2 + 2 - 1);
}

TEST(Model, ConvolutionMatchesHandComputedStencil)
{
    // 3x3 input, 3x3 kernel of ones, zero padding: centre sums everything,
    // corners sum a 2x2 block.
    const auto x = Var<double>::constant(Tensor<double>({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9}));
    const auto w = Var<double>::constant(Tensor<double>({1, 1, 3, 3}, 1.0));
    const auto y = ag::conv2d(x, w).value();
    EXPECT_DOUBLE_EQ(y.data[4], 45);
    EXPECT_DOUBLE_EQ(y.data[0], 1 + 2 + 4 + 5);
    EXPECT_DOUBLE_EQ(y.data[8], 5 + 6 + 8 + 9);
}

TEST(Prior, UnitVectorsHaveUnitLength)
{
    const auto p = sample_prior(100, 64, 4);
    for (const auto& v : p.unit_vectors()) {
        double s = 0;
        for (float x : v.values)
            s += static_cast<double>(x) * x;
        EXPECT_NEAR(std::sqrt(s), 1.0, 1e-6);
    }
}

TEST(Prior, RawCoefficientsAreStandardNormal)
{
    const auto p = sample_prior(1000, 100, 5);
    const auto& raw = p.raw.data;
    ASSERT_EQ(raw.size(), 100000u);
    const double mean = std::accumulate(raw.begin(), raw.end(), 0.0) / raw.size();
    EXPECT_NEAR(mean, 0.0, 0.02);
    double var = 0;
    for (float v : raw)
        var += (v - mean) * (v - mean);
    EXPECT_NEAR(var / raw.size(), 1.0, 0.02);
}

TEST(Prior, SameSeedSameVectors)
{
    EXPECT_EQ(sample_prior(3, 16, 8).raw, sample_prior(3, 16, 8).raw);
    EXPECT_NE(sample_prior(3, 16, 8).raw, sample_prior(3, 16, 9).raw);
    EXPECT_THROW(sample_prior(0, 16, 1), std::invalid_argument);
}

TEST(Model, ConvertRoundTripPreservesValues)
{
    const auto f = init_bundle<float>(small_model());
    const auto d = convert_bundle<double>(f);
    const auto back = convert_bundle<float>(d);
    for (const auto& [name, v] : f.encoder)
        EXPECT_EQ(back.encoder.at(name).value(), v.value());
}

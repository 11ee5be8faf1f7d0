#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "ganad/checkpoint.hpp"
#include "ganad/errors.hpp"

using namespace ganad;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("ganad_test_ckpt_" + name);
    fs::remove_all(dir);
    return dir;
}

ModelBundle bundle()
{
    ModelConfig c;
    c.latent_dim = 8;
    c.base_channels = 4;
    c.target_resolution = 8;
    c.seed = 12;
    auto b = init_bundle<float>(c);
    b.phase = {8, 0.25};
    return b;
}

void expect_same(const ParamSet<float>& a, const ParamSet<float>& b)
{
    ASSERT_EQ(a.size(), b.size());
    for (const auto& [name, v] : a)
        EXPECT_EQ(v.value(), b.at(name).value()) << name;
}

}  // namespace

TEST(Checkpoint, SaveLoadRoundTripIsExact)
{
    const auto b = bundle();
    const auto dir = scratch("roundtrip");
    save_checkpoint(b, dir);
    const auto back = load_checkpoint(dir);
    expect_same(b.generator, back.generator);
    expect_same(b.discriminator, back.discriminator);
    expect_same(b.encoder, back.encoder);
    EXPECT_EQ(back.phase, b.phase);
    EXPECT_EQ(back.generator_spec, b.generator_spec);
    EXPECT_EQ(back.init_seed, b.init_seed);
    EXPECT_EQ(params_digest(back.generator), params_digest(b.generator));
}

TEST(Checkpoint, SavingTwiceGivesIdenticalBytes)
{
    const auto b = bundle();
    const auto d1 = scratch("bytes1"), d2 = scratch("bytes2");
    save_checkpoint(b, d1);
    save_checkpoint(b, d2);
    for (const auto& entry : fs::directory_iterator(d1)) {
        std::ifstream f1(entry.path(), std::ios::binary), f2(d2 / entry.path().filename(), std::ios::binary);
        const std::string s1((std::istreambuf_iterator<char>(f1)), {}), s2((std::istreambuf_iterator<char>(f2)), {});
        EXPECT_EQ(s1, s2) << entry.path();
    }
}

TEST(Checkpoint, DeletingDiscriminatorSectionGivesScoringOnlyBundle)
{
    const auto b = bundle();
    const auto dir = scratch("nod");
    save_checkpoint(b, dir);
    auto manifest = nlohmann::json::parse(std::ifstream(dir / "manifest.json"));
    manifest["networks"].erase("discriminator");
    std::ofstream(dir / "manifest.json") << manifest.dump(2);
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().filename().string().rfind("discriminator.", 0) == 0)
            fs::remove(entry.path());
    const auto back = load_checkpoint(dir);
    EXPECT_FALSE(back.has_discriminator());
    expect_same(b.encoder, back.encoder);
    const auto img = generate(back, sample_prior(1, 8, 1).unit_vectors()[0]);
    EXPECT_EQ(encode(back, img), encode(b, img));
}

TEST(Checkpoint, StrippedBundleSavesWithoutDiscriminatorFiles)
{
    const auto dir = scratch("strip");
    save_checkpoint(strip_discriminator(bundle()), dir);
    for (const auto& entry : fs::directory_iterator(dir))
        EXPECT_NE(entry.path().filename().string().rfind("discriminator.", 0), 0u);
    EXPECT_FALSE(load_checkpoint(dir).has_discriminator());
}

TEST(Checkpoint, CorruptByteIsDetected)
{
    const auto dir = scratch("corrupt");
    save_checkpoint(bundle(), dir);
    const auto file = dir / "encoder.head.weight.f32";
    ASSERT_TRUE(fs::exists(file));
    std::fstream f(file, std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(5);
    char c;
    f.get(c);
    f.seekp(5);
    f.put(static_cast<char>(c ^ 0x40));
    f.close();
    EXPECT_THROW(load_checkpoint(dir), FormatError);
}

TEST(Checkpoint, TruncatedTensorAndBadVersionAreRejected)
{
    const auto dir = scratch("trunc");
    save_checkpoint(bundle(), dir);
    fs::resize_file(dir / "generator.fc.weight.f32", 8);
    EXPECT_THROW(load_checkpoint(dir), FormatError);

    const auto dir2 = scratch("version");
    save_checkpoint(bundle(), dir2);
    auto manifest = nlohmann::json::parse(std::ifstream(dir2 / "manifest.json"));
    manifest["format_version"] = 99;
    std::ofstream(dir2 / "manifest.json") << manifest.dump(2);
    EXPECT_THROW(load_checkpoint(dir2), FormatError);

    EXPECT_THROW(load_checkpoint(scratch("missing")), Error);
}

TEST(Checkpoint, Sha256KnownVector)
{
    EXPECT_EQ(sha256_hex("abc", 3), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "maae/synthdata.hpp"

using namespace maae;
using namespace maae::data;

TEST_CASE("attribute names are fixed and indexed") {
    CHECK(attributeNames().size() == kNumAttributes);
    CHECK(attributeIndex("hairBlond") == 0);
    CHECK(attributeIndex("paleSkin") == 3);
    CHECK_THROWS_AS(attributeIndex("nosuch"), ConfigError);
}

TEST_CASE("identity parameters are a pure function of the id") {
    const IdentityParams a = identityParamsFor(42);
    const IdentityParams b = identityParamsFor(42);
    CHECK(a.aspect == b.aspect);
    CHECK(a.skinR == b.skinR);
    CHECK(a.eyeSpacing == b.eyeSpacing);
    const IdentityParams c = identityParamsFor(43);
    CHECK((a.aspect != c.aspect || a.skinR != c.skinR || a.noseLength != c.noseLength));
}

TEST_CASE("rendering is deterministic and quantized") {
    SceneSpec spec;
    spec.identityId = 3;
    spec.attributes = {true, false, true, false};
    spec.backgroundSeed = 99;
    spec.renderSeed = 7;
    const Sample s1 = renderSample(spec, 32);
    const Sample s2 = renderSample(spec, 32);
    REQUIRE(s1.image.sameShape(s2.image));
    for (std::size_t i = 0; i < s1.image.numel(); ++i) {
        CHECK(s1.image[i] == s2.image[i]);
        // every value sits exactly on the 8-bit grid
        const real k = s1.image[i] * 255.0;
        CHECK(std::abs(k - std::round(k)) < 1e-9);
    }
    for (std::size_t i = 0; i < s1.mask.numel(); ++i)
        CHECK((s1.mask[i] == 0.0 || s1.mask[i] == 1.0));
}

TEST_CASE("attribute toggles repaint only inside the mask") {
    SceneSpec spec;
    spec.identityId = 5;
    spec.backgroundSeed = 4;
    spec.renderSeed = 11;
    for (int a = 0; a < kNumAttributes; ++a) {
        SceneSpec toggled = spec;
        toggled.attributes[static_cast<std::size_t>(a)] = true;
        const Sample off = renderSample(spec, 32);
        const Sample on = renderSample(toggled, 32);
        bool anyDiff = false;
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t m = 0; m < off.mask.numel(); ++m) {
                const std::size_t i = c * off.mask.numel() + m;
                if (off.image[i] != on.image[i]) {
                    anyDiff = true;
                    CHECK(off.mask[m] == 1.0);
                }
            }
        CHECK(anyDiff);  // every attribute must be visible
    }
}

TEST_CASE("background depends only on the background seed") {
    SceneSpec a;
    a.identityId = 1;
    a.backgroundSeed = 123;
    a.renderSeed = 5;
    SceneSpec b = a;
    b.identityId = 2;
    b.renderSeed = 77;
    b.attributes = {true, true, true, true};
    const Sample sa = renderSample(a, 32);
    const Sample sb = renderSample(b, 32);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t m = 0; m < sa.mask.numel(); ++m)
            if (sa.mask[m] == 0.0 && sb.mask[m] == 0.0) {
                const std::size_t i = c * sa.mask.numel() + m;
                CHECK(sa.image[i] == sb.image[i]);
            }
}

TEST_CASE("dataset generation round-trips through files") {
    const std::string dir = "synthdata-test-ds";
    std::filesystem::remove_all(dir);
    DatasetConfig cfg;
    cfg.numIdentities = 5;
    cfg.samplesPerIdentity = 8;
    cfg.size = 32;
    cfg.outDir = dir;
    cfg.seed = 21;
    generateDataset(cfg);

    const Dataset ds = Dataset::load(dir);
    CHECK(ds.imageSize() == 32);
    CHECK(ds.records().size() == 40);
    CHECK(ds.numIdentities() == 5);
    CHECK(ds.trainIndices().size() + ds.testIndices().size() == 40);
    CHECK(!ds.testIndices().empty());

    // PNG quantization chosen so files reproduce the in-memory tensors
    const Sample s = ds.loadSample(0);
    CHECK(s.image.dim(0) == 3);
    for (std::size_t i = 0; i < s.image.numel(); ++i) {
        const real k = s.image[i] * 255.0;
        CHECK(std::abs(k - std::round(k)) < 1e-9);
    }

    // both polarities must exist for every attribute so pairs can be drawn
    for (const std::string& name : attributeNames()) {
        std::mt19937_64 rng(3);
        const auto [xi, yi] = ds.samplePair(name, rng);
        const int a = attributeIndex(name);
        CHECK(ds.records()[static_cast<std::size_t>(xi)].attributes[static_cast<std::size_t>(a)]);
        CHECK_FALSE(
            ds.records()[static_cast<std::size_t>(yi)].attributes[static_cast<std::size_t>(a)]);
    }

    // same config regenerates the identical manifest ordering
    const std::string dir2 = "synthdata-test-ds2";
    std::filesystem::remove_all(dir2);
    DatasetConfig cfg2 = cfg;
    cfg2.outDir = dir2;
    generateDataset(cfg2);
    const Dataset ds2 = Dataset::load(dir2);
    REQUIRE(ds2.records().size() == ds.records().size());
    for (std::size_t i = 0; i < ds.records().size(); ++i) {
        CHECK(ds.records()[i].identityId == ds2.records()[i].identityId);
        CHECK(ds.records()[i].attributes == ds2.records()[i].attributes);
        const Sample u = ds.loadSample(static_cast<int>(i));
        const Sample v = ds2.loadSample(static_cast<int>(i));
        for (std::size_t j = 0; j < u.image.numel(); ++j) CHECK(u.image[j] == v.image[j]);
    }
    std::filesystem::remove_all(dir);
    std::filesystem::remove_all(dir2);
}

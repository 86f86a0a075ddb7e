#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "maae/errors.hpp"
#include "maae/tensor.hpp"

namespace maae::data {

inline constexpr int kNumAttributes = 4;

/// Fixed ordered attribute list carried by every sample.
const std::array<std::string, kNumAttributes>& attributeNames();
int attributeIndex(const std::string& name);  // throws ConfigError on unknown name

/// Continuous per-identity face geometry, a pure function of identityId.
struct IdentityParams {
    real aspect;       // face ellipse width/height ratio
    real skinR, skinG, skinB;
    real eyeSpacing;   // fraction of face half-width
    real noseLength;   // fraction of image size
};
IdentityParams identityParamsFor(int identityId);

struct SceneSpec {
    int identityId = 0;
    std::array<bool, kNumAttributes> attributes{};
    std::uint64_t backgroundSeed = 0;
    std::uint64_t renderSeed = 0;
};

struct Sample {
    Tensor image;  // {3, H, W}, values quantized to k/255
    Tensor mask;   // {H, W}, values in {0, 1}
    std::array<bool, kNumAttributes> attributes{};
    int identityId = 0;
};

/// Deterministic procedural render. Attribute toggles repaint only inside the
/// foreground mask; the background depends on backgroundSeed alone.
Sample renderSample(const SceneSpec& spec, int size);

struct DatasetConfig {
    int numIdentities = 10;
    int samplesPerIdentity = 8;
    int size = 32;
    std::string outDir;
    std::uint64_t seed = 0;
    double testFraction = 0.2;
};

/// Writes images/, masks/ and manifest.jsonl under config.outDir.
void generateDataset(const DatasetConfig& config);

struct ManifestRecord {
    std::string imagePath;
    std::string maskPath;
    int identityId = 0;
    std::array<bool, kNumAttributes> attributes{};
    bool train = true;
};

class Dataset {
public:
    static Dataset load(const std::string& dir);

    const std::string& rootDir() const { return rootDir_; }
    int imageSize() const { return size_; }
    const std::vector<ManifestRecord>& records() const { return records_; }
    const std::vector<int>& trainIndices() const { return trainIndices_; }
    const std::vector<int>& testIndices() const { return testIndices_; }
    int numIdentities() const { return numIdentities_; }

    Sample loadSample(int index) const;

    /// Uniform draw of a training pair (x with attribute, y without).
    std::pair<int, int> samplePair(const std::string& attribute,
                                   std::mt19937_64& rng) const;

private:
    std::string rootDir_;
    int size_ = 0;
    int numIdentities_ = 0;
    std::vector<ManifestRecord> records_;
    std::vector<int> trainIndices_, testIndices_;
};

}  // namespace maae::data

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "maae/checkpoint.hpp"
#include "maae/layers.hpp"
#include "maae/synthdata.hpp"

namespace maae::clf {

/// Small conv classifier; the penultimate activation doubles as a frozen
/// feature extractor (identity features for the ID loss).
class ConvClassifier {
public:
    ConvClassifier(int inputSize, int numOutputs, int featureDim = 64);
    void init(std::mt19937_64& rng);

    Tensor logits(const Tensor& x, Trace* trace) const;
    Tensor backwardLogits(const Tensor& gLogits, Trace& trace);

    /// Penultimate features {N, featureDim}; trace enables backprop to x.
    Tensor features(const Tensor& x, Trace* trace) const;
    Tensor backwardFeatures(const Tensor& gFeat, Trace& trace);

    std::vector<Param*> params();
    int numOutputs() const { return numOutputs_; }
    int featureDim() const { return featureDim_; }
    int inputSize() const { return inputSize_; }

    void saveTo(ckpt::Archive& a, const std::string& prefix);
    void loadFrom(const ckpt::Archive& a, const std::string& prefix);

private:
    int inputSize_, numOutputs_, featureDim_;
    std::size_t featureLayerCount_;  // layers making up the feature trunk
    std::unique_ptr<Sequential> body_;
};

real softmaxCrossEntropy(const Tensor& logits, const std::vector<int>& labels, Tensor* grad);
real bceWithLogits(const Tensor& logits, const Tensor& targets, Tensor* grad);

struct ClassifierTrainConfig {
    int epochs = 20;
    int batchSize = 32;
    real learningRate = 1e-3;
    std::uint64_t seed = 1;
};

/// Trains on the train split, reports held-out accuracy, saves the checkpoint.
real trainIdentityClassifier(const data::Dataset& ds, const ClassifierTrainConfig& cfg,
                             const std::string& outPath);
real trainAttributeClassifier(const data::Dataset& ds, const ClassifierTrainConfig& cfg,
                              const std::string& outPath);

ConvClassifier loadClassifier(const std::string& path);

/// Top-1 nearest-neighbor identity retrieval accuracy in feature space,
/// test queries against the train gallery.
real identityRetrievalTop1(const ConvClassifier& c, const data::Dataset& ds);

/// Per-attribute prediction: sigmoid(logits) > 0.5.
std::vector<bool> predictAttributes(const ConvClassifier& c, const Tensor& image);
/// Sigmoid confidence for one attribute index.
real attributeConfidence(const ConvClassifier& c, const Tensor& image, int attrIndex);

}  // namespace maae::clf

#pragma once

#include <nlohmann/json.hpp>

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "maae/classifiers.hpp"
#include "maae/nets.hpp"
#include "maae/objective.hpp"
#include "maae/optim.hpp"
#include "maae/synthdata.hpp"

namespace maae::train {

struct DeltaCalibration {
    enum class Mode { fixed, halfRange };
    Mode mode = Mode::halfRange;
    real value = 5.0;        // used when mode == fixed
    int warmupBatches = 4;
};

struct TrainConfig {
    std::string datasetPath;
    std::string attribute = "hairBlond";
    int epochs = 10;
    int batchSize = 16;  // samples per step; batchSize/2 opposite-attribute pairs
    real lrGenerator = 2e-4;
    real lrDiscriminator = 2e-4;
    objective::LossWeights weights;
    std::uint64_t seed = 0;
    std::string checkpointDir;
    std::string idExtractorPath;
    DeltaCalibration delta;
    bool discriminatorSeesManipulated = false;  // extra fakes for the D update
    bool polarityFirstCycle = false;            // first cycle hop moves away from the label
    bool manipulateWholeMap = false;            // ablation: shift every latent position
    nets::NetworkConfig network = nets::NetworkConfig::defaults();
    int logEvery = 1;

    void validate() const;
    nlohmann::json toJson() const;
    static TrainConfig fromJson(const nlohmann::json& j);
};

/// Streaming extrema of latent values over warmup batches.
struct RunningRange {
    real minSeen = std::numeric_limits<real>::infinity();
    real maxSeen = -std::numeric_limits<real>::infinity();
    long count = 0;

    void observe(const Tensor& t) {
        for (std::size_t i = 0; i < t.numel(); ++i) {
            minSeen = std::min(minSeen, t[i]);
            maxSeen = std::max(maxSeen, t[i]);
        }
        ++count;
    }
    real halfRange() const { return (maxSeen - minSeen) / 2.0; }
};

/// (max - min) / 2 of encoder mu over the warmup batches.
/// Throws CalibrationError on a constant (zero-range) latent stream.
real calibrateDelta(const nets::Encoder& encoder, const std::vector<Tensor>& warmupBatches);

class Trainer {
public:
    explicit Trainer(TrainConfig config);

    /// One alternating min-max step on a batch of opposite-attribute pairs.
    /// x* carry the attribute, y* do not; masks are {B, S, S}.
    objective::LossReport trainStep(const Tensor& xBatch, const Tensor& xMasks,
                                    const Tensor& yBatch, const Tensor& yMasks,
                                    std::mt19937_64& rng);

    /// Full run (calibration, epochs, logging, checkpoints).
    /// Returns the final checkpoint path.
    std::string train(const std::optional<std::string>& resumeFrom = std::nullopt);

    nets::Model& model() { return *model_; }
    clf::ConvClassifier& idExtractor() { return *idNet_; }
    const TrainConfig& config() const { return config_; }

    void saveCheckpoint(const std::string& path, int epoch, real valCycleError);
    void loadCheckpoint(const std::string& path, int* epoch);

private:
    void calibrateAttributeSign(const std::vector<data::Sample>& cache,
                                const std::vector<int>& pos, const std::vector<int>& neg);

    TrainConfig config_;
    std::unique_ptr<nets::Model> model_;
    std::unique_ptr<clf::ConvClassifier> idNet_;
    std::unique_ptr<Adam> adamG_, adamD_;
    std::vector<Param*> genParams_, discParams_, idParams_;
};

/// Loads a trained model (+ delta, pixel set, attribute signs) for evaluation.
struct LoadedModel {
    std::unique_ptr<nets::Model> model;
    TrainConfig trainConfig;
    int epoch = 0;
};
LoadedModel loadModel(const std::string& checkpointPath);

}  // namespace maae::train

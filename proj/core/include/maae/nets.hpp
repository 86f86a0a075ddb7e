#pragma once

#include <nlohmann/json.hpp>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "maae/errors.hpp"
#include "maae/layers.hpp"
#include "maae/rfcover.hpp"
#include "maae/tensor.hpp"

namespace maae::nets {

/// Half-open channel range [lo, hi).
struct ChannelRange {
    int lo = 0;
    int hi = 0;
    bool operator==(const ChannelRange&) const = default;
};

struct NetworkConfig {
    int inputSize = 32;
    std::vector<int> encoderWidths = {16, 32, 64};  // three strided stages
    int latentChannels = 32;                        // C
    std::map<std::string, ChannelRange> attributeChannelGroups;

    /// Geometry of the encoder conv stack (three k4/s2/p1 stages + k3/s1/p1).
    std::vector<rf::LayerSpec> encoderLayerSpecs() const;
    int latentSpatial() const;  // F, derived and validated via rfcover

    void validate() const;
    static NetworkConfig defaults();

    nlohmann::json toJson() const;
    static NetworkConfig fromJson(const nlohmann::json& j);
};

struct LatentCode {
    Tensor mu;      // {N, C, F, F}
    Tensor logvar;  // {N, C, F, F}
};

struct ManipulationSpec {
    std::vector<std::pair<int, int>> positions2d;
    ChannelRange channels;
    real delta = 0;
    std::string attribute;
};

/// z = mu + exp(logvar/2) * noise, elementwise.
Tensor reparameterize(const Tensor& mu, const Tensor& logvar, const Tensor& noise);

/// Adds spec.delta at every (row, col) in positions2d for every channel in the
/// group; all other entries are bit-identical copies.
Tensor manipulate(const Tensor& z, const ManipulationSpec& spec);

class Encoder {
public:
    explicit Encoder(const NetworkConfig& cfg);
    void init(std::mt19937_64& rng);

    /// x: {N, 3, S, S} in [0,1].
    LatentCode encode(const Tensor& x, Trace* trace) const;
    /// Backward from (d/dmu, d/dlogvar); returns gradient w.r.t. the image.
    Tensor backward(const Tensor& gmu, const Tensor& glogvar, Trace& trace);

    std::vector<Param*> params();
    Sequential& body() { return *body_; }

private:
    int inputSize_, latentChannels_, latentSpatial_;
    std::unique_ptr<Sequential> body_;
};

class Decoder {
public:
    explicit Decoder(const NetworkConfig& cfg);
    void init(std::mt19937_64& rng);

    /// z: {N, C, F, F} -> image {N, 3, S, S} in [0,1] (sigmoid bounded).
    Tensor decode(const Tensor& z, Trace* trace) const;
    Tensor backward(const Tensor& gy, Trace& trace);

    std::vector<Param*> params();
    Sequential& body() { return *body_; }

private:
    std::unique_ptr<Sequential> body_;
};

class Discriminator {
public:
    explicit Discriminator(const NetworkConfig& cfg);
    void init(std::mt19937_64& rng);

    /// x: {N, 3, S, S} -> probabilities {N, 1} in (0,1).
    Tensor discriminate(const Tensor& x, Trace* trace) const;
    Tensor backward(const Tensor& gp, Trace& trace);

    std::vector<Param*> params();
    Sequential& body() { return *body_; }

private:
    std::unique_ptr<Sequential> body_;
};

/// Generator bundle plus manipulation metadata; the trainable model state.
struct Model {
    NetworkConfig config;
    Encoder encoder;
    Decoder decoder;
    Discriminator discriminator;
    rf::RFParams rfParams;
    rf::PixelSet pixelSet;
    real delta = 0;  // calibrated |delta|
    std::map<std::string, int> attributeSign;  // +1: +delta strengthens

    explicit Model(const NetworkConfig& cfg);
    void init(std::mt19937_64& rng);

    ManipulationSpec manipulationSpec(const std::string& attribute, real delta) const;

    /// Test-time G(x): De(mu), optionally through `manipulate`.
    Tensor generate(const Tensor& x, const std::optional<ManipulationSpec>& spec) const;
};

}  // namespace maae::nets

#include "maae/nets.hpp"

#include <cmath>

namespace maae::nets {

std::vector<rf::LayerSpec> NetworkConfig::encoderLayerSpecs() const {
    std::vector<rf::LayerSpec> specs;
    for (std::size_t i = 0; i < encoderWidths.size(); ++i)
        specs.push_back({4, 2, 1});
    specs.push_back({3, 1, 1});
    return specs;
}

int NetworkConfig::latentSpatial() const {
    const auto specs = encoderLayerSpecs();
    return rf::stackOutputSize(specs, inputSize);
}

void NetworkConfig::validate() const {
    if (inputSize != 32 && inputSize != 64)
        throw ConfigError("NetworkConfig: inputSize must be 32 or 64");
    if (encoderWidths.size() != 3)
        throw ConfigError("NetworkConfig: expected 3 strided encoder stages");
    if (latentChannels < 1) throw ConfigError("NetworkConfig: latentChannels < 1");
    // Channel groups must be disjoint subranges of [0, C).
    std::vector<ChannelRange> ranges;
    for (const auto& [name, r] : attributeChannelGroups) {
        if (r.lo < 0 || r.hi > latentChannels || r.lo >= r.hi)
            throw ConfigError("NetworkConfig: bad channel group for " + name);
        for (const auto& other : ranges)
            if (r.lo < other.hi && other.lo < r.hi)
                throw ConfigError("NetworkConfig: overlapping channel groups");
        ranges.push_back(r);
    }
}

NetworkConfig NetworkConfig::defaults() {
    NetworkConfig cfg;
    cfg.inputSize = 32;
    cfg.encoderWidths = {16, 32, 64};
    cfg.latentChannels = 32;
    cfg.attributeChannelGroups = {
        {"hairBlond", {0, 8}},
        {"glasses", {8, 16}},
        {"mouthOpen", {16, 24}},
        {"paleSkin", {24, 32}},
    };
    cfg.validate();
    return cfg;
}

nlohmann::json NetworkConfig::toJson() const {
    nlohmann::json j;
    j["inputSize"] = inputSize;
    j["encoderWidths"] = encoderWidths;
    j["latentChannels"] = latentChannels;
    nlohmann::json groups;
    for (const auto& [name, r] : attributeChannelGroups) groups[name] = {r.lo, r.hi};
    j["attributeChannelGroups"] = groups;
    return j;
}

NetworkConfig NetworkConfig::fromJson(const nlohmann::json& j) {
    NetworkConfig cfg;
    cfg.inputSize = j.at("inputSize").get<int>();
    cfg.encoderWidths = j.at("encoderWidths").get<std::vector<int>>();
    cfg.latentChannels = j.at("latentChannels").get<int>();
    cfg.attributeChannelGroups.clear();
    for (const auto& [name, r] : j.at("attributeChannelGroups").items())
        cfg.attributeChannelGroups[name] = {r.at(0).get<int>(), r.at(1).get<int>()};
    cfg.validate();
    return cfg;
}

Tensor reparameterize(const Tensor& mu, const Tensor& logvar, const Tensor& noise) {
    if (!mu.sameShape(logvar) || !mu.sameShape(noise))
        throw ConfigError("reparameterize: shape mismatch");
    Tensor z = mu;
    for (std::size_t i = 0; i < z.numel(); ++i)
        z[i] += std::exp(logvar[i] * 0.5) * noise[i];
    return z;
}

Tensor manipulate(const Tensor& z, const ManipulationSpec& spec) {
    const int C = z.dim(1), F = z.dim(2);
    if (spec.channels.lo < 0 || spec.channels.hi > C || spec.channels.lo >= spec.channels.hi)
        throw ConfigError("manipulate: channel group out of range");
    Tensor out = z;
    const int N = z.dim(0);
    for (const auto& [r, c] : spec.positions2d) {
        if (r < 0 || r >= F || c < 0 || c >= z.dim(3))
            throw ConfigError("manipulate: pixel position out of range");
        for (int n = 0; n < N; ++n)
            for (int ch = spec.channels.lo; ch < spec.channels.hi; ++ch)
                out.at(n, ch, r, c) += spec.delta;
    }
    return out;
}

// ---------------------------------------------------------------- Encoder

Encoder::Encoder(const NetworkConfig& cfg)
    : inputSize_(cfg.inputSize),
      latentChannels_(cfg.latentChannels),
      latentSpatial_(cfg.latentSpatial()),
      body_(std::make_unique<Sequential>()) {
    const auto& w = cfg.encoderWidths;
    body_->add(std::make_unique<Conv2d>("enc1", 3, w[0], 4, 2, 1));
    body_->add(std::make_unique<LeakyReLU>());
    body_->add(std::make_unique<Conv2d>("enc2", w[0], w[1], 4, 2, 1));
    body_->add(std::make_unique<LeakyReLU>());
    body_->add(std::make_unique<Conv2d>("enc3", w[1], w[2], 4, 2, 1));
    body_->add(std::make_unique<LeakyReLU>());
    body_->add(std::make_unique<Conv2d>("enc4", w[2], 2 * cfg.latentChannels, 3, 1, 1));
}

void Encoder::init(std::mt19937_64& rng) {
    std::vector<Param*> ps;
    body_->collectParams(ps);
    for (std::size_t i = 0; i < body_->size(); ++i)
        if (auto* c = dynamic_cast<Conv2d*>(&body_->layer(i))) c->initHe(rng);
}

LatentCode Encoder::encode(const Tensor& x, Trace* trace) const {
    if (x.rank() != 4 || x.dim(1) != 3 || x.dim(2) != inputSize_ || x.dim(3) != inputSize_)
        throw ConfigError("encode: bad input shape");
    const Tensor h = body_->forward(x, trace);
    const int N = h.dim(0), F = latentSpatial_, C = latentChannels_;
    LatentCode code{Tensor({N, C, F, F}), Tensor({N, C, F, F})};
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < F; ++i)
                for (int j = 0; j < F; ++j) {
                    code.mu.at(n, c, i, j) = h.at(n, c, i, j);
                    code.logvar.at(n, c, i, j) = h.at(n, C + c, i, j);
                }
    return code;
}

Tensor Encoder::backward(const Tensor& gmu, const Tensor& glogvar, Trace& trace) {
    const int N = gmu.dim(0), C = latentChannels_, F = latentSpatial_;
    Tensor gh({N, 2 * C, F, F});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < F; ++i)
                for (int j = 0; j < F; ++j) {
                    gh.at(n, c, i, j) = gmu.at(n, c, i, j);
                    gh.at(n, C + c, i, j) = glogvar.at(n, c, i, j);
                }
    return body_->backward(gh, trace);
}

std::vector<Param*> Encoder::params() {
    std::vector<Param*> ps;
    body_->collectParams(ps);
    return ps;
}

// ---------------------------------------------------------------- Decoder

Decoder::Decoder(const NetworkConfig& cfg) : body_(std::make_unique<Sequential>()) {
    const auto& w = cfg.encoderWidths;
    body_->add(std::make_unique<Conv2d>("dec1", cfg.latentChannels, w[2], 3, 1, 1));
    body_->add(std::make_unique<LeakyReLU>());
    body_->add(std::make_unique<Upsample2x>());
    body_->add(std::make_unique<Conv2d>("dec2", w[2], w[1], 3, 1, 1));
    body_->add(std::make_unique<LeakyReLU>());
    body_->add(std::make_unique<Upsample2x>());
    body_->add(std::make_unique<Conv2d>("dec3", w[1], w[0], 3, 1, 1));
    body_->add(std::make_unique<LeakyReLU>());
    body_->add(std::make_unique<Upsample2x>());
    body_->add(std::make_unique<Conv2d>("dec4", w[0], 3, 3, 1, 1));
    body_->add(std::make_unique<Sigmoid>());
}

void Decoder::init(std::mt19937_64& rng) {
    for (std::size_t i = 0; i < body_->size(); ++i)
        if (auto* c = dynamic_cast<Conv2d*>(&body_->layer(i))) c->initHe(rng);
}

Tensor Decoder::decode(const Tensor& z, Trace* trace) const {
    if (z.rank() != 4) throw ConfigError("decode: latent must be 4-D");
    return body_->forward(z, trace);
}

Tensor Decoder::backward(const Tensor& gy, Trace& trace) { return body_->backward(gy, trace); }

std::vector<Param*> Decoder::params() {
    std::vector<Param*> ps;
    body_->collectParams(ps);
    return ps;
}

// ---------------------------------------------------------------- Discriminator

Discriminator::Discriminator(const NetworkConfig& cfg) : body_(std::make_unique<Sequential>()) {
    const auto& w = cfg.encoderWidths;
    body_->add(std::make_unique<Conv2d>("disc1", 3, w[0], 4, 2, 1));
    body_->add(std::make_unique<LeakyReLU>());
    body_->add(std::make_unique<Conv2d>("disc2", w[0], w[1], 4, 2, 1));
    body_->add(std::make_unique<LeakyReLU>());
    body_->add(std::make_unique<Conv2d>("disc3", w[1], w[2], 4, 2, 1));
    body_->add(std::make_unique<LeakyReLU>());
    body_->add(std::make_unique<Flatten>());
    const int feat = w[2] * (cfg.inputSize / 8) * (cfg.inputSize / 8);
    body_->add(std::make_unique<Linear>("discFc", feat, 1));
    body_->add(std::make_unique<Sigmoid>());
}

void Discriminator::init(std::mt19937_64& rng) {
    for (std::size_t i = 0; i < body_->size(); ++i) {
        if (auto* c = dynamic_cast<Conv2d*>(&body_->layer(i))) c->initHe(rng);
        if (auto* l = dynamic_cast<Linear*>(&body_->layer(i))) l->initHe(rng);
    }
}

Tensor Discriminator::discriminate(const Tensor& x, Trace* trace) const {
    if (x.rank() != 4 || x.dim(1) != 3) throw ConfigError("discriminate: bad input shape");
    return body_->forward(x, trace);
}

Tensor Discriminator::backward(const Tensor& gp, Trace& trace) {
    return body_->backward(gp, trace);
}

std::vector<Param*> Discriminator::params() {
    std::vector<Param*> ps;
    body_->collectParams(ps);
    return ps;
}

// ---------------------------------------------------------------- Model

Model::Model(const NetworkConfig& cfg)
    : config(cfg), encoder(cfg), decoder(cfg), discriminator(cfg) {
    config.validate();
    const auto specs = config.encoderLayerSpecs();
    rfParams = rf::composeReceptiveField(specs);
    const int F = config.latentSpatial();
    pixelSet = rf::minimalCoveringSet(rfParams, config.inputSize, F);
    if (!rf::verifyCoverage(pixelSet, rfParams, config.inputSize))
        throw GeometryError("Model: pixel set does not cover the input");
    for (const auto& [name, range] : config.attributeChannelGroups)
        attributeSign[name] = +1;
}

void Model::init(std::mt19937_64& rng) {
    encoder.init(rng);
    decoder.init(rng);
    discriminator.init(rng);
}

ManipulationSpec Model::manipulationSpec(const std::string& attribute, real delta) const {
    const auto it = config.attributeChannelGroups.find(attribute);
    if (it == config.attributeChannelGroups.end())
        throw ConfigError("unknown attribute: " + attribute);
    ManipulationSpec spec;
    spec.positions2d = pixelSet.positions2d;
    spec.channels = it->second;
    spec.delta = delta;
    spec.attribute = attribute;
    return spec;
}

Tensor Model::generate(const Tensor& x, const std::optional<ManipulationSpec>& spec) const {
    const LatentCode code = encoder.encode(x, nullptr);
    const Tensor z = spec ? manipulate(code.mu, *spec) : code.mu;
    return decoder.decode(z, nullptr);
}

}  // namespace maae::nets

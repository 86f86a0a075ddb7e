#include "maae/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "maae/checkpoint.hpp"

namespace maae::train {

namespace fs = std::filesystem;
using nlohmann::json;
using objective::LossReport;
using objective::LossWeights;

namespace {

Tensor concatBatch(const Tensor& a, const Tensor& b) {
    std::vector<int> shape = a.shape();
    shape[0] = a.dim(0) + b.dim(0);
    Tensor out(shape);
    std::copy(a.data(), a.data() + a.numel(), out.data());
    std::copy(b.data(), b.data() + b.numel(), out.data() + a.numel());
    return out;
}

std::pair<Tensor, Tensor> splitBatch(const Tensor& t, int nFirst) {
    std::vector<int> sa = t.shape(), sb = t.shape();
    sa[0] = nFirst;
    sb[0] = t.dim(0) - nFirst;
    Tensor a(sa), b(sb);
    std::copy(t.data(), t.data() + a.numel(), a.data());
    std::copy(t.data() + a.numel(), t.data() + t.numel(), b.data());
    return {std::move(a), std::move(b)};
}

Tensor gaussianLike(const Tensor& t, std::mt19937_64& rng) {
    Tensor n(t.shape());
    std::normal_distribution<real> dist(0.0, 1.0);
    for (std::size_t i = 0; i < n.numel(); ++i) n[i] = dist(rng);
    return n;
}

void addScaled(Tensor& acc, const Tensor& g, real scale) {
    for (std::size_t i = 0; i < acc.numel(); ++i) acc[i] += scale * g[i];
}

void requireFinite(real v, const char* term) {
    if (!std::isfinite(v))
        throw std::runtime_error(std::string("trainStep: non-finite loss term '") + term + "'");
}

std::mt19937_64 epochRng(std::uint64_t seed, int epoch) {
    return std::mt19937_64(seed * 0x9E3779B97F4A7C15ull +
                           static_cast<std::uint64_t>(epoch + 1) * 0xC2B2AE3D27D4EB4Full);
}

json lossReportJson(const LossReport& r) {
    json j;
    j["vae"] = r.vae;
    j["gan_g"] = r.gan_g;
    j["gan_d"] = r.gan_d;
    j["id"] = r.id;
    j["cycle"] = r.cycle;
    j["mask"] = r.mask;
    j["total_g"] = r.total_g;
    j["total_d"] = r.total_d;
    return j;
}

}  // namespace

// ------------------------------------------------------------- TrainConfig

void TrainConfig::validate() const {
    if (epochs < 1 || batchSize < 2 || batchSize % 2 != 0)
        throw ConfigError("TrainConfig: epochs >= 1 and even batchSize >= 2 required");
    if (lrGenerator <= 0 || lrDiscriminator <= 0)
        throw ConfigError("TrainConfig: learning rates must be positive");
    if (delta.warmupBatches < 1) throw ConfigError("TrainConfig: warmupBatches >= 1");
    weights.validate();
    network.validate();
    data::attributeIndex(attribute);  // throws on unknown
}

json TrainConfig::toJson() const {
    json j;
    j["datasetPath"] = datasetPath;
    j["attribute"] = attribute;
    j["epochs"] = epochs;
    j["batchSize"] = batchSize;
    j["lrGenerator"] = lrGenerator;
    j["lrDiscriminator"] = lrDiscriminator;
    j["weights"] = {{"lambda1", weights.lambda1}, {"lambda2", weights.lambda2},
                    {"alpha1", weights.alpha1},   {"alpha2", weights.alpha2},
                    {"alpha3", weights.alpha3},   {"alpha4", weights.alpha4},
                    {"alpha5", weights.alpha5},   {"delta", weights.delta}};
    j["seed"] = seed;
    j["checkpointDir"] = checkpointDir;
    j["idExtractorPath"] = idExtractorPath;
    j["deltaCalibration"] = {
        {"mode", delta.mode == DeltaCalibration::Mode::fixed ? "fixed" : "halfRange"},
        {"value", delta.value},
        {"warmupBatches", delta.warmupBatches}};
    j["discriminatorSeesManipulated"] = discriminatorSeesManipulated;
    j["polarityFirstCycle"] = polarityFirstCycle;
    j["manipulateWholeMap"] = manipulateWholeMap;
    j["network"] = network.toJson();
    j["logEvery"] = logEvery;
    return j;
}

TrainConfig TrainConfig::fromJson(const json& j) {
    TrainConfig c;
    c.datasetPath = j.value("datasetPath", c.datasetPath);
    c.attribute = j.value("attribute", c.attribute);
    c.epochs = j.value("epochs", c.epochs);
    c.batchSize = j.value("batchSize", c.batchSize);
    c.lrGenerator = j.value("lrGenerator", c.lrGenerator);
    c.lrDiscriminator = j.value("lrDiscriminator", c.lrDiscriminator);
    if (j.contains("weights")) {
        const json& w = j.at("weights");
        c.weights.lambda1 = w.value("lambda1", c.weights.lambda1);
        c.weights.lambda2 = w.value("lambda2", c.weights.lambda2);
        c.weights.alpha1 = w.value("alpha1", c.weights.alpha1);
        c.weights.alpha2 = w.value("alpha2", c.weights.alpha2);
        c.weights.alpha3 = w.value("alpha3", c.weights.alpha3);
        c.weights.alpha4 = w.value("alpha4", c.weights.alpha4);
        c.weights.alpha5 = w.value("alpha5", c.weights.alpha5);
        c.weights.delta = w.value("delta", c.weights.delta);
    }
    c.seed = j.value("seed", c.seed);
    c.checkpointDir = j.value("checkpointDir", c.checkpointDir);
    c.idExtractorPath = j.value("idExtractorPath", c.idExtractorPath);
    if (j.contains("deltaCalibration")) {
        const json& d = j.at("deltaCalibration");
        const std::string mode = d.value("mode", std::string("halfRange"));
        c.delta.mode = mode == "fixed" ? DeltaCalibration::Mode::fixed
                                       : DeltaCalibration::Mode::halfRange;
        c.delta.value = d.value("value", c.delta.value);
        c.delta.warmupBatches = d.value("warmupBatches", c.delta.warmupBatches);
    }
    c.discriminatorSeesManipulated =
        j.value("discriminatorSeesManipulated", c.discriminatorSeesManipulated);
    c.polarityFirstCycle = j.value("polarityFirstCycle", c.polarityFirstCycle);
    c.manipulateWholeMap = j.value("manipulateWholeMap", c.manipulateWholeMap);
    if (j.contains("network")) c.network = nets::NetworkConfig::fromJson(j.at("network"));
    c.logEvery = j.value("logEvery", c.logEvery);
    return c;
}

// ------------------------------------------------------------- calibration

real calibrateDelta(const nets::Encoder& encoder, const std::vector<Tensor>& warmupBatches) {
    if (warmupBatches.empty()) throw CalibrationError("calibrateDelta: no warmup batches");
    RunningRange range;
    for (const Tensor& batch : warmupBatches) {
        const nets::LatentCode code = encoder.encode(batch, nullptr);
        range.observe(code.mu);
    }
    if (range.halfRange() <= 0)
        throw CalibrationError("calibrateDelta: zero latent value range (constant encoder)");
    return range.halfRange();
}

// ------------------------------------------------------------- Trainer

Trainer::Trainer(TrainConfig config) : config_(std::move(config)) {
    config_.validate();
    model_ = std::make_unique<nets::Model>(config_.network);
    std::mt19937_64 initRng(config_.seed);
    model_->init(initRng);

    if (config_.idExtractorPath.empty())
        throw ConfigError("Trainer: idExtractorPath (frozen identity extractor) is required");
    idNet_ = std::make_unique<clf::ConvClassifier>(clf::loadClassifier(config_.idExtractorPath));

    genParams_ = model_->encoder.params();
    for (Param* p : model_->decoder.params()) genParams_.push_back(p);
    discParams_ = model_->discriminator.params();
    idParams_ = idNet_->params();
    adamG_ = std::make_unique<Adam>(genParams_, config_.lrGenerator);
    adamD_ = std::make_unique<Adam>(discParams_, config_.lrDiscriminator);
    model_->delta = config_.delta.mode == DeltaCalibration::Mode::fixed ? config_.delta.value : 0;
}

LossReport Trainer::trainStep(const Tensor& xBatch, const Tensor& xMasks,
                              const Tensor& yBatch, const Tensor& yMasks,
                              std::mt19937_64& rng) {
    const LossWeights& w = config_.weights;
    const real delta = model_->delta != 0 ? model_->delta : w.delta;
    const int B = xBatch.dim(0);

    // First cycle hop: +delta on x / -delta on y unless polarity-first.
    const real sx = config_.polarityFirstCycle ? -delta : delta;
    const real sy = -sx;
    nets::ManipulationSpec specX = model_->manipulationSpec(config_.attribute, sx);
    nets::ManipulationSpec specY = model_->manipulationSpec(config_.attribute, sy);
    nets::ManipulationSpec specXInv = specX, specYInv = specY;
    specXInv.delta = -sx;
    specYInv.delta = -sy;
    if (config_.manipulateWholeMap) {
        const int F = config_.network.latentSpatial();
        std::vector<std::pair<int, int>> all;
        for (int r = 0; r < F; ++r)
            for (int c = 0; c < F; ++c) all.emplace_back(r, c);
        specX.positions2d = specY.positions2d = all;
        specXInv.positions2d = specYInv.positions2d = all;
    }

    // ---------------- generator forward
    Trace tEx, tEy;
    const nets::LatentCode cx = model_->encoder.encode(xBatch, &tEx);
    const nets::LatentCode cy = model_->encoder.encode(yBatch, &tEy);

    const Tensor noiseX = gaussianLike(cx.mu, rng);
    const Tensor noiseY = gaussianLike(cy.mu, rng);
    const Tensor zx = nets::reparameterize(cx.mu, cx.logvar, noiseX);
    const Tensor zy = nets::reparameterize(cy.mu, cy.logvar, noiseY);

    Trace tDx, tDy;
    const Tensor rx = model_->decoder.decode(zx, &tDx);
    const Tensor ry = model_->decoder.decode(zy, &tDy);

    Trace tDxm, tDym;
    const Tensor gxFirst = model_->decoder.decode(nets::manipulate(cx.mu, specX), &tDxm);
    const Tensor gyFirst = model_->decoder.decode(nets::manipulate(cy.mu, specY), &tDym);

    Trace tEx2, tEy2;
    const nets::LatentCode cx2 = model_->encoder.encode(gxFirst, &tEx2);
    const nets::LatentCode cy2 = model_->encoder.encode(gyFirst, &tEy2);
    Trace tDx2, tDy2;
    const Tensor cycX = model_->decoder.decode(nets::manipulate(cx2.mu, specXInv), &tDx2);
    const Tensor cycY = model_->decoder.decode(nets::manipulate(cy2.mu, specYInv), &tDy2);

    // The generator's adversarial pass covers the same fake set the
    // discriminator is trained on (min-max symmetry of the combined
    // objective): reconstructions, plus the manipulated outputs when the
    // discriminator sees them too.
    Trace tDisc;
    Tensor genFakes = concatBatch(rx, ry);
    if (config_.discriminatorSeesManipulated)
        genFakes = concatBatch(genFakes, concatBatch(gxFirst, gyFirst));
    const Tensor pFakeGen = model_->discriminator.discriminate(genFakes, &tDisc);

    // Identity features; targets have no trace (no gradient into them).
    const Tensor fX = idNet_->features(xBatch, nullptr);
    const Tensor fY = idNet_->features(yBatch, nullptr);
    Trace tFgx, tFgy, tFrx, tFry;
    const Tensor fGx = idNet_->features(gxFirst, &tFgx);
    const Tensor fGy = idNet_->features(gyFirst, &tFgy);
    const Tensor fRx = idNet_->features(rx, &tFrx);
    const Tensor fRy = idNet_->features(ry, &tFry);

    // ---------------- losses
    LossReport report;
    report.vae = 0.5 * (objective::vaeLoss(xBatch, rx, cx.mu, cx.logvar, w.lambda1, w.lambda2) +
                        objective::vaeLoss(yBatch, ry, cy.mu, cy.logvar, w.lambda1, w.lambda2));
    requireFinite(report.vae, "vae");

    report.gan_g = objective::ganLossesBatch(pFakeGen, pFakeGen).second;
    requireFinite(report.gan_g, "gan_g");

    report.id = 0.25 * (objective::idLoss(fX, fGx) + objective::idLoss(fY, fGy) +
                        objective::idLoss(fX, fRx) + objective::idLoss(fY, fRy));
    requireFinite(report.id, "id");

    report.cycle = objective::cycleLoss(xBatch, cycX, yBatch, cycY);
    requireFinite(report.cycle, "cycle");

    report.mask = 0.25 * (objective::maskLoss(xBatch, gxFirst, xMasks) +
                          objective::maskLoss(yBatch, gyFirst, yMasks) +
                          objective::maskLoss(xBatch, rx, xMasks) +
                          objective::maskLoss(yBatch, ry, yMasks));
    requireFinite(report.mask, "mask");

    // ---------------- generator backward
    // adversarial image gradients, split back onto the fakes they came from
    Tensor gGanRx, gGanRy, gGanGx, gGanGy;
    {
        Tensor gp = objective::ganGeneratorGrad(pFakeGen);
        gp *= w.alpha2;
        Tensor gImg = model_->discriminator.backward(gp, tDisc);
        if (config_.discriminatorSeesManipulated) {
            auto [gRecon, gManip] = splitBatch(gImg, 2 * B);
            std::tie(gGanRx, gGanRy) = splitBatch(gRecon, B);
            std::tie(gGanGx, gGanGy) = splitBatch(gManip, B);
        } else {
            std::tie(gGanRx, gGanRy) = splitBatch(gImg, B);
        }
    }

    // cycle -> second decoders -> second encoders -> image grads on first hops
    Tensor gFirstX, gFirstY;
    {
        Tensor g = objective::l1MeanGrad(cycX, xBatch);
        g *= w.alpha4;
        Tensor gz = model_->decoder.backward(g, tDx2);
        Tensor zero = Tensor::zerosLike(gz);
        gFirstX = model_->encoder.backward(gz, zero, tEx2);
    }
    {
        Tensor g = objective::l1MeanGrad(cycY, yBatch);
        g *= w.alpha4;
        Tensor gz = model_->decoder.backward(g, tDy2);
        Tensor zero = Tensor::zerosLike(gz);
        gFirstY = model_->encoder.backward(gz, zero, tEy2);
    }

    // id + mask on the first-hop manipulated outputs
    {
        Tensor gf = objective::idLossGrad(fX, fGx);
        gf *= w.alpha3 * 0.25;
        gFirstX += idNet_->backwardFeatures(gf, tFgx);
        addScaled(gFirstX, objective::maskLossGrad(xBatch, gxFirst, xMasks), w.alpha5 * 0.25);
        if (config_.discriminatorSeesManipulated) gFirstX += gGanGx;
    }
    {
        Tensor gf = objective::idLossGrad(fY, fGy);
        gf *= w.alpha3 * 0.25;
        gFirstY += idNet_->backwardFeatures(gf, tFgy);
        addScaled(gFirstY, objective::maskLossGrad(yBatch, gyFirst, yMasks), w.alpha5 * 0.25);
        if (config_.discriminatorSeesManipulated) gFirstY += gGanGy;
    }

    // through the first-hop decoders into mu
    Tensor gmuX = model_->decoder.backward(gFirstX, tDxm);
    Tensor gmuY = model_->decoder.backward(gFirstY, tDym);

    // reconstruction branch image grads
    Tensor gRx(rx.shape()), gRy(ry.shape());
    addScaled(gRx, objective::l1MeanGrad(rx, xBatch), w.alpha1 * 0.5 * w.lambda2);
    addScaled(gRy, objective::l1MeanGrad(ry, yBatch), w.alpha1 * 0.5 * w.lambda2);
    gRx += gGanRx;
    gRy += gGanRy;
    {
        Tensor gf = objective::idLossGrad(fX, fRx);
        gf *= w.alpha3 * 0.25;
        gRx += idNet_->backwardFeatures(gf, tFrx);
        Tensor gg = objective::idLossGrad(fY, fRy);
        gg *= w.alpha3 * 0.25;
        gRy += idNet_->backwardFeatures(gg, tFry);
    }
    addScaled(gRx, objective::maskLossGrad(xBatch, rx, xMasks), w.alpha5 * 0.25);
    addScaled(gRy, objective::maskLossGrad(yBatch, ry, yMasks), w.alpha5 * 0.25);

    // reconstruction decoders -> reparameterization -> encoder latents
    Tensor gzx = model_->decoder.backward(gRx, tDx);
    Tensor gzy = model_->decoder.backward(gRy, tDy);

    Tensor glvX(cx.logvar.shape()), glvY(cy.logvar.shape());
    for (std::size_t i = 0; i < gzx.numel(); ++i) {
        gmuX[i] += gzx[i];
        glvX[i] = gzx[i] * 0.5 * std::exp(cx.logvar[i] * 0.5) * noiseX[i];
    }
    for (std::size_t i = 0; i < gzy.numel(); ++i) {
        gmuY[i] += gzy[i];
        glvY[i] = gzy[i] * 0.5 * std::exp(cy.logvar[i] * 0.5) * noiseY[i];
    }

    {
        auto [gm, gl] = objective::klDivergenceGrad(cx.mu, cx.logvar);
        addScaled(gmuX, gm, w.alpha1 * 0.5 * w.lambda1);
        addScaled(glvX, gl, w.alpha1 * 0.5 * w.lambda1);
    }
    {
        auto [gm, gl] = objective::klDivergenceGrad(cy.mu, cy.logvar);
        addScaled(gmuY, gm, w.alpha1 * 0.5 * w.lambda1);
        addScaled(glvY, gl, w.alpha1 * 0.5 * w.lambda1);
    }

    model_->encoder.backward(gmuX, glvX, tEx);
    model_->encoder.backward(gmuY, glvY, tEy);

    adamG_->step();
    zeroGrads(genParams_);
    zeroGrads(discParams_);  // stray grads from the generator's GAN term
    zeroGrads(idParams_);    // extractor stays frozen

    // ---------------- discriminator update
    Trace tReal, tFake;
    const Tensor pReal =
        model_->discriminator.discriminate(concatBatch(xBatch, yBatch), &tReal);
    Tensor fakes = concatBatch(rx, ry);
    if (config_.discriminatorSeesManipulated)
        fakes = concatBatch(fakes, concatBatch(gxFirst, gyFirst));
    const Tensor pFake = model_->discriminator.discriminate(fakes, &tFake);

    report.gan_d = objective::ganLossesBatch(pReal, pFake).first;
    requireFinite(report.gan_d, "gan_d");

    auto [gReal, gFake] = objective::ganDiscriminatorGrad(pReal, pFake);
    gReal *= w.alpha2;
    gFake *= w.alpha2;
    model_->discriminator.backward(gFake, tFake);
    model_->discriminator.backward(gReal, tReal);
    adamD_->step();
    zeroGrads(discParams_);

    objective::totalLosses(report, w);
    requireFinite(report.total_g, "total_g");
    requireFinite(report.total_d, "total_d");
    return report;
}

void Trainer::calibrateAttributeSign(const std::vector<data::Sample>& cache,
                                     const std::vector<int>& pos, const std::vector<int>& neg) {
    // Orientation of the attribute axis, measured through the generator itself:
    // pick the sign whose pixel-space response G(x,+delta) - G(x,-delta) aligns
    // with the class-mean image difference (positives - negatives). The
    // encoder-side mean activation is not a reliable proxy -- the decoder's
    // response to a uniform group shift can anti-align with it.
    const int S = config_.network.inputSize;
    const std::size_t cap = 16;
    auto meanImage = [&](const std::vector<int>& idx) {
        Tensor m({3, S, S});
        const std::size_t n = std::min<std::size_t>(idx.size(), cap);
        for (std::size_t i = 0; i < n; ++i) {
            const Tensor& im = cache[static_cast<std::size_t>(idx[i])].image;
            for (std::size_t k = 0; k < m.numel(); ++k) m[k] += im[k];
        }
        for (std::size_t k = 0; k < m.numel(); ++k) m[k] /= static_cast<real>(n);
        return m;
    };
    const Tensor posMean = meanImage(pos);
    const Tensor negMean = meanImage(neg);

    nets::ManipulationSpec plus = model_->manipulationSpec(config_.attribute, model_->delta);
    nets::ManipulationSpec minus = plus;
    minus.delta = -model_->delta;
    real score = 0;
    auto probe = [&](const std::vector<int>& idx) {
        const std::size_t n = std::min<std::size_t>(idx.size(), cap / 2);
        for (std::size_t i = 0; i < n; ++i) {
            Tensor x = cache[static_cast<std::size_t>(idx[i])].image.reshaped({1, 3, S, S});
            const Tensor gp = model_->generate(x, plus);
            const Tensor gm = model_->generate(x, minus);
            for (std::size_t k = 0; k < gp.numel(); ++k)
                score += (gp[k] - gm[k]) * (posMean[k] - negMean[k]);
        }
    };
    probe(pos);
    probe(neg);
    model_->attributeSign[config_.attribute] = score >= 0 ? +1 : -1;
}

void Trainer::saveCheckpoint(const std::string& path, int epoch, real valCycleError) {
    ckpt::Archive a;
    a.meta["version"] = 1;
    a.meta["trainConfig"] = config_.toJson();
    a.meta["network"] = config_.network.toJson();
    a.meta["delta"] = model_->delta;
    a.meta["pixelSet"] = model_->pixelSet.axisPositions;
    a.meta["rfParams"] = {model_->rfParams.size, model_->rfParams.jump, model_->rfParams.start};
    a.meta["attributeSign"] = model_->attributeSign;
    a.meta["epoch"] = epoch;
    a.meta["valCycleError"] = valCycleError;
    ckpt::saveParams(a, model_->encoder.params(), "enc/");
    ckpt::saveParams(a, model_->decoder.params(), "dec/");
    ckpt::saveParams(a, model_->discriminator.params(), "disc/");
    auto saveAdam = [&a](Adam& opt, const std::string& prefix) {
        a.meta[prefix + "step"] = opt.stepCount();
        for (std::size_t i = 0; i < opt.params().size(); ++i) {
            a.add(prefix + "m/" + opt.params()[i]->name, opt.firstMoments()[i]);
            a.add(prefix + "v/" + opt.params()[i]->name, opt.secondMoments()[i]);
        }
    };
    saveAdam(*adamG_, "adamG/");
    saveAdam(*adamD_, "adamD/");
    a.save(path);
}

void Trainer::loadCheckpoint(const std::string& path, int* epoch) {
    const ckpt::Archive a = ckpt::Archive::load(path);
    ckpt::loadParams(a, model_->encoder.params(), "enc/");
    ckpt::loadParams(a, model_->decoder.params(), "dec/");
    ckpt::loadParams(a, model_->discriminator.params(), "disc/");
    model_->delta = a.meta.at("delta").get<real>();
    model_->attributeSign =
        a.meta.at("attributeSign").get<std::map<std::string, int>>();
    auto loadAdam = [&a](Adam& opt, const std::string& prefix) {
        opt.setStepCount(a.meta.at(prefix + "step").get<long>());
        for (std::size_t i = 0; i < opt.params().size(); ++i) {
            opt.firstMoments()[i] = a.get(prefix + "m/" + opt.params()[i]->name);
            opt.secondMoments()[i] = a.get(prefix + "v/" + opt.params()[i]->name);
        }
    };
    loadAdam(*adamG_, "adamG/");
    loadAdam(*adamD_, "adamD/");
    if (epoch) *epoch = a.meta.at("epoch").get<int>();
}

std::string Trainer::train(const std::optional<std::string>& resumeFrom) {
    const data::Dataset ds = data::Dataset::load(config_.datasetPath);
    const int S = ds.imageSize();
    if (S != config_.network.inputSize)
        throw ConfigError("train: dataset size does not match network inputSize");

    // Preload everything; desk-scale datasets fit easily in memory.
    std::vector<data::Sample> cache;
    cache.reserve(ds.records().size());
    for (std::size_t i = 0; i < ds.records().size(); ++i)
        cache.push_back(ds.loadSample(static_cast<int>(i)));

    const int attrIdx = data::attributeIndex(config_.attribute);
    std::vector<int> pos, neg;
    for (int i : ds.trainIndices())
        (cache[static_cast<std::size_t>(i)].attributes[attrIdx] ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty())
        throw ConfigError("train: attribute " + config_.attribute + " lacks a polarity");

    fs::create_directories(config_.checkpointDir);
    const fs::path ckptDir(config_.checkpointDir);

    int startEpoch = 0;
    if (resumeFrom) {
        loadCheckpoint(*resumeFrom, &startEpoch);
        ++startEpoch;
    } else if (config_.delta.mode == DeltaCalibration::Mode::halfRange) {
        // Warmup batches in epoch-0 order, before any update.
        std::mt19937_64 rng = epochRng(config_.seed, 0);
        std::vector<int> order = ds.trainIndices();
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<Tensor> warmup;
        for (int b = 0; b < config_.delta.warmupBatches; ++b) {
            const int lo = b * config_.batchSize;
            if (lo >= static_cast<int>(order.size())) break;
            const int hi = std::min<int>(order.size(), lo + config_.batchSize);
            Tensor batch({hi - lo, 3, S, S});
            for (int i = lo; i < hi; ++i) {
                const Tensor& im = cache[static_cast<std::size_t>(order[i])].image;
                std::copy(im.data(), im.data() + im.numel(),
                          batch.data() + static_cast<std::size_t>(i - lo) * im.numel());
            }
            warmup.push_back(std::move(batch));
        }
        model_->delta = calibrateDelta(model_->encoder, warmup);
    } else {
        model_->delta = config_.delta.value;
    }

    std::ofstream log(ckptDir / "loss_log.jsonl",
                      resumeFrom ? std::ios::app : std::ios::trunc);
    const int stepsPerEpoch =
        static_cast<int>((ds.trainIndices().size() + config_.batchSize - 1) / config_.batchSize);
    const int pairsPerStep = config_.batchSize / 2;

    real bestVal = std::numeric_limits<real>::infinity();
    if (resumeFrom && fs::exists(ckptDir / "best")) {
        const ckpt::Archive best = ckpt::Archive::load((ckptDir / "best").string());
        bestVal = best.meta.at("valCycleError").get<real>();
    }

    std::string lastPath;
    for (int epoch = startEpoch; epoch < config_.epochs; ++epoch) {
        std::mt19937_64 rng = epochRng(config_.seed, epoch);
        std::vector<int> posOrder = pos, negOrder = neg;
        std::shuffle(posOrder.begin(), posOrder.end(), rng);
        std::shuffle(negOrder.begin(), negOrder.end(), rng);

        for (int step = 0; step < stepsPerEpoch; ++step) {
            Tensor xB({pairsPerStep, 3, S, S}), yB({pairsPerStep, 3, S, S});
            Tensor xM({pairsPerStep, S, S}), yM({pairsPerStep, S, S});
            for (int p = 0; p < pairsPerStep; ++p) {
                const data::Sample& sx =
                    cache[static_cast<std::size_t>(posOrder[(step * pairsPerStep + p) % posOrder.size()])];
                const data::Sample& sy =
                    cache[static_cast<std::size_t>(negOrder[(step * pairsPerStep + p) % negOrder.size()])];
                std::copy(sx.image.data(), sx.image.data() + sx.image.numel(),
                          xB.data() + static_cast<std::size_t>(p) * sx.image.numel());
                std::copy(sy.image.data(), sy.image.data() + sy.image.numel(),
                          yB.data() + static_cast<std::size_t>(p) * sy.image.numel());
                std::copy(sx.mask.data(), sx.mask.data() + sx.mask.numel(),
                          xM.data() + static_cast<std::size_t>(p) * sx.mask.numel());
                std::copy(sy.mask.data(), sy.mask.data() + sy.mask.numel(),
                          yM.data() + static_cast<std::size_t>(p) * sy.mask.numel());
            }
            const LossReport report = trainStep(xB, xM, yB, yM, rng);
            if (step % config_.logEvery == 0) {
                json j = lossReportJson(report);
                j["epoch"] = epoch;
                j["step"] = step;
                log << j.dump() << "\n";
            }
        }
        log.flush();

        // Validation cycle error on a capped held-out subset.
        real val = 0;
        {
            const auto& test = ds.testIndices().empty() ? ds.trainIndices() : ds.testIndices();
            const std::size_t cap = std::min<std::size_t>(test.size(), 32);
            nets::ManipulationSpec plus = model_->manipulationSpec(config_.attribute, model_->delta);
            nets::ManipulationSpec minus = plus;
            minus.delta = -model_->delta;
            for (std::size_t i = 0; i < cap; ++i) {
                const data::Sample& s = cache[static_cast<std::size_t>(test[i])];
                Tensor x = s.image.reshaped({1, 3, S, S});
                const Tensor hop1 = model_->generate(x, plus);
                const Tensor hop2 = model_->generate(hop1, minus);
                val += objective::l1Mean(hop2, x);
            }
            val /= static_cast<real>(cap);
        }

        calibrateAttributeSign(cache, pos, neg);
        lastPath = (ckptDir / ("epoch_" + std::to_string(epoch))).string();
        saveCheckpoint(lastPath, epoch, val);
        if (val < bestVal) {
            bestVal = val;
            saveCheckpoint((ckptDir / "best").string(), epoch, val);
        }
        std::cerr << "epoch " << epoch << " done, val cycle error " << val << "\n";
    }
    return lastPath;
}

LoadedModel loadModel(const std::string& checkpointPath) {
    const ckpt::Archive a = ckpt::Archive::load(checkpointPath);
    LoadedModel lm;
    lm.trainConfig = TrainConfig::fromJson(a.meta.at("trainConfig"));
    lm.model = std::make_unique<nets::Model>(nets::NetworkConfig::fromJson(a.meta.at("network")));
    ckpt::loadParams(a, lm.model->encoder.params(), "enc/");
    ckpt::loadParams(a, lm.model->decoder.params(), "dec/");
    ckpt::loadParams(a, lm.model->discriminator.params(), "disc/");
    lm.model->delta = a.meta.at("delta").get<real>();
    lm.model->attributeSign = a.meta.at("attributeSign").get<std::map<std::string, int>>();
    lm.epoch = a.meta.at("epoch").get<int>();
    return lm;
}

}  // namespace maae::train

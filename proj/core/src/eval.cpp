#include "maae/eval.hpp"

#include <algorithm>
#include <cmath>

#include "maae/image_io.hpp"
#include "maae/objective.hpp"

namespace maae::eval {

using nlohmann::json;

Generator modelGenerator(const nets::Model& model, const std::string& attribute) {
    return [&model, attribute](const Tensor& x, real delta) {
        if (delta == 0) return model.generate(x, std::nullopt);
        return model.generate(x, model.manipulationSpec(attribute, delta));
    };
}

Generator identityGenerator() {
    return [](const Tensor& x, real) { return x; };
}

json EvalReport::toJson() const {
    json j;
    j["attribute"] = attribute;
    j["delta"] = delta;
    j["attributeFlipRate"] = attributeFlipRate;
    j["flipRateAtZero"] = flipRateAtZero;
    j["backgroundDrift"] = backgroundDrift;
    j["cycleError"] = cycleError;
    j["idDrift"] = idDrift;
    j["monotoneFraction"] = monotoneFraction;
    j["numImages"] = numImages;
    j["perAttributeFlipRate"] = perAttributeFlipRate;
    return j;
}

EvalReport EvalReport::fromJson(const json& j) {
    EvalReport r;
    r.attribute = j.at("attribute").get<std::string>();
    r.delta = j.at("delta").get<real>();
    r.attributeFlipRate = j.at("attributeFlipRate").get<real>();
    r.flipRateAtZero = j.at("flipRateAtZero").get<real>();
    r.backgroundDrift = j.at("backgroundDrift").get<real>();
    r.cycleError = j.at("cycleError").get<real>();
    r.idDrift = j.at("idDrift").get<real>();
    r.monotoneFraction = j.at("monotoneFraction").get<real>();
    r.numImages = j.at("numImages").get<int>();
    r.perAttributeFlipRate =
        j.at("perAttributeFlipRate").get<std::map<std::string, real>>();
    return r;
}

namespace {

Tensor asBatch(const Tensor& image, int S) { return image.reshaped({1, 3, S, S}); }

}  // namespace

std::vector<real> signedDeltas(const data::Dataset& ds, const std::vector<int>& indices,
                               const clf::ConvClassifier& attrClf,
                               const std::string& attribute, real delta, int sign) {
    const int attrIdx = data::attributeIndex(attribute);
    const int S = ds.imageSize();
    std::vector<real> out;
    out.reserve(indices.size());
    for (int i : indices) {
        const data::Sample s = ds.loadSample(i);
        const bool present = clf::predictAttributes(attrClf, asBatch(s.image, S))[attrIdx];
        out.push_back((present ? -1.0 : 1.0) * static_cast<real>(sign) * delta);
    }
    return out;
}

real attributeFlipRate(const Generator& g, const data::Dataset& ds,
                       const std::vector<int>& indices, const clf::ConvClassifier& attrClf,
                       const std::string& attribute, const std::vector<real>& deltas) {
    if (indices.empty()) return 0;
    const int attrIdx = data::attributeIndex(attribute);
    const int S = ds.imageSize();
    int flipped = 0;
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const data::Sample s = ds.loadSample(indices[k]);
        const Tensor x = asBatch(s.image, S);
        const bool before = clf::predictAttributes(attrClf, x)[attrIdx];
        const bool after = clf::predictAttributes(attrClf, g(x, deltas[k]))[attrIdx];
        if (before != after) ++flipped;
    }
    return static_cast<real>(flipped) / static_cast<real>(indices.size());
}

real backgroundDrift(const Generator& g, const data::Dataset& ds,
                     const std::vector<int>& indices, const std::vector<real>& deltas) {
    if (indices.empty()) return 0;
    const int S = ds.imageSize();
    real sum = 0;
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const data::Sample s = ds.loadSample(indices[k]);
        const Tensor x = asBatch(s.image, S);
        sum += objective::maskLoss(x, g(x, deltas[k]), s.mask);
    }
    return sum / static_cast<real>(indices.size());
}

real cycleError(const Generator& g, const data::Dataset& ds,
                const std::vector<int>& indices, real delta) {
    if (indices.empty()) return 0;
    const int S = ds.imageSize();
    real sum = 0;
    for (int i : indices) {
        const data::Sample s = ds.loadSample(i);
        const Tensor x = asBatch(s.image, S);
        const Tensor plusMinus = g(g(x, delta), -delta);
        const Tensor minusPlus = g(g(x, -delta), delta);
        sum += 0.5 * (objective::l1Mean(plusMinus, x) + objective::l1Mean(minusPlus, x));
    }
    return sum / static_cast<real>(indices.size());
}

real idDrift(const Generator& g, const data::Dataset& ds, const std::vector<int>& indices,
             const clf::ConvClassifier& idNet, const std::vector<real>& deltas) {
    if (indices.empty()) return 0;
    const int S = ds.imageSize();
    real sum = 0;
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const data::Sample s = ds.loadSample(indices[k]);
        const Tensor x = asBatch(s.image, S);
        const Tensor fx = idNet.features(x, nullptr);
        const Tensor fg = idNet.features(g(x, deltas[k]), nullptr);
        sum += objective::idLoss(fx, fg);
    }
    return sum / static_cast<real>(indices.size());
}

void sweepGrid(const Generator& g, const Tensor& image, const std::vector<real>& deltas,
               const std::string& outPath) {
    const Tensor x = image.rank() == 3
                         ? image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)})
                         : image;
    const int S = x.dim(2);
    std::vector<Tensor> cols;
    cols.push_back(x);
    for (real d : deltas) cols.push_back(g(x, d));

    img::Image8 grid;
    grid.width = S * static_cast<int>(cols.size());
    grid.height = S;
    grid.channels = 3;
    grid.pixels.assign(static_cast<std::size_t>(grid.width) * grid.height * 3, 0);
    for (std::size_t col = 0; col < cols.size(); ++col)
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < S; ++y)
                for (int xx = 0; xx < S; ++xx) {
                    const real v = std::clamp(cols[col].at(0, c, y, xx), 0.0, 1.0);
                    const std::size_t px =
                        (static_cast<std::size_t>(y) * grid.width + col * S + xx) * 3 + c;
                    grid.pixels[px] = static_cast<unsigned char>(std::lround(v * 255.0));
                }
    img::writePng(outPath, grid);
}

real sweepMonotoneFraction(const Generator& g, const data::Dataset& ds,
                           const std::vector<int>& indices,
                           const clf::ConvClassifier& attrClf, const std::string& attribute,
                           const std::vector<real>& deltas) {
    if (indices.empty()) return 0;
    const int attrIdx = data::attributeIndex(attribute);
    const int S = ds.imageSize();
    int monotone = 0;
    for (int i : indices) {
        const data::Sample s = ds.loadSample(i);
        const Tensor x = asBatch(s.image, S);
        real prev = -1;
        bool ok = true;
        for (real d : deltas) {
            const real conf = clf::attributeConfidence(attrClf, g(x, d), attrIdx);
            if (conf < prev - 1e-9) {
                ok = false;
                break;
            }
            prev = conf;
        }
        if (ok) ++monotone;
    }
    return static_cast<real>(monotone) / static_cast<real>(indices.size());
}

EvalReport evaluate(const nets::Model& model, const data::Dataset& ds,
                    const clf::ConvClassifier& attrClf, const clf::ConvClassifier& idNet,
                    const EvalOptions& opts) {
    std::vector<int> indices = ds.testIndices();
    if (opts.maxImages > 0 && static_cast<int>(indices.size()) > opts.maxImages)
        indices.resize(static_cast<std::size_t>(opts.maxImages));

    const Generator g = modelGenerator(model, opts.attribute);
    const int sign = model.attributeSign.count(opts.attribute)
                         ? model.attributeSign.at(opts.attribute)
                         : +1;
    const real delta = model.delta;

    EvalReport r;
    r.attribute = opts.attribute;
    r.delta = delta;
    r.numImages = static_cast<int>(indices.size());

    const std::vector<real> flips =
        signedDeltas(ds, indices, attrClf, opts.attribute, delta, sign);
    const std::vector<real> zeros(indices.size(), 0.0);

    r.attributeFlipRate = attributeFlipRate(g, ds, indices, attrClf, opts.attribute, flips);
    r.flipRateAtZero = attributeFlipRate(g, ds, indices, attrClf, opts.attribute, zeros);
    r.backgroundDrift = backgroundDrift(g, ds, indices, flips);
    r.cycleError = cycleError(g, ds, indices, delta);
    r.idDrift = idDrift(g, ds, indices, idNet, flips);

    std::vector<real> sweep;
    const int P = std::max(2, opts.sweepPoints);
    for (int k = 0; k < P; ++k) {
        const real t = -1.0 + 2.0 * static_cast<real>(k) / static_cast<real>(P - 1);
        sweep.push_back(t * delta * static_cast<real>(sign));
    }
    r.monotoneFraction =
        sweepMonotoneFraction(g, ds, indices, attrClf, opts.attribute, sweep);

    r.perAttributeFlipRate[opts.attribute] = r.attributeFlipRate;
    return r;
}

}  // namespace maae::eval

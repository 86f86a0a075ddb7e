#include "maae/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "maae/optim.hpp"

namespace maae::clf {

ConvClassifier::ConvClassifier(int inputSize, int numOutputs, int featureDim)
    : inputSize_(inputSize), numOutputs_(numOutputs), featureDim_(featureDim),
      body_(std::make_unique<Sequential>()) {
    body_->add(std::make_unique<Conv2d>("clf1", 3, 16, 4, 2, 1));
    body_->add(std::make_unique<LeakyReLU>());
    body_->add(std::make_unique<Conv2d>("clf2", 16, 32, 4, 2, 1));
    body_->add(std::make_unique<LeakyReLU>());
    body_->add(std::make_unique<Conv2d>("clf3", 32, 64, 4, 2, 1));
    body_->add(std::make_unique<LeakyReLU>());
    body_->add(std::make_unique<Flatten>());
    const int flat = 64 * (inputSize / 8) * (inputSize / 8);
    body_->add(std::make_unique<Linear>("clfFc1", flat, featureDim));
    body_->add(std::make_unique<LeakyReLU>());
    featureLayerCount_ = body_->size();
    body_->add(std::make_unique<Linear>("clfFc2", featureDim, numOutputs));
}

void ConvClassifier::init(std::mt19937_64& rng) {
    for (std::size_t i = 0; i < body_->size(); ++i) {
        if (auto* c = dynamic_cast<Conv2d*>(&body_->layer(i))) c->initHe(rng);
        if (auto* l = dynamic_cast<Linear*>(&body_->layer(i))) l->initHe(rng);
    }
}

Tensor ConvClassifier::logits(const Tensor& x, Trace* trace) const {
    return body_->forward(x, trace);
}

Tensor ConvClassifier::backwardLogits(const Tensor& gLogits, Trace& trace) {
    return body_->backward(gLogits, trace);
}

Tensor ConvClassifier::features(const Tensor& x, Trace* trace) const {
    return body_->forwardPrefix(x, featureLayerCount_, trace);
}

Tensor ConvClassifier::backwardFeatures(const Tensor& gFeat, Trace& trace) {
    Tensor g = gFeat;
    for (std::size_t i = featureLayerCount_; i-- > 0;)
        g = body_->layer(i).backward(g, trace);
    return g;
}

std::vector<Param*> ConvClassifier::params() {
    std::vector<Param*> ps;
    body_->collectParams(ps);
    return ps;
}

void ConvClassifier::saveTo(ckpt::Archive& a, const std::string& prefix) {
    ckpt::saveParams(a, params(), prefix);
}

void ConvClassifier::loadFrom(const ckpt::Archive& a, const std::string& prefix) {
    ckpt::loadParams(a, params(), prefix);
}

real softmaxCrossEntropy(const Tensor& logits, const std::vector<int>& labels, Tensor* grad) {
    const int N = logits.dim(0), K = logits.dim(1);
    if (grad) *grad = Tensor(logits.shape());
    real loss = 0;
    for (int n = 0; n < N; ++n) {
        real mx = logits.at(n, 0);
        for (int k = 1; k < K; ++k) mx = std::max(mx, logits.at(n, k));
        real z = 0;
        for (int k = 0; k < K; ++k) z += std::exp(logits.at(n, k) - mx);
        const int y = labels[static_cast<std::size_t>(n)];
        loss += -(logits.at(n, y) - mx - std::log(z));
        if (grad)
            for (int k = 0; k < K; ++k) {
                const real p = std::exp(logits.at(n, k) - mx) / z;
                grad->at(n, k) = (p - (k == y ? 1.0 : 0.0)) / static_cast<real>(N);
            }
    }
    return loss / static_cast<real>(N);
}

real bceWithLogits(const Tensor& logits, const Tensor& targets, Tensor* grad) {
    const std::size_t M = logits.numel();
    if (grad) *grad = Tensor(logits.shape());
    real loss = 0;
    for (std::size_t i = 0; i < M; ++i) {
        const real x = logits[i], t = targets[i];
        // log(1 + exp(-|x|)) form for stability
        loss += std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
        if (grad) (*grad)[i] = (1.0 / (1.0 + std::exp(-x)) - t) / static_cast<real>(M);
    }
    return loss / static_cast<real>(M);
}

namespace {

Tensor stackImages(const data::Dataset& ds, const std::vector<int>& indices,
                   std::vector<data::Sample>& cache) {
    const int S = ds.imageSize();
    Tensor batch({static_cast<int>(indices.size()), 3, S, S});
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const data::Sample& s = cache[static_cast<std::size_t>(indices[i])];
        std::copy(s.image.data(), s.image.data() + s.image.numel(),
                  batch.data() + i * s.image.numel());
    }
    return batch;
}

// Composites each face over a random other sample's background. Backgrounds
// are unique per sample, so without this the nets memorize them instead of
// looking at the face.
Tensor stackAugmented(const data::Dataset& ds, const std::vector<int>& indices,
                      std::vector<data::Sample>& cache, const std::vector<int>& pool,
                      std::mt19937_64& rng) {
    const int S = ds.imageSize();
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::uniform_int_distribution<int> shift(-2, 2);
    Tensor batch({static_cast<int>(indices.size()), 3, S, S});
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const data::Sample& s = cache[static_cast<std::size_t>(indices[i])];
        const data::Sample& other = cache[static_cast<std::size_t>(pool[pick(rng)])];
        const int sy = shift(rng), sx = shift(rng);
        real* out = batch.data() + i * s.image.numel();
        const std::size_t hw = static_cast<std::size_t>(S) * S;
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < S; ++y)
                for (int x = 0; x < S; ++x) {
                    // randomly translated face composite (clamped at the edges)
                    const int yy = std::clamp(y + sy, 0, S - 1);
                    const int xx = std::clamp(x + sx, 0, S - 1);
                    const std::size_t src = static_cast<std::size_t>(yy) * S + xx;
                    const std::size_t dst =
                        static_cast<std::size_t>(c) * hw + static_cast<std::size_t>(y) * S + x;
                    out[dst] = s.mask[src] > 0.5 ? s.image[static_cast<std::size_t>(c) * hw + src]
                                                 : other.image[static_cast<std::size_t>(c) * hw + src];
                }
    }
    return batch;
}

std::vector<data::Sample> loadAll(const data::Dataset& ds) {
    std::vector<data::Sample> all;
    all.reserve(ds.records().size());
    for (std::size_t i = 0; i < ds.records().size(); ++i)
        all.push_back(ds.loadSample(static_cast<int>(i)));
    return all;
}

template <typename LossFn>
void trainLoop(ConvClassifier& net, const data::Dataset& ds,
               const ClassifierTrainConfig& cfg, std::vector<data::Sample>& cache,
               LossFn&& lossFn) {
    Adam opt(net.params(), cfg.learningRate);
    std::vector<int> order = ds.trainIndices();
    for (int e = 0; e < cfg.epochs; ++e) {
        std::mt19937_64 rng(cfg.seed * 1000003ull + static_cast<std::uint64_t>(e));
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t off = 0; off < order.size(); off += cfg.batchSize) {
            const std::size_t end = std::min(order.size(), off + cfg.batchSize);
            std::vector<int> idx(order.begin() + off, order.begin() + end);
            Tensor x = stackAugmented(ds, idx, cache, ds.trainIndices(), rng);
            Trace trace;
            Tensor out = net.logits(x, &trace);
            Tensor grad;
            lossFn(out, idx, grad);
            opt.zeroGrad();
            net.backwardLogits(grad, trace);
            opt.step();
        }
    }
}

}  // namespace

real trainIdentityClassifier(const data::Dataset& ds, const ClassifierTrainConfig& cfg,
                             const std::string& outPath) {
    ConvClassifier net(ds.imageSize(), ds.numIdentities());
    std::mt19937_64 initRng(cfg.seed);
    net.init(initRng);
    std::vector<data::Sample> cache = loadAll(ds);

    trainLoop(net, ds, cfg, cache,
              [&](const Tensor& out, const std::vector<int>& idx, Tensor& grad) {
                  std::vector<int> labels;
                  labels.reserve(idx.size());
                  for (int i : idx) labels.push_back(cache[static_cast<std::size_t>(i)].identityId);
                  softmaxCrossEntropy(out, labels, &grad);
              });

    int correct = 0;
    for (int i : ds.testIndices()) {
        Tensor x = stackImages(ds, {i}, cache);
        const Tensor out = net.logits(x, nullptr);
        int arg = 0;
        for (int k = 1; k < out.dim(1); ++k)
            if (out.at(0, k) > out.at(0, arg)) arg = k;
        if (arg == cache[static_cast<std::size_t>(i)].identityId) ++correct;
    }
    const real acc = ds.testIndices().empty()
                         ? 0.0
                         : static_cast<real>(correct) / static_cast<real>(ds.testIndices().size());

    ckpt::Archive a;
    a.meta["kind"] = "identity";
    a.meta["inputSize"] = ds.imageSize();
    a.meta["numOutputs"] = ds.numIdentities();
    a.meta["featureDim"] = net.featureDim();
    a.meta["heldOutAccuracy"] = acc;
    net.saveTo(a, "net/");
    a.save(outPath);
    return acc;
}

real trainAttributeClassifier(const data::Dataset& ds, const ClassifierTrainConfig& cfg,
                              const std::string& outPath) {
    ConvClassifier net(ds.imageSize(), data::kNumAttributes);
    std::mt19937_64 initRng(cfg.seed + 7);
    net.init(initRng);
    std::vector<data::Sample> cache = loadAll(ds);

    trainLoop(net, ds, cfg, cache,
              [&](const Tensor& out, const std::vector<int>& idx, Tensor& grad) {
                  Tensor targets(out.shape());
                  for (std::size_t n = 0; n < idx.size(); ++n)
                      for (int a = 0; a < data::kNumAttributes; ++a)
                          targets.at(static_cast<int>(n), a) =
                              cache[static_cast<std::size_t>(idx[n])].attributes[a] ? 1.0 : 0.0;
                  bceWithLogits(out, targets, &grad);
              });

    long correct = 0, total = 0;
    for (int i : ds.testIndices()) {
        Tensor x = stackImages(ds, {i}, cache);
        const Tensor out = net.logits(x, nullptr);
        for (int a = 0; a < data::kNumAttributes; ++a) {
            const bool pred = out.at(0, a) > 0;
            if (pred == cache[static_cast<std::size_t>(i)].attributes[a]) ++correct;
            ++total;
        }
    }
    const real acc = total == 0 ? 0.0 : static_cast<real>(correct) / static_cast<real>(total);

    ckpt::Archive a;
    a.meta["kind"] = "attribute";
    a.meta["inputSize"] = ds.imageSize();
    a.meta["numOutputs"] = data::kNumAttributes;
    a.meta["featureDim"] = net.featureDim();
    a.meta["heldOutAccuracy"] = acc;
    net.saveTo(a, "net/");
    a.save(outPath);
    return acc;
}

ConvClassifier loadClassifier(const std::string& path) {
    const ckpt::Archive a = ckpt::Archive::load(path);
    ConvClassifier net(a.meta.at("inputSize").get<int>(), a.meta.at("numOutputs").get<int>(),
                       a.meta.at("featureDim").get<int>());
    net.loadFrom(a, "net/");
    return net;
}

real identityRetrievalTop1(const ConvClassifier& c, const data::Dataset& ds) {
    std::vector<Tensor> gallery;
    std::vector<int> galleryIds;
    for (int i : ds.trainIndices()) {
        const data::Sample s = ds.loadSample(i);
        const int S = ds.imageSize();
        Tensor x = s.image.reshaped({1, 3, S, S});
        gallery.push_back(c.features(x, nullptr));
        galleryIds.push_back(s.identityId);
    }
    int correct = 0, total = 0;
    for (int i : ds.testIndices()) {
        const data::Sample s = ds.loadSample(i);
        const int S = ds.imageSize();
        Tensor x = s.image.reshaped({1, 3, S, S});
        const Tensor f = c.features(x, nullptr);
        real bestDist = 0;
        int bestId = -1;
        for (std::size_t g = 0; g < gallery.size(); ++g) {
            real d = 0;
            for (std::size_t k = 0; k < f.numel(); ++k) {
                const real diff = f[k] - gallery[g][k];
                d += diff * diff;
            }
            if (bestId < 0 || d < bestDist) {
                bestDist = d;
                bestId = galleryIds[g];
            }
        }
        if (bestId == s.identityId) ++correct;
        ++total;
    }
    return total == 0 ? 0.0 : static_cast<real>(correct) / static_cast<real>(total);
}

std::vector<bool> predictAttributes(const ConvClassifier& c, const Tensor& image) {
    Tensor x = image.rank() == 3
                   ? image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)})
                   : image;
    const Tensor out = c.logits(x, nullptr);
    std::vector<bool> pred;
    for (int a = 0; a < out.dim(1); ++a) pred.push_back(out.at(0, a) > 0);
    return pred;
}

real attributeConfidence(const ConvClassifier& c, const Tensor& image, int attrIndex) {
    Tensor x = image.rank() == 3
                   ? image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)})
                   : image;
    const Tensor out = c.logits(x, nullptr);
    return 1.0 / (1.0 + std::exp(-out.at(0, attrIndex)));
}

}  // namespace maae::clf

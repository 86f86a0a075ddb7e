#pragma once

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "maae/classifiers.hpp"
#include "maae/nets.hpp"
#include "maae/synthdata.hpp"

namespace maae::eval {

/// Anything that maps an image {1,3,S,S} plus a signed attribute shift to an
/// image of the same shape. delta == 0 must mean plain reconstruction.
using Generator = std::function<Tensor(const Tensor&, real delta)>;

/// Wraps a trained model for one attribute. The sign convention is raw:
/// positive delta adds to the attribute's channel group.
Generator modelGenerator(const nets::Model& model, const std::string& attribute);

/// Generator that returns its input untouched; every metric is 0 on it.
Generator identityGenerator();

struct EvalReport {
    std::string attribute;
    real delta = 0;                // magnitude used for the manipulations
    real attributeFlipRate = 0;    // correct-sign manipulation
    real flipRateAtZero = 0;       // reconstruction only
    real backgroundDrift = 0;      // mean masked L1
    real cycleError = 0;           // mean L1 after there-and-back
    real idDrift = 0;              // mean feature MSE
    real monotoneFraction = 0;     // confidence monotone across the sweep
    int numImages = 0;
    std::map<std::string, real> perAttributeFlipRate;

    nlohmann::json toJson() const;
    static EvalReport fromJson(const nlohmann::json& j);
    bool operator==(const EvalReport&) const = default;
};

/// Fraction of images whose predicted attribute flips under the manipulation.
/// `signs` gives the per-image signed delta (use signedDeltas below).
real attributeFlipRate(const Generator& g, const data::Dataset& ds,
                       const std::vector<int>& indices, const clf::ConvClassifier& attrClf,
                       const std::string& attribute, const std::vector<real>& signedDeltas);

/// Per-image delta that pushes each image toward flipping its current
/// prediction: -sign*delta when the attribute is predicted present, else
/// +sign*delta.
std::vector<real> signedDeltas(const data::Dataset& ds, const std::vector<int>& indices,
                               const clf::ConvClassifier& attrClf,
                               const std::string& attribute, real delta, int sign);

/// Mean masked L1 between inputs and their manipulated outputs.
real backgroundDrift(const Generator& g, const data::Dataset& ds,
                     const std::vector<int>& indices, const std::vector<real>& signedDeltas);

/// Mean L1 of x vs the inverse manipulation applied to the manipulated image,
/// averaged over both hop orders.
real cycleError(const Generator& g, const data::Dataset& ds,
                const std::vector<int>& indices, real delta);

/// Mean squared feature drift of manipulated outputs under a frozen extractor.
real idDrift(const Generator& g, const data::Dataset& ds, const std::vector<int>& indices,
             const clf::ConvClassifier& idNet, const std::vector<real>& signedDeltas);

/// Writes one image row: [x, g(x, d0), g(x, d1), ...] as an 8-bit RGB file.
void sweepGrid(const Generator& g, const Tensor& image, const std::vector<real>& deltas,
               const std::string& outPath);

/// Fraction of images whose classifier confidence is non-decreasing across
/// the delta sweep (deltas ascending in attribute-strengthening order).
real sweepMonotoneFraction(const Generator& g, const data::Dataset& ds,
                           const std::vector<int>& indices,
                           const clf::ConvClassifier& attrClf, const std::string& attribute,
                           const std::vector<real>& deltas);

struct EvalOptions {
    std::string attribute = "hairBlond";
    int maxImages = 0;     // 0 = all of the test split
    int sweepPoints = 7;
};

/// Full report over the test split of `ds`.
EvalReport evaluate(const nets::Model& model, const data::Dataset& ds,
                    const clf::ConvClassifier& attrClf, const clf::ConvClassifier& idNet,
                    const EvalOptions& opts);

}  // namespace maae::eval

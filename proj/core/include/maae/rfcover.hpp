#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "maae/errors.hpp"

namespace maae::rf {

using maae::ConfigError;
using maae::GeometryError;

/// One square convolution-like layer.
struct LayerSpec {
    int kernel = 1;
    int stride = 1;
    int padding = 0;

    bool valid() const { return kernel >= 1 && stride >= 1 && padding >= 0; }
    bool operator==(const LayerSpec&) const = default;
};

/// Receptive field of one top-layer pixel in input coordinates:
/// span `size`, per-pixel step `jump`, left edge of pixel 0 at `start`
/// (negative values reach into the padding region).
struct RFParams {
    int size = 1;
    int jump = 1;
    int start = 0;

    bool operator==(const RFParams&) const = default;
};

/// Selected top-layer positions; positions2d is the per-axis Cartesian square.
struct PixelSet {
    std::vector<int> axisPositions;
    std::vector<std::pair<int, int>> positions2d;
};

int outputSize(const LayerSpec& layer, int inputSize);
int stackOutputSize(std::span<const LayerSpec> layers, int inputSize);

/// Composes (size, jump, start) bottom-up over the stack.
RFParams composeReceptiveField(std::span<const LayerSpec> layers);

/// Clipped input interval [lo, hi] covered by top pixel `i`; empty when lo > hi.
std::pair<int, int> coveredInterval(const RFParams& rf, int inputSize, int i);

/// Minimum-cardinality per-axis cover of [0, inputSize-1] by top-pixel
/// receptive fields, greedy sweep with smallest-index tie-breaking.
PixelSet minimalCoveringSet(const RFParams& rf, int inputSize, int featureSize);

bool verifyCoverage(const std::vector<int>& axisPositions, const RFParams& rf,
                    int inputSize);

inline bool verifyCoverage(const PixelSet& ps, const RFParams& rf, int inputSize) {
    return verifyCoverage(ps.axisPositions, rf, inputSize);
}

}  // namespace maae::rf

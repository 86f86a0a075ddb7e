#include "maae/rfcover.hpp"

#include <algorithm>

namespace maae::rf {

int outputSize(const LayerSpec& layer, int inputSize) {
    return (inputSize + 2 * layer.padding - layer.kernel) / layer.stride + 1;
}

int stackOutputSize(std::span<const LayerSpec> layers, int inputSize) {
    int n = inputSize;
    for (const LayerSpec& l : layers) {
        n = outputSize(l, n);
        if (n < 1)
            throw GeometryError("layer stack collapses to empty output at size " +
                                std::to_string(n));
    }
    return n;
}

RFParams composeReceptiveField(std::span<const LayerSpec> layers) {
    if (layers.empty()) throw ConfigError("composeReceptiveField: empty layer list");
    RFParams rf{1, 1, 0};  // identity
    for (const LayerSpec& l : layers) {
        if (!l.valid())
            throw ConfigError("composeReceptiveField: invalid layer (kernel=" +
                              std::to_string(l.kernel) + ", stride=" +
                              std::to_string(l.stride) + ", padding=" +
                              std::to_string(l.padding) + ")");
        rf.size = rf.size + (l.kernel - 1) * rf.jump;
        rf.start = rf.start - l.padding * rf.jump;
        rf.jump = rf.jump * l.stride;
    }
    return rf;
}

std::pair<int, int> coveredInterval(const RFParams& rf, int inputSize, int i) {
    const int lo = std::max(0, i * rf.jump + rf.start);
    const int hi = std::min(inputSize - 1, i * rf.jump + rf.start + rf.size - 1);
    return {lo, hi};
}

PixelSet minimalCoveringSet(const RFParams& rf, int inputSize, int featureSize) {
    if (inputSize < 1 || featureSize < 1)
        throw GeometryError("minimalCoveringSet: empty input or feature map");

    PixelSet ps;
    int covered = -1;  // highest covered coordinate so far
    while (covered < inputSize - 1) {
        const int target = covered + 1;
        int best = -1, bestHi = -1;
        long bestRawHi = -1;
        for (int i = 0; i < featureSize; ++i) {
            auto [lo, hi] = coveredInterval(rf, inputSize, i);
            if (lo > hi) continue;           // interval empty after clipping
            if (lo > target) break;          // intervals are sorted in lo
            // Rank by the unclipped right edge; clipping is monotone, so this
            // also maximizes covered extent. Ties keep the smallest index.
            const long rawHi = static_cast<long>(i) * rf.jump + rf.start + rf.size - 1;
            if (rawHi > bestRawHi) {
                bestRawHi = rawHi;
                bestHi = hi;
                best = i;
            }
        }
        if (best < 0 || bestHi < target)
            throw GeometryError("minimalCoveringSet: input coordinate " +
                                std::to_string(target) + " is not coverable");
        ps.axisPositions.push_back(best);
        covered = bestHi;
    }

    for (int r : ps.axisPositions)
        for (int c : ps.axisPositions) ps.positions2d.emplace_back(r, c);
    return ps;
}

bool verifyCoverage(const std::vector<int>& axisPositions, const RFParams& rf,
                    int inputSize) {
    std::vector<bool> covered(static_cast<std::size_t>(inputSize), false);
    for (int i : axisPositions) {
        auto [lo, hi] = coveredInterval(rf, inputSize, i);
        for (int x = lo; x <= hi; ++x) covered[static_cast<std::size_t>(x)] = true;
    }
    return std::all_of(covered.begin(), covered.end(), [](bool b) { return b; });
}

}  // namespace maae::rf

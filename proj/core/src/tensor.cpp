#include "maae/tensor.hpp"

#include <cmath>

namespace maae {

bool allFinite(const Tensor& t) {
    for (std::size_t i = 0; i < t.numel(); ++i)
        if (!std::isfinite(t[i])) return false;
    return true;
}

void fillNormal(Tensor& t, real stddev, std::mt19937_64& rng) {
    std::normal_distribution<real> dist(0.0, stddev);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = dist(rng);
}

}  // namespace maae

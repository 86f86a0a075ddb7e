#include <benchmark/benchmark.h>

#include <random>

#include "maae/layers.hpp"
#include "maae/nets.hpp"
#include "maae/objective.hpp"
#include "maae/rfcover.hpp"
#include "maae/synthdata.hpp"

using namespace maae;

static void BM_ConvForward(benchmark::State& state) {
    const int C = static_cast<int>(state.range(0));
    Conv2d conv("c", C, C, 3, 1, 1);
    std::mt19937_64 rng(1);
    conv.initHe(rng);
    Tensor x({4, C, 16, 16});
    fillNormal(x, 1.0, rng);
    for (auto _ : state) {
        Tensor y = conv.forward(x, nullptr);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(BM_ConvForward)->Arg(16)->Arg(32)->Arg(64);

static void BM_EncoderForward(benchmark::State& state) {
    nets::Encoder enc(nets::NetworkConfig::defaults());
    std::mt19937_64 rng(2);
    enc.init(rng);
    Tensor x({1, 3, 32, 32});
    fillNormal(x, 0.3, rng);
    for (auto _ : state) {
        nets::LatentCode code = enc.encode(x, nullptr);
        benchmark::DoNotOptimize(code.mu.data());
    }
}
BENCHMARK(BM_EncoderForward);

static void BM_ReceptiveFieldCover(benchmark::State& state) {
    const std::vector<rf::LayerSpec> layers{{4, 2, 1}, {4, 2, 1}, {4, 2, 1}, {3, 1, 1}};
    const int inputSize = static_cast<int>(state.range(0));
    for (auto _ : state) {
        const rf::RFParams p = rf::composeReceptiveField(layers);
        const int out = rf::stackOutputSize(layers, inputSize);
        rf::PixelSet set = rf::minimalCoveringSet(p, inputSize, out);
        benchmark::DoNotOptimize(set.axisPositions.data());
    }
}
BENCHMARK(BM_ReceptiveFieldCover)->Arg(32)->Arg(64);

static void BM_RenderSample(benchmark::State& state) {
    data::SceneSpec spec;
    spec.identityId = 7;
    spec.attributes[0] = true;
    std::uint64_t i = 0;
    for (auto _ : state) {
        spec.backgroundSeed = i;
        spec.renderSeed = i++;
        data::Sample s = data::renderSample(spec, 32);
        benchmark::DoNotOptimize(s.image.data());
    }
}
BENCHMARK(BM_RenderSample);

static void BM_KlDivergence(benchmark::State& state) {
    Tensor mu({8, 32, 4, 4}), lv({8, 32, 4, 4});
    std::mt19937_64 rng(3);
    fillNormal(mu, 1.0, rng);
    fillNormal(lv, 0.5, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(objective::klDivergence(mu, lv));
    }
}
BENCHMARK(BM_KlDivergence);

BENCHMARK_MAIN();

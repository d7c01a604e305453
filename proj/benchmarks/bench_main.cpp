#include "resproxy/proxy/proxy.hpp"
#include "resproxy/scenario/sampler.hpp"
#include "resproxy/sim/simulator.hpp"
#include "resproxy/tensor/tape.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace resproxy;

namespace {

void BM_Gemm(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    std::vector<float> a(n * n), b(n * n), c(n * n);
    for (auto& v : a) v = static_cast<float>(rng.normal());
    for (auto& v : b) v = static_cast<float>(rng.normal());
    for (auto _ : state) {
        tensor::gemm(a.data(), b.data(), c.data(), n, n, n, false);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 2 * n * n * n));
}
BENCHMARK(BM_Gemm)->Arg(64)->Arg(128)->Arg(256);

void BM_LstmStepForwardBackward(benchmark::State& state) {
    const std::size_t B = 100, H = 64;
    tensor::ParameterStore<float> store;
    auto& W = store.add("W", 2 * H, 4 * H);
    Rng rng(2);
    for (auto& v : W.value.values()) v = static_cast<float>(0.05 * rng.normal());
    tensor::Tensor<float> x(B, 2 * H, 0.1f);
    for (auto _ : state) {
        tensor::Tape<float> tape;
        const auto z = tape.matmul(tape.constant(x), tape.param(W));
        const auto i = tape.sigmoid(tape.slice(z, 1, 0, H));
        const auto g = tape.tanh(tape.slice(z, 1, 2 * H, 3 * H));
        const auto h = tape.mul(i, g);
        tape.backward(tape.mse_loss(h, tape.constant(tensor::Tensor<float>(B, H))));
        benchmark::DoNotOptimize(W.grad.data());
    }
}
BENCHMARK(BM_LstmStepForwardBackward);

void BM_SimulatorDeskStep(benchmark::State& state) {
    const auto grid = sim::GridSpec::preset("desk");
    const auto rock = sim::generate_realization(0, 42, grid, sim::GeoParams{});
    const sim::SimulatorConfig config;
    sim::Simulator simulator(rock, grid, config);
    const std::vector<sim::WellSpec> wells{
        sim::make_well(scenario::Action::producer(2, 2), grid, config.wells, 0),
        sim::make_well(scenario::Action::injector(9, 9), grid, config.wells, 0),
    };
    const auto start = simulator.initial_state();
    for (auto _ : state) benchmark::DoNotOptimize(simulator.step(start, wells));
}
BENCHMARK(BM_SimulatorDeskStep)->Unit(benchmark::kMillisecond);

void BM_ProxyPredict(benchmark::State& state) {
    const auto B = static_cast<std::size_t>(state.range(0));
    proxy::ModelConfig c = proxy::ModelConfig::preset("64x1");
    c.geology = false;
    proxy::Standardizer s;
    s.out_mean.assign(3, 0.0);
    s.out_std.assign(3, 1.0);
    s.geo_mean.assign(proxy::kGeologyFeatures, 0.0);
    s.geo_std.assign(proxy::kGeologyFeatures, 1.0);
    const proxy::ProxyModel<float> model(c, s, std::nullopt);
    Rng rng(3);
    scenario::SamplingPolicy policy;
    policy.length = c.sequence_length;
    std::vector<proxy::ProxyInput> inputs;
    for (std::size_t b = 0; b < B; ++b)
        inputs.push_back({static_cast<int>(b % 100), scenario::sample_action_sequence(rng, c.nx, c.ny, policy)});
    for (auto _ : state) benchmark::DoNotOptimize(model.predict(inputs, proxy::DecodeMode::prop(), c.horizon));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * B));
}
BENCHMARK(BM_ProxyPredict)->Arg(1)->Arg(100);

}  // namespace
BENCHMARK_MAIN();

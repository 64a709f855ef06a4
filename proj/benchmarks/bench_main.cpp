#include <cmath>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "wzjscc/channel.hpp"
#include "wzjscc/codec.hpp"
#include "wzjscc/data.hpp"
#include "wzjscc/metrics.hpp"
#include "wzjscc/ops.hpp"
#include "wzjscc/training.hpp"

using namespace wzjscc;

namespace {

std::vector<double> ramp(std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = static_cast<double>(i % 97) / 97.0;
    }
    return v;
}

void BM_Conv2dForwardBackward(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    const nn::Shape xs{8, c, 16, 32};
    const nn::Shape ws{c, c, 3, 3};
    const auto x = nn::Tensor::parameter(xs, ramp(xs.numel()));
    const auto w = nn::Tensor::parameter(ws, ramp(ws.numel()));
    const auto b = nn::Tensor::parameter(nn::Shape{c, 1, 1, 1}, ramp(static_cast<std::size_t>(c)));
    for (auto _ : state) {
        nn::mean(nn::conv2d(x, w, b, 1, 1)).backward();
    }
    state.SetItemsProcessed(state.iterations() * xs.n);
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_PowerNormalizeAwgn(benchmark::State& state) {
    const auto k = static_cast<std::size_t>(state.range(0));
    std::vector<channel::Complex> z(k);
    for (std::size_t i = 0; i < k; ++i) {
        z[i] = {std::sin(0.1 * i), std::cos(0.3 * i)};
    }
    channel::ChannelState ch(0.5, 1.0, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(channel::awgn_transmit(channel::power_normalize(z, 1.0), ch));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(k));
}
BENCHMARK(BM_PowerNormalizeAwgn)->Arg(192)->Arg(6144);

void BM_TrainStep(benchmark::State& state) {
    codec::ModelConfig mc;
    mc.variant = static_cast<codec::VariantKind>(state.range(0));
    mc.rho = 1.0 / 8.0;
    mc.base_width = 8;
    mc.image = {3, 16, 32};
    data::SyntheticConfig sc;
    sc.counts = {8, 0, 0};
    const auto batch = data::generate_synthetic(sc, data::Split::train);
    train::TrainConfig tc;
    tc.learning_rate = 1e-3;
    tc.batch_size = 8;
    auto model = codec::build_model(mc);
    train::Trainer trainer(model, tc, train::mse_loss());
    for (auto _ : state) {
        benchmark::DoNotOptimize(trainer.train_step(batch).loss);
    }
    state.SetLabel(std::string(codec::to_string(mc.variant)));
}
BENCHMARK(BM_TrainStep)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

void BM_MsSsim(benchmark::State& state) {
    const int h = static_cast<int>(state.range(0));
    const ImageTensor a(3, h, 2 * h, ramp(static_cast<std::size_t>(6 * h * h)));
    ImageTensor b = a;
    for (double& v : b.pixels()) {
        v = 1.0 - v;
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(metrics::ms_ssim(a, b));
    }
}
BENCHMARK(BM_MsSsim)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

} // namespace
BENCHMARK_MAIN();

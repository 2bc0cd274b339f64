// Distance-backend microbenchmarks: patch-distances/s is the unit the
// convolution acceleration optimizes, so regressions show up here first.

#include "nda/distance.hpp"
#include "nda/influence.hpp"
#include "nda/noise.hpp"
#include "nda/rng.hpp"
#include "nda/schedule.hpp"

#include <benchmark/benchmark.h>

namespace {

nda::ImageTensor random_image(int channels, int side, std::uint64_t seed) {
    nda::ImageTensor img;
    img.channels = channels;
    img.side = side;
    img.data.resize(img.value_count());
    const nda::CounterRng rng(seed, "bench", 0, 0);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        img.data[i] = static_cast<float>(2.0 * rng.uniform(i) - 1.0);
    }
    return img;
}

void BM_DistancePlaneFast(benchmark::State& state) {
    const int L = 32, C = 3;
    const int P = static_cast<int>(state.range(0));
    const nda::ImageTensor train = random_image(C, L, 1);
    const nda::ImageTensor query = random_image(C, L, 2);
    const nda::ScaleSpec scale{P, 1};
    const nda::TrainImageContext ctx = nda::make_train_context(train, scale);
    const nda::QueryPatchKernel kernel = nda::make_query_kernel(query, L / 2, L / 2, scale);
    std::vector<double> plane(static_cast<std::size_t>(L) * L);
    for (auto _ : state) {
        nda::distance_plane_fast(kernel, ctx, 0.66, plane.data());
        benchmark::DoNotOptimize(plane.data());
    }
    state.SetItemsProcessed(state.iterations() * plane.size());
}
BENCHMARK(BM_DistancePlaneFast)->Arg(3)->Arg(9)->Arg(21);

void BM_DistancePlaneNaive(benchmark::State& state) {
    const int L = 32, C = 3;
    const int P = static_cast<int>(state.range(0));
    const nda::ImageTensor train = random_image(C, L, 1);
    const nda::ImageTensor query = random_image(C, L, 2);
    const nda::ScaleSpec scale{P, 1};
    const nda::QueryPatchKernel kernel = nda::make_query_kernel(query, L / 2, L / 2, scale);
    std::vector<double> plane(static_cast<std::size_t>(L) * L);
    for (auto _ : state) {
        nda::distance_plane_naive(kernel, train, scale, 0.66, plane.data());
        benchmark::DoNotOptimize(plane.data());
    }
    state.SetItemsProcessed(state.iterations() * plane.size());
}
BENCHMARK(BM_DistancePlaneNaive)->Arg(3)->Arg(9);

void BM_TrainContext(benchmark::State& state) {
    const nda::ImageTensor train = random_image(3, 32, 1);
    const nda::ScaleSpec scale{static_cast<int>(state.range(0)), 1};
    for (auto _ : state) {
        benchmark::DoNotOptimize(nda::make_train_context(train, scale));
    }
}
BENCHMARK(BM_TrainContext)->Arg(9)->Arg(21);

void BM_PatchInfluence(benchmark::State& state) {
    const int L = 16;
    nda::Dataset trainset;
    for (int n = 0; n < 8; ++n) {
        trainset.images.push_back(random_image(3, L, 100 + n));
        trainset.ids.push_back("t" + std::to_string(n));
    }
    const nda::ImageTensor query = random_image(3, L, 7);
    const nda::DiffusionSchedule schedule = nda::default_schedule();
    const nda::NoisyImage noisy =
        nda::noise_image(query, "q", 300, schedule, {nda::NoiseMode::zero});
    nda::InfluenceParams params;
    params.top_k = 20;
    std::uint64_t distances = 0;
    for (auto _ : state) {
        distances = 0;
        nda::for_each_patch_summary(noisy, trainset, nda::ScaleSpec{5, 1}, params,
                                    [](nda::PatchSummary&) {}, &distances);
    }
    state.SetItemsProcessed(state.iterations() * distances);
}
BENCHMARK(BM_PatchInfluence);

} // namespace

BENCHMARK_MAIN();

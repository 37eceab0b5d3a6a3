#include <benchmark/benchmark.h>

#include "transmusic/array_sim.hpp"
#include "transmusic/classical.hpp"
#include "transmusic/hermitian_eig.hpp"
#include "transmusic/model.hpp"
#include "transmusic/rng.hpp"
#include "transmusic/spectrum.hpp"

namespace {

using namespace transmusic;

ComplexMatrix random_hermitian(std::size_t m, std::uint64_t seed) {
    SplitMix64 rng(seed);
    ComplexMatrix h(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i; j < m; ++j) {
            const cdouble z = i == j ? cdouble(rng.uniform(), 0.0) : complex_gaussian(rng, 1.0);
            h(i, j) = z;
            h(j, i) = std::conj(z);
        }
    }
    return h;
}

SnapshotMatrix bench_snapshots(std::uint32_t num_snapshots, std::uint64_t seed) {
    Scenario sc;
    sc.thetas = {-0.4, 0.3, 0.9};
    sc.snr_db = 10.0;
    sc.num_snapshots = num_snapshots;
    return generate_snapshots(sc, ArrayGeometry::ula(8), seed);
}

void BM_HermitianEvd8(benchmark::State& state) {
    const ComplexMatrix h = random_hermitian(8, 42);
    for (auto _ : state) {
        benchmark::DoNotOptimize(hermitian_evd(h));
    }
}
BENCHMARK(BM_HermitianEvd8);

void BM_SampleCovariance(benchmark::State& state) {
    const SnapshotMatrix y = bench_snapshots(200, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sample_covariance(y.samples));
    }
}
BENCHMARK(BM_SampleCovariance);

void BM_QuantizeOneBit(benchmark::State& state) {
    const SnapshotMatrix y = bench_snapshots(200, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(quantize_one_bit(y));
    }
}
BENCHMARK(BM_QuantizeOneBit);

void BM_MusicSpectrumFullGrid(benchmark::State& state) {
    const SnapshotMatrix y = bench_snapshots(200, 3);
    const EigenDecomposition eig = hermitian_evd(sample_covariance(y.samples));
    const ComplexMatrix en = noise_subspace(eig, 3);
    const ArrayGeometry geometry = ArrayGeometry::ula(8);
    for (auto _ : state) {
        benchmark::DoNotOptimize(music_spectrum(en, geometry, kClassicalGridSize));
    }
}
BENCHMARK(BM_MusicSpectrumFullGrid);

void BM_MusicEstimate(benchmark::State& state) {
    const SnapshotMatrix y = bench_snapshots(200, 4);
    const ArrayGeometry geometry = ArrayGeometry::ula(8);
    for (auto _ : state) {
        benchmark::DoNotOptimize(music_estimate(y, 3, geometry, kClassicalGridSize));
    }
}
BENCHMARK(BM_MusicEstimate);

void BM_ModelInfer(benchmark::State& state) {
    const TransMusicModel model(ModelConfig{}, 42);
    const SnapshotMatrix y =
        quantize_one_bit(bench_snapshots(static_cast<std::uint32_t>(state.range(0)), 5));
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.infer(y));
    }
}
BENCHMARK(BM_ModelInfer)->Arg(50)->Arg(200);

} // namespace

BENCHMARK_MAIN();

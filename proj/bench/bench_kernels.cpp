// Serial reference vs OpenMP kernels. Run with OMP_NUM_THREADS set to taste.

#include <benchmark/benchmark.h>

#include <vector>

#include "poseuq/dataset.hpp"
#include "poseuq/kernels.hpp"

using namespace poseuq;

namespace {

struct Fixture {
    std::vector<Sample> samples;
    RegressorParams plain;
    RegressorParams evidential;
    std::vector<double> residuals, variances;

    Fixture() {
        DatasetConfig d;
        d.train_size = 256;
        d.val_size = 1;
        d.seed = 3;
        samples = gen_dataset(d).train;
        Architecture a;
        a.input_dim = d.feature_dim();
        a.dropout_p = 0.3;
        plain = init_params(a, 1);
        a.head = HeadKind::Evidential;
        a.dropout_p = 0.0;
        evidential = init_params(a, 2);
        Rng rng(5);
        for (int i = 0; i < 100000; ++i) {
            residuals.push_back(rng.normal());
            variances.push_back(rng.uniform(0.5, 2.0));
        }
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

template <bool Parallel>
void BM_BatchGradient(benchmark::State& state) {
    const auto& f = fixture();
    std::vector<const Sample*> batch;
    for (const auto& s : f.samples) batch.push_back(&s);
    std::vector<double> grad(f.evidential.values.size());
    const LossConfig cfg;
    for (auto _ : state) {
        auto l = Parallel ? kernels::batch_gradient_parallel(f.evidential, batch, cfg, {}, grad)
                          : kernels::batch_gradient_serial(f.evidential, batch, cfg, {}, grad);
        benchmark::DoNotOptimize(l);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(batch.size()));
}

template <bool Parallel>
void BM_PredictBatch(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) {
        auto out = Parallel ? kernels::predict_batch_parallel(f.evidential, f.samples)
                            : kernels::predict_batch_serial(f.evidential, f.samples);
        benchmark::DoNotOptimize(out);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.samples.size()));
}

template <bool Parallel>
void BM_DropoutSamples(benchmark::State& state) {
    const auto& f = fixture();
    const auto& x = f.samples.front().features;
    for (auto _ : state) {
        auto out = Parallel ? kernels::dropout_samples_parallel(f.plain, x, 30, 0.3, 9)
                            : kernels::dropout_samples_serial(f.plain, x, 30, 0.3, 9);
        benchmark::DoNotOptimize(out);
    }
}

template <bool Parallel>
void BM_CountCovered(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) {
        auto n = Parallel ? kernels::count_covered_parallel(f.residuals, f.variances, 1.0)
                          : kernels::count_covered_serial(f.residuals, f.variances, 1.0);
        benchmark::DoNotOptimize(n);
    }
}

}  // namespace

BENCHMARK(BM_BatchGradient<false>)->Name("batch_gradient/serial");
BENCHMARK(BM_BatchGradient<true>)->Name("batch_gradient/omp");
BENCHMARK(BM_PredictBatch<false>)->Name("predict_batch/serial");
BENCHMARK(BM_PredictBatch<true>)->Name("predict_batch/omp");
BENCHMARK(BM_DropoutSamples<false>)->Name("dropout_samples/serial");
BENCHMARK(BM_DropoutSamples<true>)->Name("dropout_samples/omp");
BENCHMARK(BM_CountCovered<false>)->Name("count_covered/serial");
BENCHMARK(BM_CountCovered<true>)->Name("count_covered/omp");

BENCHMARK_MAIN();

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "rcamon/ca_batch.hpp"
#include "rcamon/ingest.hpp"
#include "rcamon/monitor.hpp"
#include "rcamon/pipeline.hpp"
#include "rcamon/rca_stream.hpp"
#include "rcamon/rpca_stream.hpp"
#include "rcamon/simgen.hpp"

namespace {

using namespace rcamon;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;

// m variables sharing one random-walk trend plus white noise.
MatrixXd cointegrated_block(Index n, Index m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    RowVectorXd load(m);
    for (Index j = 0; j < m; ++j) load(j) = 1.0 + 0.1 * static_cast<double>(j);
    MatrixXd x(n, m);
    double trend = 0.0;
    for (Index i = 0; i < n; ++i) {
        trend += nd(rng);
        for (Index j = 0; j < m; ++j) x(i, j) = load(j) * trend + 0.3 * nd(rng);
    }
    return x;
}

void BM_RcaStep(benchmark::State& state) {
    const Index m = state.range(0);
    constexpr Index kTrain = 500;
    constexpr Index kStream = 4096;
    const MatrixXd raw = cointegrated_block(kTrain + kStream, m, 1);
    const Scaler sc = fit_scaler(MatrixXd(raw.topRows(kTrain)));
    const MatrixXd x = scale(sc, raw);
    RcaState rca = rca_init(fit_ca_detailed(x.topRows(kTrain), 1, 1));
    Index i = kTrain;
    for (auto _ : state) {
        if (i == x.rows()) {
            state.PauseTiming();
            rca = rca_init(fit_ca_detailed(x.topRows(kTrain), 1, 1));
            i = kTrain;
            state.ResumeTiming();
        }
        benchmark::DoNotOptimize(rca_step(rca, x.row(i++)));
    }
}
BENCHMARK(BM_RcaStep)->Arg(4)->Arg(8)->Arg(16);

// The cost the recursion replaces: a full batch fit on the grown window.
void BM_BatchRefit(benchmark::State& state) {
    const Index m = state.range(0);
    const MatrixXd raw = cointegrated_block(2000, m, 2);
    const MatrixXd x = scale(fit_scaler(raw), raw);
    for (auto _ : state) benchmark::DoNotOptimize(fit_ca_detailed(x, 1, 1));
}
BENCHMARK(BM_BatchRefit)->Arg(4)->Arg(8)->Arg(16);

void BM_RpcaObserve(benchmark::State& state) {
    const Index m = state.range(0);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    MatrixXd mix(m, m);
    for (Index i = 0; i < m; ++i) {
        for (Index j = 0; j < m; ++j) mix(i, j) = nd(rng);
    }
    auto draw = [&] {
        RowVectorXd z(m);
        for (Index j = 0; j < m; ++j) z(j) = nd(rng);
        return RowVectorXd(z * mix);
    };
    MatrixXd train(1000, m);
    for (Index i = 0; i < train.rows(); ++i) train.row(i) = draw();
    RpcaState rpca = rpca_init(train);
    std::vector<RowVectorXd> samples(1024);
    for (auto& s : samples) s = draw();
    std::size_t i = 0;
    for (auto _ : state) benchmark::DoNotOptimize(rpca_observe(rpca, samples[i++ % samples.size()]));
}
BENCHMARK(BM_RpcaObserve)->Arg(8)->Arg(16)->Arg(32);

void BM_KdeThreshold(benchmark::State& state) {
    std::mt19937_64 rng(4);
    std::chi_squared_distribution<double> chi(3.0);
    std::vector<double> values(static_cast<std::size_t>(state.range(0)));
    for (double& v : values) v = chi(rng);
    for (auto _ : state) benchmark::DoNotOptimize(kde_threshold(values, 0.99));
}
BENCHMARK(BM_KdeThreshold)->Arg(250)->Arg(1000)->Arg(4000);

void BM_OnlineStep(benchmark::State& state) {
    ScenarioConfig sc;
    sc.seed = 5;
    sc.modes.push_back({{}, {}, 6000});
    const Scenario s = generate(sc);
    MonitorConfig cfg;
    cfg.grouping = sc.grouping();
    DataMatrix train;
    train.values = s.data.values.topRows(1000);
    const PipelineState trained = offline_train(train, cfg);
    PipelineState st = trained;
    Index i = 1000;
    for (auto _ : state) {
        if (i == s.data.samples()) {
            state.PauseTiming();
            st = trained;
            i = 1000;
            state.ResumeTiming();
        }
        benchmark::DoNotOptimize(online_step(st, s.data.values.row(i++)));
    }
}
BENCHMARK(BM_OnlineStep);

}  // namespace

BENCHMARK_MAIN();

// Microbenchmarks for the per-instant fusion kernels at the desk-scale
// geometry (81x81 HR grid, 9x9 coarse grid, 2 bands).

#include <benchmark/benchmark.h>

#include <random>

#include "kalfuse/calibration.hpp"
#include "kalfuse/fusion.hpp"

using namespace kalfuse;

namespace {

constexpr int kSide = 81;
constexpr int kFactor = 9;
constexpr int kBands = 2;

StateOrdering ordering() { return StateOrdering(kSide, kSide, kBands, kFactor); }

CovarianceKind kind_for(int arg) {
    switch (arg) {
        case 0: return CovarianceKind::Diagonal;
        case 1: return CovarianceKind::PerHrPixel;
        default: return CovarianceKind::PerCoarsePixel;
    }
}

StateBelief make_belief(const StateOrdering& ord, CovarianceKind kind, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> dist(0.05, 0.45);
    StateBelief belief;
    belief.mean.resize(ord.state_size());
    for (int i = 0; i < ord.state_size(); ++i) belief.mean[i] = dist(gen);
    belief.cov = BlockDiagCovariance::scaled_identity(ord.state_size(),
                                                      block_dim_for(kind, ord), 1e-4);
    belief.tag = BeliefTag::Updated;
    return belief;
}

Eigen::VectorXd random_q(const StateOrdering& ord, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> dist(1e-5, 1e-2);
    Eigen::VectorXd q(ord.state_size());
    for (int i = 0; i < q.size(); ++i) q[i] = dist(gen);
    return q;
}

void BM_predict(benchmark::State& state) {
    const StateOrdering ord = ordering();
    std::mt19937_64 gen(1);
    const StateBelief belief = make_belief(ord, kind_for(int(state.range(0))), gen);
    const TransitionModel model = TransitionModel::random_walk(random_q(ord, gen));
    for (auto _ : state) {
        StateBelief out = predict(belief, model);
        benchmark::DoNotOptimize(out.mean.data());
    }
}
BENCHMARK(BM_predict)->Arg(0)->Arg(1)->Arg(2);

void BM_update_coarse(benchmark::State& state) {
    const StateOrdering ord = ordering();
    std::mt19937_64 gen(2);
    StateBelief belief = make_belief(ord, kind_for(int(state.range(0))), gen);
    belief.tag = BeliefTag::Predicted;
    const ObservationOperator op("modis", SpectralResponse::identity(kBands),
                                 SpatialDegradation::uniform(kFactor),
                                 OutlierMask::all(ord.n_coarse()),
                                 Eigen::VectorXd::Constant(kBands, 1e-4), ord);
    std::uniform_real_distribution<double> dist(0.05, 0.45);
    Eigen::VectorXd y(op.measurement_size());
    for (int i = 0; i < y.size(); ++i) y[i] = dist(gen);
    for (auto _ : state) {
        StateBelief out = update(belief, op, y);
        benchmark::DoNotOptimize(out.mean.data());
    }
}
BENCHMARK(BM_update_coarse)->Arg(0)->Arg(1)->Arg(2);

void BM_update_high_res(benchmark::State& state) {
    const StateOrdering ord = ordering();
    std::mt19937_64 gen(3);
    StateBelief belief = make_belief(ord, kind_for(int(state.range(0))), gen);
    belief.tag = BeliefTag::Predicted;
    const ObservationOperator op("landsat", SpectralResponse::identity(kBands),
                                 SpatialDegradation::identity(),
                                 OutlierMask::all(ord.n_hr_pixels()),
                                 Eigen::VectorXd::Constant(kBands, 1e-10), ord);
    std::uniform_real_distribution<double> dist(0.05, 0.45);
    Eigen::VectorXd y(op.measurement_size());
    for (int i = 0; i < y.size(); ++i) y[i] = dist(gen);
    for (auto _ : state) {
        StateBelief out = update(belief, op, y);
        benchmark::DoNotOptimize(out.mean.data());
    }
}
BENCHMARK(BM_update_high_res)->Arg(0)->Arg(1)->Arg(2);

void BM_smooth_window(benchmark::State& state) {
    const StateOrdering ord = ordering();
    std::mt19937_64 gen(4);
    const CovarianceKind kind = kind_for(int(state.range(0)));
    FusionTimeline base;
    StateBelief belief = make_belief(ord, kind, gen);
    for (int k = 0; k < 5; ++k) {
        TimelineEntry entry;
        entry.date = Date{k};
        if (k > 0) {
            entry.model = TransitionModel::random_walk(random_q(ord, gen));
            belief = predict(belief, entry.model);
        }
        entry.filtered = belief;
        base.push(std::move(entry));
    }
    for (auto _ : state) {
        FusionTimeline timeline = base;
        smooth(timeline, 1.0);
        benchmark::DoNotOptimize(timeline[0].smoothed->mean.data());
    }
}
BENCHMARK(BM_smooth_window)->Arg(0)->Arg(1)->Arg(2);

void BM_calibrate_q(benchmark::State& state) {
    const StateOrdering ord = ordering();
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> dist(0.05, 0.45);
    HistoricalDataset ds;
    for (int i = 0; i < 5; ++i) {
        Eigen::VectorXd frame(ord.state_size());
        for (int j = 0; j < frame.size(); ++j) frame[j] = dist(gen);
        ds.add(Date{30 * i}, frame);
    }
    Eigen::VectorXd ref(ord.state_size());
    for (int j = 0; j < ref.size(); ++j) ref[j] = dist(gen);
    for (auto _ : state) {
        ProcessNoise q = compute_q(ref, ds, 1, 1e-5, 5.0);
        benchmark::DoNotOptimize(q.diag.data());
    }
}
BENCHMARK(BM_calibrate_q);

}  // namespace

BENCHMARK_MAIN();

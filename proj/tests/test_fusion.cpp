#include <doctest.h>

#include "kalfuse/fusion.hpp"
#include "support/dense_reference.hpp"
#include "support/test_util.hpp"

using namespace kalfuse;

namespace {

BlockDiagCovariance random_spd(std::mt19937_64& gen, int dim, int block_dim, double scale) {
    BlockDiagCovariance cov(dim, block_dim);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (int g = 0; g < cov.groups(); ++g) {
        Eigen::MatrixXd a(block_dim, block_dim);
        for (int r = 0; r < block_dim; ++r)
            for (int c = 0; c < block_dim; ++c) a(r, c) = dist(gen);
        cov.block(g) = scale * (a * a.transpose() +
                                0.1 * Eigen::MatrixXd::Identity(block_dim, block_dim));
    }
    return cov;
}

ObservationOperator uniform_op(const StateOrdering& ord, int factor,
                               const Eigen::MatrixXd& gains, double variance,
                               OutlierMask mask) {
    SpectralResponse spectral{gains};
    const SpatialDegradation spatial =
        factor == 1 ? SpatialDegradation::identity() : SpatialDegradation::uniform(factor);
    return ObservationOperator("m", spectral, spatial, std::move(mask),
                               Eigen::VectorXd::Constant(gains.rows(), variance), ord);
}

}  // namespace

TEST_CASE("prediction with zero noise keeps the belief") {
    StateBelief belief;
    belief.mean = Eigen::VectorXd::LinSpaced(6, 0.0, 1.0);
    belief.cov = BlockDiagCovariance::scaled_identity(6, 2, 0.5);
    const StateBelief out =
        predict(belief, TransitionModel::random_walk(Eigen::VectorXd::Zero(6)));
    CHECK((out.mean - belief.mean).cwiseAbs().maxCoeff() == 0.0);
    CHECK((out.cov.to_dense() - belief.cov.to_dense()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(out.tag == BeliefTag::Predicted);
}

TEST_CASE("diagonal prediction adds the noise diagonal") {
    StateBelief belief;
    belief.mean = Eigen::VectorXd::Zero(4);
    belief.cov = BlockDiagCovariance::scaled_identity(4, 1, 0.3);
    const StateBelief out =
        predict(belief, TransitionModel::random_walk(Eigen::VectorXd::Constant(4, 0.2)));
    for (int i = 0; i < 4; ++i) CHECK(out.cov.diagonal()[i] == 0.5);
}

TEST_CASE("prediction matches the dense reference with diagonal F") {
    auto gen = testutil::rng(41);
    StateOrdering ord(2, 2, 2, 2);  // n = 8
    StateBelief belief;
    belief.mean = testutil::random_vector(gen, 8);
    belief.cov = random_spd(gen, 8, 8, 1.0);  // dense structure
    Eigen::VectorXd f = testutil::random_vector(gen, 8, -1.0, 1.0);
    Eigen::VectorXd q = testutil::random_vector(gen, 8, 0.0, 0.5);
    const StateBelief out = predict(belief, TransitionModel::scaled(f, q));

    const oracle::DenseBelief ref = oracle::predict(
        {belief.mean, belief.cov.to_dense()}, Eigen::MatrixXd(f.asDiagonal()),
        Eigen::MatrixXd(q.asDiagonal()));
    CHECK((out.mean - ref.mean).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((out.cov.to_dense() - ref.cov).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("empty mask returns the belief unchanged") {
    StateOrdering ord(2, 2, 1, 2);
    StateBelief belief;
    belief.mean = Eigen::VectorXd::Constant(4, 0.4);
    belief.cov = BlockDiagCovariance::scaled_identity(4, 1, 1.0);
    belief.tag = BeliefTag::Predicted;
    const auto op =
        uniform_op(ord, 2, Eigen::MatrixXd::Identity(1, 1), 1e-4, OutlierMask::none());
    const StateBelief out = update(belief, op, Eigen::VectorXd(0));
    CHECK((out.mean - belief.mean).cwiseAbs().maxCoeff() == 0.0);
    CHECK((out.cov.to_dense() - belief.cov.to_dense()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scalar update reproduces the textbook posterior") {
    StateOrdering ord(1, 1, 1, 1);
    StateBelief belief;
    belief.mean = Eigen::VectorXd::Zero(1);
    belief.cov = BlockDiagCovariance::scaled_identity(1, 1, 1.0);
    belief.tag = BeliefTag::Predicted;
    const auto op = uniform_op(ord, 1, Eigen::MatrixXd::Identity(1, 1), 1.0,
                               OutlierMask::all(1));
    const StateBelief out = update(belief, op, Eigen::VectorXd::Constant(1, 2.0));
    CHECK(out.mean[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(out.cov.diagonal()[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("coarse-structure update equals the dense oracle") {
    auto gen = testutil::rng(42);
    StateOrdering ord(6, 3, 1, 3);  // d = 3, L_H = 1, two coarse pixels
    for (int trial = 0; trial < 10; ++trial) {
        StateBelief belief;
        belief.mean = testutil::random_vector(gen, ord.state_size());
        belief.cov = random_spd(gen, ord.state_size(), ord.coarse_run_length(), 0.5);
        belief.tag = BeliefTag::Predicted;
        const OutlierMask mask = trial % 2 ? mask_from_qa({0, 1}) : OutlierMask::all(2);
        const auto op = uniform_op(ord, 3, Eigen::MatrixXd::Identity(1, 1), 1e-2, mask);
        const Eigen::VectorXd y = testutil::random_vector(gen, op.measurement_size());

        const StateBelief out = update(belief, op, y);
        const oracle::DenseBelief ref =
            oracle::update({belief.mean, belief.cov.to_dense()}, oracle::materialize(op),
                           oracle::materialize_noise(op), y);
        CHECK((out.mean - ref.mean).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((out.cov.to_dense() - ref.cov).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("hr-pixel runs inside one coarse group update exactly") {
    auto gen = testutil::rng(43);
    StateOrdering ord(4, 4, 2, 2);  // n = 32, coarse runs of 8
    StateBelief belief;
    belief.mean = testutil::random_vector(gen, 32);
    belief.cov = random_spd(gen, 32, 8, 0.2);  // PerCoarsePixel
    belief.tag = BeliefTag::Predicted;
    // High-resolution modality: one run of 2 per HR pixel, some pixels masked.
    std::vector<int> qa(16, 0);
    qa[3] = qa[7] = qa[8] = 1;
    const auto op = uniform_op(ord, 1, Eigen::MatrixXd::Identity(2, 2), 1e-3, mask_from_qa(qa));
    const Eigen::VectorXd y = testutil::random_vector(gen, op.measurement_size());

    const StateBelief out = update(belief, op, y);
    const oracle::DenseBelief ref =
        oracle::update({belief.mean, belief.cov.to_dense()}, oracle::materialize(op),
                       oracle::materialize_noise(op), y);
    CHECK((out.mean - ref.mean).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((out.cov.to_dense() - ref.cov).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("posterior variance never exceeds the prior under a full mask") {
    auto gen = testutil::rng(44);
    StateOrdering ord(6, 6, 2, 3);
    StateBelief belief;
    belief.mean = testutil::random_vector(gen, ord.state_size());
    belief.cov = random_spd(gen, ord.state_size(), 2, 0.4);  // PerHrPixel
    belief.tag = BeliefTag::Predicted;
    const Eigen::VectorXd prior = belief.cov.diagonal();
    const auto op =
        uniform_op(ord, 3, Eigen::MatrixXd::Identity(2, 2), 1e-2, OutlierMask::all(4));
    const StateBelief out =
        update(belief, op, testutil::random_vector(gen, op.measurement_size()));
    const Eigen::VectorXd post = out.cov.diagonal();
    for (int i = 0; i < prior.size(); ++i) CHECK(post[i] <= prior[i] + 1e-12);
    CHECK(out.cov.max_asymmetry() < 1e-12);
    CHECK(out.cov.min_eigenvalue() > -1e-10);
}

TEST_CASE("with no observations the variance grows exactly by Q each step") {
    auto gen = testutil::rng(45);
    StateBelief belief;
    belief.mean = testutil::random_vector(gen, 8);
    belief.cov = random_spd(gen, 8, 2, 0.3);
    for (int step = 0; step < 3; ++step) {
        const Eigen::VectorXd q = testutil::random_vector(gen, 8, 0.0, 0.2);
        const Eigen::VectorXd before = belief.cov.diagonal();
        belief = predict(belief, TransitionModel::random_walk(q));
        const Eigen::VectorXd after = belief.cov.diagonal();
        for (int i = 0; i < 8; ++i) CHECK(after[i] == before[i] + q[i]);
    }
}

TEST_CASE("sequential modality order does not matter in the dense exact case") {
    auto gen = testutil::rng(46);
    StateOrdering ord(2, 2, 2, 2);  // n = 8
    StateBelief belief;
    belief.mean = testutil::random_vector(gen, 8);
    belief.cov = random_spd(gen, 8, 8, 0.5);  // dense structure
    belief.tag = BeliefTag::Predicted;
    const auto hr = uniform_op(ord, 1, Eigen::MatrixXd::Identity(2, 2), 1e-3,
                               OutlierMask::all(4));
    Eigen::MatrixXd gains(1, 2);
    gains << 0.7, 0.3;
    const auto lr = uniform_op(ord, 2, gains, 1e-2, OutlierMask::all(1));
    const Eigen::VectorXd y_hr = testutil::random_vector(gen, hr.measurement_size());
    const Eigen::VectorXd y_lr = testutil::random_vector(gen, lr.measurement_size());

    const StateBelief ab = update(update(belief, hr, y_hr), lr, y_lr);
    const StateBelief ba = update(update(belief, lr, y_lr), hr, y_hr);
    CHECK((ab.mean - ba.mean).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((ab.cov.to_dense() - ba.cov.to_dense()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("ill-conditioned innovation recovers through the jitter retry") {
    StateOrdering ord(1, 1, 2, 1);
    StateBelief belief;
    belief.mean = Eigen::VectorXd::Constant(2, 0.5);
    belief.cov = BlockDiagCovariance(2, 2);
    belief.cov.block(0) << 1.0, 0.0, 0.0, 0.0;  // singular prior direction
    belief.tag = BeliefTag::Predicted;
    auto op = uniform_op(ord, 1, Eigen::MatrixXd::Identity(2, 2), 1.0, OutlierMask::all(1));
    Eigen::MatrixXd tiny = Eigen::MatrixXd::Identity(2, 2);
    tiny(1, 1) = 1e-200;  // SPD but far below the pivot threshold
    op.set_noise_blocks({tiny});

    UpdateStats stats;
    const StateBelief out = update(belief, op, Eigen::VectorXd::Constant(2, 1.0), &stats);
    CHECK(stats.skipped_lr_pixels.empty());
    CHECK(out.mean.allFinite());
    CHECK(out.cov.to_dense().allFinite());
}

TEST_CASE("constrain clamps the mean and keeps the covariance") {
    auto gen = testutil::rng(47);
    StateBelief belief;
    belief.mean = Eigen::VectorXd::Constant(4, 0.5);
    belief.cov = BlockDiagCovariance::scaled_identity(4, 2, 0.1);
    const StateBelief same = constrain(belief, 1.0);
    CHECK((same.mean - belief.mean).cwiseAbs().maxCoeff() == 0.0);

    belief.mean << -0.1, 0.3, 1.2, 0.9;
    const StateBelief clamped = constrain(belief, 1.0);
    CHECK(clamped.mean[0] == 0.0);
    CHECK(clamped.mean[1] == 0.3);
    CHECK(clamped.mean[2] == 1.0);
    CHECK((clamped.cov.to_dense() - belief.cov.to_dense()).cwiseAbs().maxCoeff() == 0.0);

    for (int trial = 0; trial < 5; ++trial) {
        belief.mean = testutil::random_vector(gen, 4, -2.0, 3.0);
        const double s_max = 1.4;
        const StateBelief out = constrain(belief, s_max);
        for (int i = 0; i < 4; ++i)
            CHECK(out.mean[i] == std::max(std::min(belief.mean[i], s_max), 0.0));
    }
    CHECK_THROWS_AS(constrain(belief, 0.0), DataError);
}

namespace {

/// Builds a small filtered timeline by running predict/update through the
/// library, recording per-step models, so smoothing tests can run on it.
FusionTimeline run_small_filter(std::mt19937_64& gen, const StateOrdering& ord,
                                const ObservationOperator& op, int steps, int block_dim,
                                double q_scale, std::vector<oracle::DenseBelief>* dense_out) {
    StateBelief belief;
    belief.mean = testutil::random_vector(gen, ord.state_size(), 0.2, 0.8);
    belief.cov = random_spd(gen, ord.state_size(), block_dim, 0.1);
    oracle::DenseBelief dense{belief.mean, belief.cov.to_dense()};

    FusionTimeline timeline;
    for (int k = 0; k < steps; ++k) {
        TimelineEntry entry;
        entry.date = Date{k};
        if (k > 0) {
            const Eigen::VectorXd q =
                testutil::random_vector(gen, ord.state_size(), 0.1 * q_scale, q_scale);
            entry.model = TransitionModel::random_walk(q);
            belief = predict(belief, entry.model);
            dense = oracle::predict(dense, Eigen::MatrixXd::Identity(dense.mean.size(),
                                                                     dense.mean.size()),
                                    Eigen::MatrixXd(q.asDiagonal()));
        }
        const Eigen::VectorXd y =
            testutil::random_vector(gen, op.measurement_size(), 0.2, 0.8);
        belief = update(belief, op, y);
        dense = oracle::update(dense, oracle::materialize(op), oracle::materialize_noise(op), y);
        entry.filtered = belief;
        if (dense_out) dense_out->push_back(dense);
        timeline.push(std::move(entry));
    }
    return timeline;
}

}  // namespace

TEST_CASE("a one-step timeline smooths to its filtered belief") {
    auto gen = testutil::rng(48);
    StateOrdering ord(2, 2, 1, 2);
    const auto op =
        uniform_op(ord, 2, Eigen::MatrixXd::Identity(1, 1), 1e-2, OutlierMask::all(1));
    FusionTimeline timeline = run_small_filter(gen, ord, op, 1, 4, 0.1, nullptr);
    smooth(timeline, 1e6);
    CHECK(timeline.has_smoothed());
    CHECK((timeline[0].smoothed->mean - timeline[0].filtered.mean).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("uninformative dynamics make smoothing a no-op") {
    auto gen = testutil::rng(49);
    StateOrdering ord(2, 2, 1, 2);
    const auto op =
        uniform_op(ord, 2, Eigen::MatrixXd::Identity(1, 1), 1e-2, OutlierMask::all(1));
    FusionTimeline timeline = run_small_filter(gen, ord, op, 3, 4, 1e6, nullptr);
    smooth(timeline, 1e6);
    for (int k = 0; k < 3; ++k) {
        const auto& filtered = timeline[k].filtered;
        const auto& smoothed = *timeline[k].smoothed;
        CHECK((smoothed.mean - filtered.mean).cwiseAbs().maxCoeff() /
                  filtered.mean.cwiseAbs().maxCoeff() <
              1e-4);
    }
}

TEST_CASE("three-step scalar smoothing matches the hand-rolled RTS oracle") {
    auto gen = testutil::rng(50);
    StateOrdering ord(1, 1, 1, 1);
    const auto op =
        uniform_op(ord, 1, Eigen::MatrixXd::Identity(1, 1), 0.5, OutlierMask::all(1));
    std::vector<oracle::DenseBelief> dense_filtered;
    FusionTimeline timeline = run_small_filter(gen, ord, op, 3, 1, 0.3, &dense_filtered);
    smooth(timeline, 1e6);

    std::vector<oracle::DenseBelief> dense_smoothed(3);
    dense_smoothed[2] = dense_filtered[2];
    for (int k = 1; k >= 0; --k)
        dense_smoothed[k] = oracle::rts_step(
            dense_filtered[k], dense_smoothed[k + 1], Eigen::MatrixXd::Identity(1, 1),
            Eigen::MatrixXd(timeline[k + 1].model.q_diag.asDiagonal()));
    for (int k = 0; k < 3; ++k) {
        CHECK(std::abs(timeline[k].smoothed->mean[0] - dense_smoothed[k].mean[0]) < 1e-10);
        CHECK(std::abs(timeline[k].smoothed->cov.diagonal()[0] - dense_smoothed[k].cov(0, 0)) <
              1e-10);
    }
}

TEST_CASE("coarse-structure smoothing matches the dense oracle") {
    auto gen = testutil::rng(51);
    StateOrdering ord(4, 2, 1, 2);  // two coarse pixels, runs of 4
    const auto op =
        uniform_op(ord, 2, Eigen::MatrixXd::Identity(1, 1), 1e-2, OutlierMask::all(2));
    std::vector<oracle::DenseBelief> dense_filtered;
    FusionTimeline timeline =
        run_small_filter(gen, ord, op, 4, ord.coarse_run_length(), 0.2, &dense_filtered);
    smooth(timeline, 1e6);

    std::vector<oracle::DenseBelief> dense_smoothed(4);
    dense_smoothed[3] = dense_filtered[3];
    for (int k = 2; k >= 0; --k)
        dense_smoothed[k] = oracle::rts_step(
            dense_filtered[k], dense_smoothed[k + 1],
            Eigen::MatrixXd::Identity(ord.state_size(), ord.state_size()),
            Eigen::MatrixXd(timeline[k + 1].model.q_diag.asDiagonal()));
    for (int k = 0; k < 4; ++k) {
        CHECK((timeline[k].smoothed->mean - dense_smoothed[k].mean).cwiseAbs().maxCoeff() <
              1e-10);
        CHECK((timeline[k].smoothed->cov.to_dense() - dense_smoothed[k].cov)
                  .cwiseAbs()
                  .maxCoeff() < 1e-10);
        CHECK(timeline[k].smoothed->cov.max_asymmetry() < 1e-12);
        CHECK(timeline[k].smoothed->cov.min_eigenvalue() > -1e-10);
    }
}

TEST_CASE("update rejects inconsistent inputs") {
    StateOrdering ord(2, 2, 1, 2);
    StateBelief belief;
    belief.mean = Eigen::VectorXd::Zero(4);
    belief.cov = BlockDiagCovariance::scaled_identity(4, 1, 1.0);
    const auto op =
        uniform_op(ord, 2, Eigen::MatrixXd::Identity(1, 1), 1e-2, OutlierMask::all(1));
    CHECK_THROWS_AS(update(belief, op, Eigen::VectorXd::Zero(2)), DimensionError);
    belief.tag = BeliefTag::Smoothed;
    CHECK_THROWS_AS(update(belief, op, Eigen::VectorXd::Zero(1)), DataError);
}

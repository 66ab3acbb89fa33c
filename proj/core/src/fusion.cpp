#include "kalfuse/fusion.hpp"

#include <cmath>
#include <utility>

namespace kalfuse {

TransitionModel TransitionModel::random_walk(Eigen::VectorXd q) {
    TransitionModel m;
    m.q_diag = std::move(q);
    return m;
}

TransitionModel TransitionModel::scaled(Eigen::VectorXd f, Eigen::VectorXd q) {
    TransitionModel m;
    m.f_diag = std::move(f);
    m.q_diag = std::move(q);
    if (m.f_diag.size() > 0 && m.f_diag.cwiseAbs().maxCoeff() > 1.0 + 1e-12)
        throw DataError("transition diagonal exceeds unit spectral norm");
    return m;
}

void TransitionModel::validate(int dim) const {
    if (q_diag.size() != dim)
        throw DimensionError("process noise length " + std::to_string(q_diag.size()) +
                             " does not match state size " + std::to_string(dim));
    if (f_diag.size() != 0 && f_diag.size() != dim)
        throw DimensionError("transition diagonal does not match state size");
    if ((q_diag.array() < 0.0).any()) throw DataError("process noise must be nonnegative");
}

StateBelief predict(const StateBelief& belief, const TransitionModel& model) {
    model.validate(int(belief.mean.size()));
    StateBelief out = belief;
    out.tag = BeliefTag::Predicted;
    const int bd = out.cov.block_dim();
    if (!model.identity_f()) {
        out.mean = model.f_diag.cwiseProduct(out.mean);
        for (int g = 0; g < out.cov.groups(); ++g) {
            const auto fg = model.f_diag.segment(Eigen::Index(g) * bd, bd);
            auto block = out.cov.block(g);
            block = (fg * fg.transpose()).cwiseProduct(block).eval();
        }
    }
    out.cov.add_diagonal(model.q_diag);
    return out;
}

namespace {

// Independent processing cell of one update: a contiguous state range
// covering whole covariance groups, plus the kept pixels measured from it.
struct Cell {
    int state_start = 0;
    int state_len = 0;
    std::vector<int> kept;  // positions into the operator's kept list
};

std::vector<Cell> build_cells(const ObservationOperator& op, int block_dim) {
    const int w = op.run_length();
    std::vector<Cell> cells;
    if (w >= block_dim) {
        if (w % block_dim != 0)
            throw DimensionError("covariance groups do not partition the measurement run");
        for (int i = 0; i < op.n_kept(); ++i) {
            if (op.run_start(i) % block_dim != 0)
                throw DimensionError("measurement run is not group-aligned");
            cells.push_back(Cell{op.run_start(i), w, {i}});
        }
        return cells;
    }
    // Several runs per covariance group. Consecutive kept pixels hitting the
    // same group share a cell; a group revisited later gets a fresh cell,
    // which assimilates sequentially and stays exact for independent noise.
    for (int i = 0; i < op.n_kept(); ++i) {
        const int g = op.run_start(i) / block_dim;
        if (op.run_start(i) - g * block_dim + w > block_dim)
            throw DimensionError("measurement run straddles covariance groups");
        if (cells.empty() || cells.back().state_start != g * block_dim)
            cells.push_back(Cell{g * block_dim, block_dim, {}});
        cells.back().kept.push_back(i);
    }
    return cells;
}

// LDLT factorization treated as singular when the pivot spread collapses.
bool usable_ldlt(const Eigen::LDLT<Eigen::MatrixXd>& ldlt) {
    if (ldlt.info() != Eigen::Success) return false;
    const auto d = ldlt.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    const double dmin = d.minCoeff();
    return dmin > 0.0 && dmin > dmax * 1e-15;
}

}  // namespace

StateBelief update(const StateBelief& belief, const ObservationOperator& op,
                   const Eigen::VectorXd& measurement, UpdateStats* stats) {
    if (belief.tag == BeliefTag::Smoothed)
        throw DataError("cannot update a smoothed belief");
    if (belief.mean.size() != op.state_size())
        throw DimensionError("belief state size does not match the operator");
    if (measurement.size() != op.measurement_size())
        throw DimensionError("measurement length " + std::to_string(measurement.size()) +
                             " does not match operator output " +
                             std::to_string(op.measurement_size()));
    if (op.n_kept() == 0) return belief;

    StateBelief post = belief;
    post.tag = BeliefTag::Updated;
    const int lm = op.measured_bands();
    const int w = op.run_length();
    const int bd = post.cov.block_dim();
    const Eigen::MatrixXd& H = op.pixel_block();

    for (const Cell& cell : build_cells(op, bd)) {
        const int m = lm * int(cell.kept.size());
        const int ng = cell.state_len / bd;
        const int g0 = cell.state_start / bd;

        Eigen::MatrixXd Hc = Eigen::MatrixXd::Zero(m, cell.state_len);
        Eigen::VectorXd yc(m);
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
        for (int j = 0; j < int(cell.kept.size()); ++j) {
            const int i = cell.kept[j];
            Hc.block(Eigen::Index(j) * lm, op.run_start(i) - cell.state_start, lm, w) = H;
            yc.segment(Eigen::Index(j) * lm, lm) = measurement.segment(Eigen::Index(i) * lm, lm);
            T.block(Eigen::Index(j) * lm, Eigen::Index(j) * lm, lm, lm) = op.noise_blocks()[i];
        }
        const Eigen::VectorXd v =
            yc - Hc * post.mean.segment(cell.state_start, cell.state_len);
        for (int k = 0; k < ng; ++k) {
            const auto Hg = Hc.middleCols(Eigen::Index(k) * bd, bd);
            T.noalias() += Hg * post.cov.block(g0 + k) * Hg.transpose();
        }
        if (!T.allFinite()) throw NumericError("non-finite innovation covariance");

        Eigen::LDLT<Eigen::MatrixXd> ldlt(T);
        if (!usable_ldlt(ldlt)) {
            // One jitter retry, then skip this cell's pixels.
            T.diagonal().array() += 1e-12 * T.trace() / double(m);
            ldlt.compute(T);
            if (!usable_ldlt(ldlt)) {
                if (stats)
                    for (int i : cell.kept)
                        stats->skipped_lr_pixels.push_back(op.mask().kept[i]);
                continue;
            }
        }

        for (int k = 0; k < ng; ++k) {
            auto Pg = post.cov.block(g0 + k);
            const Eigen::MatrixXd S = Pg * Hc.middleCols(Eigen::Index(k) * bd, bd).transpose();
            const Eigen::MatrixXd K = ldlt.solve(S.transpose()).transpose();
            post.mean.segment(cell.state_start + Eigen::Index(k) * bd, bd).noalias() += K * v;
            Pg.noalias() -= K * S.transpose();
            Pg = ((Pg + Pg.transpose()) * 0.5).eval();
        }
        if (stats) {
            stats->cells += 1;
            stats->measurement_dims += m;
            stats->innovation_sq += v.squaredNorm();
        }
    }
    return post;
}

StateBelief constrain(const StateBelief& belief, double s_max) {
    if (s_max <= 0.0) throw DataError("s_max must be positive");
    StateBelief out = belief;
    out.mean = out.mean.cwiseMax(0.0).cwiseMin(s_max);
    return out;
}

void FusionTimeline::push(TimelineEntry entry) {
    if (!entries_.empty() && entry.date <= entries_.back().date)
        throw DataError("timeline instants must strictly increase");
    entries_.push_back(std::move(entry));
}

bool FusionTimeline::has_smoothed() const {
    if (entries_.empty()) return false;
    for (const auto& e : entries_)
        if (!e.smoothed.has_value()) return false;
    return true;
}

void smooth(FusionTimeline& timeline, double s_max, const BeliefObserver& observer) {
    if (timeline.empty()) throw DataError("cannot smooth an empty timeline");
    const int K = timeline.size();

    auto clamp_tagged = [&](StateBelief belief, int instant) {
        belief.instant = instant;
        belief.tag = BeliefTag::Smoothed;
        belief.mean = belief.mean.cwiseMax(0.0).cwiseMin(s_max);
        return belief;
    };

    timeline[K - 1].smoothed = clamp_tagged(timeline[K - 1].filtered, K - 1);
    if (observer) observer(*timeline[K - 1].smoothed, "smooth");

    for (int k = K - 2; k >= 0; --k) {
        const StateBelief& filt = timeline[k].filtered;
        const StateBelief& next_smoothed = *timeline[k + 1].smoothed;
        const TransitionModel& model = timeline[k + 1].model;  // transition k -> k+1
        model.validate(int(filt.mean.size()));

        StateBelief sm = filt;
        const int bd = sm.cov.block_dim();
        for (int g = 0; g < sm.cov.groups(); ++g) {
            const Eigen::Index off = Eigen::Index(g) * bd;
            const Eigen::MatrixXd Pg = filt.cov.block(g);
            Eigen::MatrixXd PFt = Pg;  // P_g F_gᵀ
            Eigen::VectorXd mean_pred = filt.mean.segment(off, bd);
            Eigen::MatrixXd Ppred = Pg;
            if (!model.identity_f()) {
                const auto fg = model.f_diag.segment(off, bd);
                PFt = Pg * fg.asDiagonal();
                mean_pred = fg.cwiseProduct(mean_pred);
                Ppred = (fg * fg.transpose()).cwiseProduct(Pg);
            }
            Ppred.diagonal() += model.q_diag.segment(off, bd);

            Eigen::LDLT<Eigen::MatrixXd> ldlt(Ppred);
            if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0))
                throw NumericError("singular predicted block for group " + std::to_string(g) +
                                   " at instant " + std::to_string(k));
            const Eigen::MatrixXd G = ldlt.solve(PFt.transpose()).transpose();

            sm.mean.segment(off, bd).noalias() +=
                G * (next_smoothed.mean.segment(off, bd) - mean_pred);
            auto block = sm.cov.block(g);
            block.noalias() += G * (Eigen::MatrixXd(next_smoothed.cov.block(g)) - Ppred) *
                               G.transpose();
            block = ((block + block.transpose()) * 0.5).eval();
        }
        timeline[k].smoothed = clamp_tagged(std::move(sm), k);
        if (observer) observer(*timeline[k].smoothed, "smooth");
    }
}

}  // namespace kalfuse

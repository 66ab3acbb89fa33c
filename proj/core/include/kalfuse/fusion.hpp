#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "kalfuse/calibration.hpp"
#include "kalfuse/covariance.hpp"
#include "kalfuse/observation.hpp"

namespace kalfuse {

enum class BeliefTag { Initial, Predicted, Updated, Smoothed };

/// Gaussian belief over the latent HR state at one instant.
struct StateBelief {
    Eigen::VectorXd mean;
    BlockDiagCovariance cov;
    int instant = 0;
    BeliefTag tag = BeliefTag::Initial;
};

/// Random-walk dynamics: identity (or per-entry diagonal) transition plus
/// diagonal process noise.
struct TransitionModel {
    Eigen::VectorXd f_diag;  // empty = identity transition
    Eigen::VectorXd q_diag;

    static TransitionModel random_walk(Eigen::VectorXd q);
    static TransitionModel scaled(Eigen::VectorXd f, Eigen::VectorXd q);
    bool identity_f() const { return f_diag.size() == 0; }
    void validate(int dim) const;
};

/// Kalman prediction. With identity transition each covariance group becomes
/// P_g + Q_g.
StateBelief predict(const StateBelief& belief, const TransitionModel& model);

struct UpdateStats {
    int cells = 0;
    int measurement_dims = 0;
    double innovation_sq = 0.0;           // accumulated squared innovation norm
    std::vector<int> skipped_lr_pixels;   // LR pixels dropped after jitter retry
};

/// Sequential Kalman update with one modality's stacked pixel-major
/// measurement. The innovation covariance factors over independent cells
/// (kept LR pixels, or covariance groups when a group spans several pixels);
/// posterior terms outside the declared block structure are discarded.
StateBelief update(const StateBelief& belief, const ObservationOperator& op,
                   const Eigen::VectorXd& measurement, UpdateStats* stats = nullptr);

/// Clamps the mean elementwise to [0, s_max]; the covariance is untouched.
StateBelief constrain(const StateBelief& belief, double s_max);

/// Per-instant record of the filter pass.
struct TimelineEntry {
    Date date{};
    StateBelief filtered;
    TransitionModel model;  // transition into this instant; empty q at the first instant
    std::vector<std::string> assimilated;
    int assimilated_pixels = 0;
    double innovation_rms = 0.0;
    std::optional<StateBelief> smoothed;
};

/// Dated sequence of filtered (and optionally smoothed) beliefs.
class FusionTimeline {
public:
    void push(TimelineEntry entry);
    int size() const { return int(entries_.size()); }
    bool empty() const { return entries_.empty(); }
    const TimelineEntry& operator[](int k) const { return entries_[k]; }
    TimelineEntry& operator[](int k) { return entries_[k]; }
    bool has_smoothed() const;

private:
    std::vector<TimelineEntry> entries_;
};

using BeliefObserver = std::function<void(const StateBelief&, std::string_view stage)>;

/// Backward RTS pass over a completed filter timeline; fills the smoothed
/// beliefs and clamps the smoothed means to [0, s_max]. Each entry k >= 1
/// must carry the transition model the filter used to predict into it.
void smooth(FusionTimeline& timeline, double s_max, const BeliefObserver& observer = {});

}  // namespace kalfuse

#pragma once

#include <vector>

#include <Eigen/Dense>

#include "kalfuse/date.hpp"
#include "kalfuse/errors.hpp"

namespace kalfuse {

/// Time-indexed archive of past high-resolution images, each already in
/// ι-ordering. Dates strictly increase; all vectors share one length.
class HistoricalDataset {
public:
    void add(Date date, Eigen::VectorXd state);

    int size() const { return int(states_.size()); }
    Date date(int i) const { return dates_[i]; }
    const Eigen::VectorXd& state(int i) const { return states_[i]; }
    int state_size() const { return states_.empty() ? 0 : int(states_[0].size()); }

private:
    std::vector<Date> dates_;
    std::vector<Eigen::VectorXd> states_;
};

/// Divisor convention for the windowed per-entry variance.
enum class VarianceDivisor {
    Unbiased,    // divide by (window count - 1)
    Population,  // divide by window count
};

/// Diagonal process-noise covariance for one transition, with its
/// calibration provenance.
struct ProcessNoise {
    Eigen::VectorXd diag;        // per-entry variance, each >= epsilon2 * delta_days
    double epsilon2 = 0.0;       // variance-rate floor
    double delta_days = 0.0;     // day span of the transition this noise drives
    int matched_index = -1;      // archive index the window starts at
    double window_span_days = 0; // day span of the matched archive window
};

/// Index of the archive entry most similar (cosine similarity) to the
/// reference, restricted to indices whose window of `window` following
/// entries still fits in the archive. Ties break to the lowest index.
int find_most_similar(const Eigen::VectorXd& reference, const HistoricalDataset& dataset,
                      int window);

/// Per-entry noise: variance over the matched window of `window`+1 archive
/// images, divided by the window's day span, floored at epsilon2, and scaled
/// by delta_days.
ProcessNoise compute_q(const Eigen::VectorXd& reference, const HistoricalDataset& dataset,
                       int window, double epsilon2, double delta_days,
                       VarianceDivisor divisor = VarianceDivisor::Unbiased);

/// Caches the matched window for a fixed reference so that per-instant
/// recalibration only rescales by delta_days.
class QCalibrator {
public:
    QCalibrator(const HistoricalDataset& dataset, int window, double epsilon2,
                VarianceDivisor divisor = VarianceDivisor::Unbiased);

    void set_reference(const Eigen::VectorXd& reference);
    bool has_reference() const { return matched_ >= 0; }
    int matched_index() const { return matched_; }
    double window_span_days() const { return span_; }

    ProcessNoise process_noise(double delta_days) const;

private:
    const HistoricalDataset& dataset_;
    int window_;
    double epsilon2_;
    VarianceDivisor divisor_;
    int matched_ = -1;
    double span_ = 0.0;
    Eigen::VectorXd variance_rate_;  // per-entry window variance / span
};

}  // namespace kalfuse

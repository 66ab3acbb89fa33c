#include "kalfuse/calibration.hpp"

#include <cmath>
#include <utility>

namespace kalfuse {

void HistoricalDataset::add(Date date, Eigen::VectorXd state) {
    if (!dates_.empty()) {
        if (date <= dates_.back())
            throw DataError("historical dates must strictly increase (got " + format_date(date) +
                            " after " + format_date(dates_.back()) + ")");
        if (state.size() != states_.back().size())
            throw DimensionError("historical state length changed from " +
                                 std::to_string(states_.back().size()) + " to " +
                                 std::to_string(state.size()));
    }
    dates_.push_back(date);
    states_.push_back(std::move(state));
}

int find_most_similar(const Eigen::VectorXd& reference, const HistoricalDataset& dataset,
                      int window) {
    if (window < 1) throw DataError("window length must be at least 1");
    if (dataset.size() < window + 1)
        throw DataError("historical dataset has " + std::to_string(dataset.size()) +
                        " entries, need at least " + std::to_string(window + 1));
    const double ref_norm = reference.norm();
    if (ref_norm == 0.0) throw DataError("reference state has zero norm");
    int best = -1;
    double best_cos = -std::numeric_limits<double>::infinity();
    for (int l = 0; l + window < dataset.size(); ++l) {
        const Eigen::VectorXd& entry = dataset.state(l);
        if (entry.size() != reference.size())
            throw DimensionError("historical entries do not match the reference length");
        const double norm = entry.norm();
        if (norm == 0.0) continue;
        const double cos = reference.dot(entry) / (ref_norm * norm);
        if (cos > best_cos) {
            best_cos = cos;
            best = l;
        }
    }
    if (best < 0) throw DataError("no usable historical entry (all zero-norm)");
    return best;
}

ProcessNoise compute_q(const Eigen::VectorXd& reference, const HistoricalDataset& dataset,
                       int window, double epsilon2, double delta_days, VarianceDivisor divisor) {
    QCalibrator cal(dataset, window, epsilon2, divisor);
    cal.set_reference(reference);
    return cal.process_noise(delta_days);
}

QCalibrator::QCalibrator(const HistoricalDataset& dataset, int window, double epsilon2,
                         VarianceDivisor divisor)
    : dataset_(dataset), window_(window), epsilon2_(epsilon2), divisor_(divisor) {
    if (epsilon2 <= 0.0) throw DataError("epsilon2 must be positive");
    if (window < 1) throw DataError("window length must be at least 1");
}

void QCalibrator::set_reference(const Eigen::VectorXd& reference) {
    matched_ = find_most_similar(reference, dataset_, window_);
    span_ = double(dataset_.date(matched_ + window_) - dataset_.date(matched_));
    if (span_ <= 0.0)
        throw DataError("matched window spans zero days (duplicate archive dates)");

    // Two-pass per-entry variance over the window of window_+1 images.
    const Eigen::Index n = dataset_.state(matched_).size();
    const int count = window_ + 1;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < count; ++i) mean += dataset_.state(matched_ + i);
    mean /= double(count);
    Eigen::VectorXd ss = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < count; ++i)
        ss += (dataset_.state(matched_ + i) - mean).cwiseAbs2();
    const double div = divisor_ == VarianceDivisor::Unbiased ? double(count - 1) : double(count);
    variance_rate_ = ss / (div * span_);
}

ProcessNoise QCalibrator::process_noise(double delta_days) const {
    if (matched_ < 0) throw DataError("calibrator has no reference");
    if (delta_days <= 0.0) throw DataError("delta_days must be positive");
    ProcessNoise q;
    q.epsilon2 = epsilon2_;
    q.delta_days = delta_days;
    q.matched_index = matched_;
    q.window_span_days = span_;
    q.diag = (variance_rate_.array().max(epsilon2_) * delta_days).matrix();
    return q;
}

}  // namespace kalfuse

#include "kalfuse/ordering.hpp"

#include <utility>

namespace kalfuse {

StateOrdering::StateOrdering(int hr_height, int hr_width, int n_bands, int coarse_factor)
    : height_(hr_height), width_(hr_width), bands_(n_bands), factor_(coarse_factor) {
    if (hr_height <= 0 || hr_width <= 0 || n_bands <= 0 || coarse_factor <= 0)
        throw DimensionError("state ordering requires positive dimensions");
    if (hr_height % coarse_factor != 0 || hr_width % coarse_factor != 0)
        throw DimensionError("grid " + std::to_string(hr_height) + "x" +
                             std::to_string(hr_width) + " is not divisible by coarse factor " +
                             std::to_string(coarse_factor));
}

int StateOrdering::flat_index(int band, int row, int col) const {
    const int coarse = (row / factor_) * coarse_cols() + (col / factor_);
    const int within = (row % factor_) * factor_ + (col % factor_);
    return coarse * coarse_run_length() + within * bands_ + band;
}

StateOrdering::Site StateOrdering::locate(int flat) const {
    const int run = coarse_run_length();
    const int coarse = flat / run;
    const int rem = flat % run;
    const int within = rem / bands_;
    const int band = rem % bands_;
    const int row = (coarse / coarse_cols()) * factor_ + within / factor_;
    const int col = (coarse % coarse_cols()) * factor_ + within % factor_;
    return Site{band, row, col};
}

Eigen::VectorXd vectorize(const RasterImage& image, const StateOrdering& ordering) {
    if (image.height != ordering.height() || image.width != ordering.width() ||
        image.bands != ordering.bands())
        throw DimensionError("image shape " + std::to_string(image.height) + "x" +
                             std::to_string(image.width) + "x" + std::to_string(image.bands) +
                             " does not match ordering");
    Eigen::VectorXd state(ordering.state_size());
    for (int b = 0; b < image.bands; ++b)
        for (int r = 0; r < image.height; ++r)
            for (int c = 0; c < image.width; ++c)
                state[ordering.flat_index(b, r, c)] = image.at(b, r, c);
    return state;
}

RasterImage devectorize(const Eigen::VectorXd& state, const StateOrdering& ordering) {
    if (state.size() != ordering.state_size())
        throw DimensionError("state length " + std::to_string(state.size()) +
                             " does not match ordering size " +
                             std::to_string(ordering.state_size()));
    RasterImage image(ordering.height(), ordering.width(), ordering.bands());
    for (int b = 0; b < image.bands; ++b)
        for (int r = 0; r < image.height; ++r)
            for (int c = 0; c < image.width; ++c)
                image.at(b, r, c) = float(state[ordering.flat_index(b, r, c)]);
    return image;
}

MeasurementPermutation::MeasurementPermutation(std::string modality, int n_lr_pixels, int n_bands)
    : modality_(std::move(modality)) {
    if (n_lr_pixels <= 0 || n_bands <= 0)
        throw DimensionError("measurement permutation requires positive counts");
    forward_.resize(std::size_t(n_lr_pixels) * n_bands);
    for (int p = 0; p < n_lr_pixels; ++p)
        for (int b = 0; b < n_bands; ++b)
            forward_[std::size_t(p) * n_bands + b] = b * n_lr_pixels + p;
}

Eigen::VectorXd MeasurementPermutation::apply(const Eigen::VectorXd& band_major) const {
    if (band_major.size() != size())
        throw DimensionError("vector length does not match permutation size");
    Eigen::VectorXd out(size());
    for (int i = 0; i < size(); ++i) out[i] = band_major[forward_[i]];
    return out;
}

Eigen::VectorXd MeasurementPermutation::apply_inverse(const Eigen::VectorXd& pixel_major) const {
    if (pixel_major.size() != size())
        throw DimensionError("vector length does not match permutation size");
    Eigen::VectorXd out(size());
    for (int i = 0; i < size(); ++i) out[forward_[i]] = pixel_major[i];
    return out;
}

Eigen::MatrixXd MeasurementPermutation::apply_rows(const Eigen::MatrixXd& band_major) const {
    if (band_major.rows() != size())
        throw DimensionError("row count does not match permutation size");
    Eigen::MatrixXd out(band_major.rows(), band_major.cols());
    for (int i = 0; i < size(); ++i) out.row(i) = band_major.row(forward_[i]);
    return out;
}

MeasurementPermutation build_measurement_permutation(int n_lr_pixels, int n_bands,
                                                     std::string modality) {
    return MeasurementPermutation(std::move(modality), n_lr_pixels, n_bands);
}

}  // namespace kalfuse

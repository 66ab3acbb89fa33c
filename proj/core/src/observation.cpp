#include "kalfuse/observation.hpp"

#include <cmath>
#include <utility>

namespace kalfuse {

SpectralResponse SpectralResponse::identity(int bands) {
    return SpectralResponse{Eigen::MatrixXd::Identity(bands, bands)};
}

void SpectralResponse::validate() const {
    if (gains.rows() < 1 || gains.cols() < 1)
        throw DimensionError("spectral response must have at least one row and column");
    if (!gains.allFinite()) throw DataError("spectral response has non-finite entries");
    if ((gains.array() < 0.0).any()) throw DataError("spectral response has negative entries");
    for (Eigen::Index r = 0; r < gains.rows(); ++r)
        if (gains.row(r).isZero(0.0))
            throw DataError("spectral response row " + std::to_string(r) + " is all zero");
}

SpatialDegradation SpatialDegradation::identity() {
    SpatialDegradation s;
    s.kernel = Eigen::RowVectorXd::Ones(1);
    s.factor = 1;
    return s;
}

SpatialDegradation SpatialDegradation::uniform(int factor) {
    if (factor <= 0) throw DimensionError("decimation factor must be positive");
    SpatialDegradation s;
    s.factor = factor;
    s.kernel = Eigen::RowVectorXd::Constant(Eigen::Index(factor) * factor,
                                            1.0 / (double(factor) * factor));
    return s;
}

SpatialDegradation SpatialDegradation::explicit_weights(int factor,
                                                        const std::vector<double>& weights) {
    SpatialDegradation s;
    s.factor = factor;
    s.kernel = Eigen::Map<const Eigen::RowVectorXd>(weights.data(), Eigen::Index(weights.size()));
    s.validate();
    return s;
}

void SpatialDegradation::validate() const {
    if (factor <= 0) throw DimensionError("decimation factor must be positive");
    if (kernel.size() != Eigen::Index(factor) * factor)
        throw DimensionError("kernel has " + std::to_string(kernel.size()) +
                             " weights, expected " + std::to_string(factor * factor));
    if (!kernel.allFinite()) throw DataError("kernel has non-finite weights");
    if (std::abs(kernel.sum() - 1.0) > 1e-12)
        throw DataError("kernel weights must sum to 1 (got " + std::to_string(kernel.sum()) + ")");
}

OutlierMask OutlierMask::all(int n_lr_pixels) {
    OutlierMask m;
    m.kept.resize(n_lr_pixels);
    for (int i = 0; i < n_lr_pixels; ++i) m.kept[i] = i;
    return m;
}

void OutlierMask::validate(int n_lr_pixels) const {
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (kept[i] < 0 || kept[i] >= n_lr_pixels)
            throw DataError("mask index " + std::to_string(kept[i]) + " outside " +
                            std::to_string(n_lr_pixels) + " LR pixels");
        if (i > 0 && kept[i] <= kept[i - 1])
            throw DataError("mask indices must be strictly increasing");
    }
}

OutlierMask mask_from_qa(const std::vector<int>& qa_codes) {
    OutlierMask m;
    for (std::size_t i = 0; i < qa_codes.size(); ++i)
        if (qa_codes[i] == 0) m.kept.push_back(int(i));
    return m;
}

Eigen::MatrixXd build_pixel_block(const SpectralResponse& spectral,
                                  const SpatialDegradation& spatial) {
    spectral.validate();
    spatial.validate();
    const Eigen::Index lm = spectral.gains.rows();
    const Eigen::Index lh = spectral.gains.cols();
    const Eigen::Index taps = spatial.kernel.size();
    Eigen::MatrixXd block(lm, taps * lh);
    for (Eigen::Index i = 0; i < taps; ++i)
        block.middleCols(i * lh, lh) = spatial.kernel[i] * spectral.gains;
    return block;
}

std::vector<Eigen::MatrixXd> build_noise_covariance(int n_kept,
                                                    const Eigen::VectorXd& per_band_variances) {
    if ((per_band_variances.array() <= 0.0).any())
        throw DataError("noise variances must be positive");
    std::vector<Eigen::MatrixXd> blocks;
    blocks.reserve(n_kept);
    const Eigen::MatrixXd block = per_band_variances.asDiagonal();
    for (int i = 0; i < n_kept; ++i) blocks.push_back(block);
    return blocks;
}

ObservationOperator::ObservationOperator(std::string modality, const SpectralResponse& spectral,
                                         const SpatialDegradation& spatial, OutlierMask mask,
                                         const Eigen::VectorXd& per_band_variances,
                                         const StateOrdering& ordering)
    : modality_(std::move(modality)),
      factor_(spatial.factor),
      mask_(std::move(mask)),
      state_size_(ordering.state_size()) {
    if (spectral.gains.cols() != ordering.bands())
        throw DimensionError("spectral response expects " + std::to_string(spectral.gains.cols()) +
                             " HR bands, state has " + std::to_string(ordering.bands()));
    // Contiguity of each LR pixel's state run requires the footprint to be a
    // single HR pixel or a whole coarse pixel.
    if (factor_ != 1 && factor_ != ordering.coarse_factor())
        throw DimensionError("modality factor " + std::to_string(factor_) +
                             " must be 1 or the coarse factor " +
                             std::to_string(ordering.coarse_factor()));
    if (per_band_variances.size() != spectral.gains.rows())
        throw DimensionError("expected one noise variance per measured band");
    block_ = build_pixel_block(spectral, spatial);
    lr_rows_ = ordering.height() / factor_;
    lr_cols_ = ordering.width() / factor_;
    mask_.validate(lr_rows_ * lr_cols_);
    noise_ = build_noise_covariance(mask_.n_kept(), per_band_variances);
    run_start_.reserve(mask_.kept.size());
    for (int p : mask_.kept) {
        const int row = (p / lr_cols_) * factor_;
        const int col = (p % lr_cols_) * factor_;
        run_start_.push_back(ordering.flat_index(0, row, col));
    }
}

void ObservationOperator::set_noise_blocks(std::vector<Eigen::MatrixXd> blocks) {
    if (int(blocks.size()) != n_kept())
        throw DimensionError("expected one noise block per kept LR pixel");
    for (const auto& b : blocks) {
        if (b.rows() != measured_bands() || b.cols() != measured_bands())
            throw DimensionError("noise block has wrong shape");
        if (!b.isApprox(b.transpose(), 1e-12)) throw DataError("noise block is not symmetric");
        if (Eigen::LLT<Eigen::MatrixXd>(b).info() != Eigen::Success)
            throw DataError("noise block is not positive definite");
    }
    noise_ = std::move(blocks);
}

Eigen::VectorXd ObservationOperator::apply(const Eigen::VectorXd& state) const {
    if (state.size() != state_size_)
        throw DimensionError("state length " + std::to_string(state.size()) + " does not match " +
                             std::to_string(state_size_));
    Eigen::VectorXd out(measurement_size());
    const int lm = measured_bands();
    for (int i = 0; i < n_kept(); ++i)
        out.segment(Eigen::Index(i) * lm, lm) =
            block_ * state.segment(run_start_[i], run_length());
    return out;
}

SpectralResponse ModalitySpec::spectral(int hr_bands) const {
    if (gains.size() == 0) return SpectralResponse::identity(hr_bands);
    SpectralResponse s{gains};
    s.validate();
    if (s.hr_bands() != hr_bands)
        throw DimensionError("modality '" + name + "' gains expect " +
                             std::to_string(s.hr_bands()) + " HR bands, state has " +
                             std::to_string(hr_bands));
    return s;
}

SpatialDegradation ModalitySpec::spatial() const {
    if (kernel_weights.empty()) return SpatialDegradation::uniform(factor);
    return SpatialDegradation::explicit_weights(factor, kernel_weights);
}

ObservationOperator make_operator(const ModalitySpec& spec, OutlierMask mask,
                                  const StateOrdering& ordering) {
    const SpectralResponse spectral = spec.spectral(ordering.bands());
    Eigen::VectorXd variances = spec.noise_variance;
    if (variances.size() == 0)
        throw DataError("modality '" + spec.name + "' has no noise variances");
    if (variances.size() == 1 && spectral.measured_bands() > 1)
        variances = Eigen::VectorXd::Constant(spectral.measured_bands(), variances[0]);
    return ObservationOperator(spec.name, spectral, spec.spatial(), std::move(mask), variances,
                               ordering);
}

}  // namespace kalfuse

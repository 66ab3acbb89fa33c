#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kalfuse/ordering.hpp"

namespace kalfuse {

/// Spectral transformation: row ℓ maps the high-resolution bands onto
/// measured band ℓ of one modality.
struct SpectralResponse {
    Eigen::MatrixXd gains;  // L_m x L_H, nonnegative, no all-zero row

    static SpectralResponse identity(int bands);
    void validate() const;
    int measured_bands() const { return int(gains.rows()); }
    int hr_bands() const { return int(gains.cols()); }
};

/// Band-wise spatial degradation confined to one LR pixel footprint: weights
/// over the factor x factor HR pixels inside the footprint, row-major,
/// summing to 1, followed by decimation.
struct SpatialDegradation {
    Eigen::RowVectorXd kernel;  // factor^2 weights
    int factor = 1;             // HR pixels per LR pixel side

    static SpatialDegradation identity();
    static SpatialDegradation uniform(int factor);
    static SpatialDegradation explicit_weights(int factor, const std::vector<double>& weights);
    void validate() const;
};

/// Row selection over the LR pixels of one modality at one instant. Empty
/// kept list means the modality is unobserved.
struct OutlierMask {
    std::vector<int> kept;  // strictly increasing LR pixel indices

    static OutlierMask all(int n_lr_pixels);
    static OutlierMask none() { return OutlierMask{}; }
    int n_kept() const { return int(kept.size()); }
    bool empty() const { return kept.empty(); }
    void validate(int n_lr_pixels) const;
};

/// Keeps exactly the pixels whose QA code equals 0 (ideal quality).
OutlierMask mask_from_qa(const std::vector<int>& qa_codes);

/// Kronecker product of the kernel row and the spectral gains: the
/// L_m x (factor^2 * L_H) block mapping one LR pixel's slice of the state to
/// that pixel's measured bands.
Eigen::MatrixXd build_pixel_block(const SpectralResponse& spectral,
                                  const SpatialDegradation& spatial);

/// One diagonal L_m x L_m noise block per kept LR pixel.
std::vector<Eigen::MatrixXd> build_noise_covariance(int n_kept,
                                                    const Eigen::VectorXd& per_band_variances);

/// Linear observation operator of one modality at one instant, in the
/// pixel-major layout (bands of each kept LR pixel contiguous). Each kept LR
/// pixel reads one contiguous run of the state and contributes L_m
/// measurement entries.
class ObservationOperator {
public:
    ObservationOperator(std::string modality, const SpectralResponse& spectral,
                        const SpatialDegradation& spatial, OutlierMask mask,
                        const Eigen::VectorXd& per_band_variances, const StateOrdering& ordering);

    const std::string& modality() const { return modality_; }
    int factor() const { return factor_; }
    const Eigen::MatrixXd& pixel_block() const { return block_; }
    const OutlierMask& mask() const { return mask_; }
    const std::vector<Eigen::MatrixXd>& noise_blocks() const { return noise_; }
    /// Replaces the default diagonal noise blocks with explicit SPD blocks.
    void set_noise_blocks(std::vector<Eigen::MatrixXd> blocks);

    int measured_bands() const { return int(block_.rows()); }
    /// State entries read per LR pixel: factor^2 * L_H.
    int run_length() const { return int(block_.cols()); }
    /// First state index of kept pixel i's run.
    int run_start(int kept_index) const { return run_start_[kept_index]; }
    int state_size() const { return state_size_; }
    int n_kept() const { return mask_.n_kept(); }
    int measurement_size() const { return n_kept() * measured_bands(); }
    int lr_pixels() const { return lr_rows_ * lr_cols_; }

    /// Noiseless forward application; returns the stacked pixel-major
    /// measurement of length measurement_size().
    Eigen::VectorXd apply(const Eigen::VectorXd& state) const;

private:
    std::string modality_;
    int factor_;
    Eigen::MatrixXd block_;
    OutlierMask mask_;
    std::vector<Eigen::MatrixXd> noise_;
    std::vector<int> run_start_;
    int state_size_;
    int lr_rows_, lr_cols_;
};

enum class ModalityRole { HighRes, LowRes };

/// Configuration block describing one instrument: spatial factor, kernel,
/// spectral gains and per-band noise variance.
struct ModalitySpec {
    std::string name;
    ModalityRole role = ModalityRole::HighRes;
    int factor = 1;
    std::vector<double> kernel_weights;  // empty = uniform kernel
    Eigen::MatrixXd gains;               // empty = identity over the HR bands
    Eigen::VectorXd noise_variance;      // per measured band

    int measured_bands(int hr_bands) const {
        return gains.size() == 0 ? hr_bands : int(gains.rows());
    }
    SpectralResponse spectral(int hr_bands) const;
    SpatialDegradation spatial() const;
};

ObservationOperator make_operator(const ModalitySpec& spec, OutlierMask mask,
                                  const StateOrdering& ordering);

}  // namespace kalfuse

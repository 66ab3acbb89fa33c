#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kalfuse/raster.hpp"

namespace kalfuse {

/// Bijection between image sites (band, row, col) and flat state indices.
///
/// Layout, outermost to innermost: coarse pixels in row-major order over the
/// coarse grid, then the HR pixels inside each coarse pixel in row-major
/// order, then bands in ascending order. Bands of one HR pixel are therefore
/// contiguous, and the HR pixels inside one coarse pixel occupy one
/// contiguous run of coarse_run_length() indices.
class StateOrdering {
public:
    /// Throws DimensionError when the grid is not divisible by the factor.
    StateOrdering(int hr_height, int hr_width, int n_bands, int coarse_factor);

    int height() const { return height_; }
    int width() const { return width_; }
    int bands() const { return bands_; }
    int coarse_factor() const { return factor_; }

    int n_hr_pixels() const { return height_ * width_; }
    int state_size() const { return n_hr_pixels() * bands_; }

    int coarse_rows() const { return height_ / factor_; }
    int coarse_cols() const { return width_ / factor_; }
    int n_coarse() const { return coarse_rows() * coarse_cols(); }
    /// State entries per coarse pixel: factor^2 * bands.
    int coarse_run_length() const { return factor_ * factor_ * bands_; }

    int flat_index(int band, int row, int col) const;

    struct Site {
        int band, row, col;
    };
    Site locate(int flat) const;

private:
    int height_, width_, bands_, factor_;
};

/// Copies image samples into a state vector in ι-ordering.
Eigen::VectorXd vectorize(const RasterImage& image, const StateOrdering& ordering);

/// Inverse of vectorize. The result carries no validity mask; date and
/// modality are left for the caller.
RasterImage devectorize(const Eigen::VectorXd& state, const StateOrdering& ordering);

/// Permutation between the band-major stacked measurement (all pixels of band
/// 0, then band 1, ...) and the pixel-major layout where the bands of each LR
/// pixel are contiguous.
class MeasurementPermutation {
public:
    MeasurementPermutation(std::string modality, int n_lr_pixels, int n_bands);

    const std::string& modality() const { return modality_; }
    int size() const { return int(forward_.size()); }
    /// forward()[i] is the band-major index feeding pixel-major slot i.
    const std::vector<int>& forward() const { return forward_; }

    /// Band-major -> pixel-major.
    Eigen::VectorXd apply(const Eigen::VectorXd& band_major) const;
    /// Pixel-major -> band-major.
    Eigen::VectorXd apply_inverse(const Eigen::VectorXd& pixel_major) const;

    /// Row-permutes a matrix: out.row(i) = band_major.row(forward()[i]).
    Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& band_major) const;

private:
    std::string modality_;
    std::vector<int> forward_;
};

MeasurementPermutation build_measurement_permutation(int n_lr_pixels, int n_bands,
                                                     std::string modality = {});

}  // namespace kalfuse

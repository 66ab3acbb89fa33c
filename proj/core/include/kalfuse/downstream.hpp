#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kalfuse/raster.hpp"

namespace kalfuse {

/// Per-pixel binary classification: 1 = land, 0 = water.
struct WaterMap {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> labels;
    Date date{};

    std::size_t n_pixels() const { return std::size_t(height) * width; }
    double water_fraction() const;
};

struct SamStats {
    double mean_deg = 0.0;
    std::size_t pixels_used = 0;
    std::size_t pixels_excluded = 0;  // zero-norm in either image
};

/// Mean per-pixel spectral angle, in degrees. Pixels with zero norm in either
/// image are excluded and counted.
SamStats spectral_angle_stats(const RasterImage& reference, const RasterImage& estimate);
double sam_degrees(const RasterImage& reference, const RasterImage& estimate);

using CentroidPair = std::array<Eigen::VectorXd, 2>;

/// Two-class Lloyd clustering over band vectors. Deterministic: the initial
/// centroids are the pixels ranked at the 10th and 90th percentile of the
/// given band (after a permutation-invariant lexicographic sort), and runs to
/// an assignment fixed point or 100 iterations.
CentroidPair kmeans2(const std::vector<Eigen::VectorXd>& pixels, int nir_band);

/// Band vectors of every pixel, in raster order.
std::vector<Eigen::VectorXd> pixel_vectors(const RasterImage& image);

/// Nearest-centroid labeling; the centroid with the lower NIR component is
/// water, ties label land.
WaterMap classify_water(const RasterImage& image, const CentroidPair& centroids, int nir_band);

/// Percentage of differing pixels, in [0, 100].
double misclassification_pct(const WaterMap& map, const WaterMap& truth);

std::vector<std::pair<Date, double>> water_fraction_series(const std::vector<WaterMap>& maps);

struct EvaluationRow {
    Date date{};
    std::optional<double> sam_deg;
    std::optional<double> miscls_pct;
    double water_fraction = 0.0;
    bool held_out = false;             // truth exists and was not assimilated
    std::size_t sam_excluded = 0;      // zero-norm pixels skipped by the SAM
};

struct EvaluationReport {
    std::vector<EvaluationRow> rows;

    double average_sam_deg(bool held_out_only) const;
    double average_miscls_pct(bool held_out_only) const;
};

/// Writes `date,sam_deg,miscls_pct,water_fraction` rows; metric cells are
/// empty on dates without truth.
void write_report_csv(const std::filesystem::path& path, const EvaluationReport& report);

}  // namespace kalfuse

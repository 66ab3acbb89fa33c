#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kalfuse/observation.hpp"
#include "kalfuse/raster.hpp"

namespace kalfuse {

/// Piecewise-linear curve over normalized time [0, 1].
struct AreaCurve {
    std::vector<std::pair<double, double>> points;  // (t, fraction), t ascending

    double at(double t) const;
    void validate() const;
};

enum class WaterShape {
    Disk,     // center-out region
    Sweep,    // raster-order front moving down the grid
    Channel,  // serpentine strip filling along its length
};

/// Synthetic reservoir scene: a water region whose area follows a curve over
/// a static textured land/water reflectance field.
struct SceneSpec {
    int height = 81;
    int width = 81;
    WaterShape shape = WaterShape::Disk;
    int channel_width = 18;  // strip width for the Channel shape, in pixels
    Eigen::VectorXd water_levels;  // reflectance per band
    Eigen::VectorXd land_levels;
    double texture_sigma = 0.01;
    double s_max = 1.0;
    AreaCurve area;
    std::uint64_t seed = 0;

    int bands() const { return int(land_levels.size()); }
    void validate() const;
};

/// Deterministic truth frames: water pixels are the first round(a * N)
/// entries of a fixed center-out pixel ranking, so each frame's water
/// fraction matches the curve to within one pixel. The per-pixel texture
/// field is drawn once from the seed and shared by all frames.
std::vector<RasterImage> generate_truth(const SceneSpec& spec, const std::vector<Date>& dates);

/// True water masks for the same frames (1 = land, 0 = water).
std::vector<std::vector<std::uint8_t>> truth_water_labels(const SceneSpec& spec,
                                                          const std::vector<Date>& dates);

/// One simulated acquisition of one modality.
struct Acquisition {
    Date date{};
    RasterImage image;     // modality grid, measured bands
    std::vector<int> qa;   // per LR pixel, 0 = ideal
};

/// Applies the modality's forward operator to each scheduled truth frame and
/// adds Gaussian noise at the modality's per-band variance. QA outages mark
/// random LR pixels with a nonzero code; their values are left in place.
std::vector<Acquisition> acquire(const std::vector<RasterImage>& truth,
                                 const std::vector<Date>& truth_dates, const ModalitySpec& spec,
                                 const std::vector<Date>& schedule, double outage_rate,
                                 const StateOrdering& ordering, std::mt19937_64& rng);

}  // namespace kalfuse

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kalfuse/calibration.hpp"
#include "kalfuse/covariance.hpp"
#include "kalfuse/observation.hpp"
#include "kalfuse/synth.hpp"

namespace kalfuse {

enum class SmaxPolicy { Historical, Window, Fixed };

struct ClassifySettings {
    int nir_band = 1;
    bool centroids_per_date = false;  // default: fit on the initial HR image, reuse
};

/// One run of the fusion pipeline, parsed from a flat-section key-value file.
struct RunConfig {
    std::filesystem::path observations_manifest;
    std::filesystem::path historical_manifest;
    std::filesystem::path out_dir = "out";
    std::vector<ModalitySpec> modalities;
    CovarianceKind structure = CovarianceKind::PerHrPixel;
    double epsilon2 = 1e-5;
    int window = 1;
    VarianceDivisor divisor = VarianceDivisor::Unbiased;
    SmaxPolicy smax_policy = SmaxPolicy::Historical;
    double smax_fixed = 1.0;
    double p0_scale = 1e-10;
    bool smoother = true;
    std::uint64_t seed = 0;
    ClassifySettings classify;

    void validate() const;
    const ModalitySpec* find_modality(const std::string& name) const;
    /// Exactly one modality must have the high-resolution role.
    const ModalitySpec& high_res_modality() const;
    /// Update order within an instant: high-res first, then low-res, ties by
    /// name.
    std::vector<const ModalitySpec*> canonical_order() const;
};

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const RunConfig& config);

/// Synthetic dataset description: scene, acquisition schedule, historical
/// archive layout and the modalities to simulate.
struct SynthConfig {
    SceneSpec scene;
    Date start{};
    int instants = 17;
    int spacing_days = 5;
    std::vector<int> hr_instants;  // default: first and last
    double outage_rate = 0.0;
    Date hist_start{};
    int hist_frames = 5;
    int hist_spacing_days = 30;
    AreaCurve hist_area;  // empty: reuse the scene curve
    std::vector<ModalitySpec> modalities;
    RunConfig run_defaults;  // structure etc. for the emitted run config

    void validate() const;
    std::vector<Date> schedule_dates() const;
    std::vector<Date> historical_dates() const;
    std::vector<int> resolved_hr_instants() const;
};

SynthConfig load_synth_config(const std::filesystem::path& path);

}  // namespace kalfuse

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kalfuse/config.hpp"
#include "kalfuse/fusion.hpp"

namespace kalfuse {

/// One modality's observation at one instant.
struct ObservationRecord {
    const ModalitySpec* spec = nullptr;
    RasterImage image;
    std::vector<int> qa;  // per LR pixel, 0 = ideal
};

/// All observations sharing one date, in canonical modality order.
struct InstantData {
    Date date{};
    std::vector<ObservationRecord> observations;

    const ObservationRecord* find(const std::string& modality) const;
};

/// Loaded and validated pipeline inputs.
struct PipelineInputs {
    StateOrdering ordering;
    std::vector<InstantData> instants;
    HistoricalDataset historical;
    double s_max = 1.0;
};

PipelineInputs load_inputs(const RunConfig& config);

/// Manifest row that was not assimilated, with the reason.
struct DroppedRow {
    Date date{};
    std::string modality;
    std::string reason;
};

struct FusionOptions {
    BeliefObserver observer;
};

struct FusionResult {
    FusionTimeline timeline;
    StateOrdering ordering;
    double s_max = 1.0;
    std::vector<DroppedRow> dropped;
};

/// Runs the full filter pass (and the smoother when enabled): per instant,
/// calibrate the process noise from the historical archive, predict,
/// sequentially update with each observed modality, and clamp to [0, s_max].
FusionResult run_fusion(const RunConfig& config, const FusionOptions& options = {});

/// Per-instant calibration trace (no filtering), mirroring the reference
/// schedule the filter uses.
struct CalibrationRecord {
    int k = 0;
    Date date{};
    ProcessNoise noise;
};
std::vector<CalibrationRecord> calibrate_trace(const PipelineInputs& inputs,
                                               const RunConfig& config);

/// Writes fused rasters, covariance-diagonal rasters, manifests, the run log
/// and the drop list into config.out_dir. Refuses to overwrite existing
/// outputs unless force is set.
void write_outputs(const FusionResult& result, const RunConfig& config, bool force);

}  // namespace kalfuse

#pragma once

#include <filesystem>

#include "kalfuse/config.hpp"

namespace kalfuse {

struct SynthArtifacts {
    std::filesystem::path truth_manifest;
    std::filesystem::path observations_manifest;
    std::filesystem::path historical_manifest;
    std::filesystem::path run_config;
    int truth_frames = 0;
    int observations = 0;
    int historical_frames = 0;
};

/// Writes the synthetic dataset (truth, observations with QA masks,
/// historical archive, manifests and a ready-to-fuse run config) under `out`.
SynthArtifacts write_synth_dataset(const SynthConfig& config,
                                   const std::filesystem::path& out);

}  // namespace kalfuse

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace kalfuse::cli {

/// Shared command-line overrides applied on top of the config file.
struct CommonArgs {
    std::filesystem::path config;
    std::optional<std::filesystem::path> out;
    std::optional<std::string> structure;
    std::optional<bool> smoother;
    std::optional<std::uint64_t> seed;
    bool force = false;
};

int cmd_synth(const CommonArgs& args);
int cmd_fuse(const CommonArgs& args);
int cmd_evaluate(const CommonArgs& args, const std::filesystem::path& truth_manifest);
int cmd_classify(const CommonArgs& args);
int cmd_calibrate_q(const CommonArgs& args);

}  // namespace kalfuse::cli

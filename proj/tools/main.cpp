#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "kalfuse/errors.hpp"

namespace {

// Exit codes: 0 success, 1 unexpected, 2 config error, 3 data error,
// 4 numerical failure.
int run_guarded(const std::function<int()>& fn) {
    try {
        return fn();
    } catch (const kalfuse::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const kalfuse::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const kalfuse::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

void add_common(CLI::App* cmd, kalfuse::cli::CommonArgs& args, bool config_required = true) {
    auto* config = cmd->add_option("--config", args.config, "Configuration file");
    if (config_required) config->required();
    cmd->add_option_function<std::string>(
        "--out", [&args](const std::string& v) { args.out = v; }, "Output directory override");
    cmd->add_option_function<std::string>(
        "--structure", [&args](const std::string& v) { args.structure = v; },
        "Covariance structure override: diag|pixel|coarse|dense");
    cmd->add_flag_function(
        "--smoother,!--no-smoother", [&args](std::int64_t v) { args.smoother = v > 0; },
        "Enable or disable the smoothing pass");
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&args](std::uint64_t v) { args.seed = v; }, "Seed override");
    cmd->add_flag("--force", args.force, "Overwrite existing outputs");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-resolution multiband image fusion via constrained Kalman filtering"};
    app.require_subcommand(1);

    kalfuse::cli::CommonArgs synth_args, fuse_args, eval_args, classify_args, calib_args;
    std::filesystem::path truth_manifest;

    CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    add_common(synth, synth_args);

    CLI::App* fuse = app.add_subcommand("fuse", "Run the fusion pipeline");
    add_common(fuse, fuse_args);

    CLI::App* evaluate = app.add_subcommand("evaluate", "Score fused outputs against truth");
    add_common(evaluate, eval_args);
    evaluate->add_option("--truth", truth_manifest, "Truth manifest CSV")->required();

    CLI::App* classify = app.add_subcommand("classify", "Write water maps for fused outputs");
    add_common(classify, classify_args);

    CLI::App* calibrate = app.add_subcommand("calibrate-q", "Dump process-noise diagnostics");
    add_common(calibrate, calib_args);

    CLI11_PARSE(app, argc, argv);

    if (synth->parsed()) return run_guarded([&] { return kalfuse::cli::cmd_synth(synth_args); });
    if (fuse->parsed()) return run_guarded([&] { return kalfuse::cli::cmd_fuse(fuse_args); });
    if (evaluate->parsed())
        return run_guarded([&] { return kalfuse::cli::cmd_evaluate(eval_args, truth_manifest); });
    if (classify->parsed())
        return run_guarded([&] { return kalfuse::cli::cmd_classify(classify_args); });
    if (calibrate->parsed())
        return run_guarded([&] { return kalfuse::cli::cmd_calibrate_q(calib_args); });
    return 1;
}

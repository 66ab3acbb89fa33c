#include "kalfuse/dataset.hpp"

#include <algorithm>
#include <cstdio>

#include "kalfuse/ordering.hpp"

namespace kalfuse {

namespace fs = std::filesystem;

namespace {
std::string frame_name(const std::string& stem, int k) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s_%04d.frst", stem.c_str(), k);
    return buf;
}
}  // namespace

SynthArtifacts write_synth_dataset(const SynthConfig& cfg, const fs::path& out) {
    cfg.validate();
    fs::create_directories(out / "truth");
    fs::create_directories(out / "obs");
    fs::create_directories(out / "hist");

    int coarse = 1;
    for (const auto& m : cfg.modalities) coarse = std::max(coarse, m.factor);
    const StateOrdering ordering(cfg.scene.height, cfg.scene.width, cfg.scene.bands(), coarse);

    const std::vector<Date> dates = cfg.schedule_dates();
    const std::vector<Date> hist_dates = cfg.historical_dates();
    const auto truth = generate_truth(cfg.scene, dates);
    SceneSpec hist_scene = cfg.scene;
    if (!cfg.hist_area.points.empty()) hist_scene.area = cfg.hist_area;
    const auto hist_truth = generate_truth(hist_scene, hist_dates);
    const std::vector<std::string> seed_note = {"seed: " + std::to_string(cfg.scene.seed)};

    SynthArtifacts artifacts;

    std::vector<ManifestRow> truth_rows;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        const std::string name = frame_name("truth/truth", int(k));
        write_frst(out / name, truth[k]);
        truth_rows.push_back(ManifestRow{dates[k], "truth", name, {}});
    }
    artifacts.truth_manifest = out / "truth_manifest.csv";
    write_manifest(artifacts.truth_manifest, truth_rows, seed_note);
    artifacts.truth_frames = int(truth.size());

    const ModalitySpec* hr = nullptr;
    for (const auto& m : cfg.modalities)
        if (m.role == ModalityRole::HighRes) hr = &m;

    // Historical archive: noiseless high-resolution frames of the same scene.
    std::vector<ManifestRow> hist_rows;
    for (std::size_t k = 0; k < hist_truth.size(); ++k) {
        RasterImage frame = hist_truth[k];
        frame.modality = hr->name;
        const std::string name = frame_name("hist/" + hr->name, int(k));
        write_frst(out / name, frame);
        hist_rows.push_back(ManifestRow{hist_dates[k], hr->name, name, {}});
    }
    artifacts.historical_manifest = out / "historical_manifest.csv";
    write_manifest(artifacts.historical_manifest, hist_rows, seed_note);
    artifacts.historical_frames = int(hist_rows.size());

    // Acquisition noise stream derives from the scene seed.
    std::mt19937_64 rng(cfg.scene.seed + 1);
    const auto hr_instants = cfg.resolved_hr_instants();
    std::vector<ManifestRow> obs_rows;
    for (const auto& spec : cfg.modalities) {
        std::vector<Date> schedule;
        if (spec.role == ModalityRole::HighRes) {
            for (int k : hr_instants) schedule.push_back(dates[k]);
        } else {
            // Low-resolution revisit: every instant after the first.
            for (std::size_t k = 1; k < dates.size(); ++k) schedule.push_back(dates[k]);
        }
        const auto acqs = acquire(truth, dates, spec, schedule, cfg.outage_rate, ordering, rng);
        for (std::size_t k = 0; k < acqs.size(); ++k) {
            const std::string name = frame_name("obs/" + spec.name, int(k));
            write_frst(out / name, acqs[k].image);
            std::string mask_name;
            const bool any_outage =
                std::any_of(acqs[k].qa.begin(), acqs[k].qa.end(), [](int c) { return c != 0; });
            if (any_outage) {
                mask_name = frame_name("obs/" + spec.name + "_qa", int(k));
                RasterImage mask(acqs[k].image.height, acqs[k].image.width, 1);
                mask.modality = "qa";
                mask.date = acqs[k].date;
                for (std::size_t i = 0; i < acqs[k].qa.size(); ++i)
                    mask.values[i] = float(acqs[k].qa[i]);
                write_frst(out / mask_name, mask);
            }
            obs_rows.push_back(ManifestRow{acqs[k].date, spec.name, name, mask_name});
        }
    }
    std::sort(obs_rows.begin(), obs_rows.end(), [](const ManifestRow& a, const ManifestRow& b) {
        return a.date != b.date ? a.date < b.date : a.modality < b.modality;
    });
    artifacts.observations_manifest = out / "observations_manifest.csv";
    write_manifest(artifacts.observations_manifest, obs_rows, seed_note);
    artifacts.observations = int(obs_rows.size());

    RunConfig run = cfg.run_defaults;
    run.observations_manifest = "observations_manifest.csv";
    run.historical_manifest = "historical_manifest.csv";
    run.out_dir = "out";
    run.modalities = cfg.modalities;
    run.seed = cfg.scene.seed;
    artifacts.run_config = out / "run_config.ini";
    save_run_config(artifacts.run_config, run);
    return artifacts;
}

}  // namespace kalfuse

#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "kalfuse/dataset.hpp"
#include "kalfuse/downstream.hpp"
#include "kalfuse/pipeline.hpp"

namespace kalfuse::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string frame_name(const std::string& stem, int k) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s_%04d.frst", stem.c_str(), k);
    return buf;
}

RunConfig apply_overrides(const CommonArgs& args) {
    RunConfig cfg = load_run_config(args.config);
    if (args.out) cfg.out_dir = *args.out;
    if (args.structure) cfg.structure = parse_covariance_kind(*args.structure);
    if (args.smoother) cfg.smoother = *args.smoother;
    if (args.seed) cfg.seed = *args.seed;
    return cfg;
}

void refuse_existing(const fs::path& target, bool force) {
    if (!force && fs::exists(target))
        throw ConfigError("output '" + target.string() + "' exists (pass --force to overwrite)");
}

/// Dates at which the high-resolution modality was assimilated, parsed from
/// the fuse run log.
std::set<Date> hr_dates_from_log(const fs::path& log_path, const std::string& hr_name) {
    std::ifstream in(log_path);
    if (!in) throw DataError("run log '" + log_path.string() + "' not found; run fuse first");
    std::set<Date> dates;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string k, date, modalities;
        std::getline(ss, k, ',');
        std::getline(ss, date, ',');
        std::getline(ss, modalities, ',');
        std::stringstream ms(modalities);
        std::string name;
        while (std::getline(ms, name, '|'))
            if (name == hr_name) dates.insert(parse_date(date));
    }
    return dates;
}

struct Series {
    std::string name;  // "fused" | "smoothed"
    std::vector<RasterImage> frames;
};

std::vector<Series> load_series(const RunConfig& cfg) {
    std::vector<Series> out;
    for (const char* name : {"fused", "smoothed"}) {
        const fs::path manifest = cfg.out_dir / (std::string(name) + "_manifest.csv");
        if (!fs::exists(manifest)) continue;
        Series series;
        series.name = name;
        for (const auto& row : read_manifest(manifest)) {
            RasterImage image = read_frst(row.path);
            image.date = row.date;
            image.modality = row.modality;
            series.frames.push_back(std::move(image));
        }
        out.push_back(std::move(series));
    }
    if (out.empty())
        throw DataError("no fused outputs under '" + cfg.out_dir.string() + "'; run fuse first");
    return out;
}

/// Centroids fitted on the earliest high-resolution observation.
CentroidPair initial_centroids(const RunConfig& cfg) {
    const auto rows = read_manifest(cfg.observations_manifest);
    const std::string hr = cfg.high_res_modality().name;
    const ManifestRow* first = nullptr;
    for (const auto& row : rows)
        if (row.modality == hr && (first == nullptr || row.date < first->date)) first = &row;
    if (first == nullptr) throw DataError("observations manifest has no high-resolution rows");
    return kmeans2(pixel_vectors(read_frst(first->path)), cfg.classify.nir_band);
}

WaterMap map_for(const RasterImage& image, const RunConfig& cfg,
                 const std::optional<CentroidPair>& shared) {
    const CentroidPair centroids =
        shared ? *shared : kmeans2(pixel_vectors(image), cfg.classify.nir_band);
    return classify_water(image, centroids, cfg.classify.nir_band);
}

}  // namespace

int cmd_fuse(const CommonArgs& args) {
    const RunConfig cfg = apply_overrides(args);
    const FusionResult result = run_fusion(cfg);
    write_outputs(result, cfg, args.force);
    std::cout << "fused " << result.timeline.size() << " instants into '"
              << cfg.out_dir.string() << "'"
              << (result.timeline.has_smoothed() ? " (with smoothed pass)" : "") << "\n";
    return 0;
}

int cmd_evaluate(const CommonArgs& args, const fs::path& truth_manifest) {
    const RunConfig cfg = apply_overrides(args);
    const auto series_list = load_series(cfg);
    const auto hr_dates = hr_dates_from_log(cfg.out_dir / "log.csv", cfg.high_res_modality().name);

    std::map<Date, RasterImage> truth;
    for (const auto& row : read_manifest(truth_manifest)) {
        RasterImage image = read_frst(row.path);
        image.date = row.date;
        truth.emplace(row.date, std::move(image));
    }

    const std::optional<CentroidPair> shared =
        cfg.classify.centroids_per_date ? std::nullopt
                                        : std::optional<CentroidPair>(initial_centroids(cfg));

    for (const auto& series : series_list) {
        EvaluationReport report;
        for (const auto& frame : series.frames) {
            EvaluationRow row;
            row.date = frame.date;
            const WaterMap est_map = map_for(frame, cfg, shared);
            row.water_fraction = est_map.water_fraction();
            if (auto it = truth.find(frame.date); it != truth.end()) {
                const SamStats stats = spectral_angle_stats(it->second, frame);
                row.sam_deg = stats.mean_deg;
                row.sam_excluded = stats.pixels_excluded;
                const WaterMap truth_map = map_for(it->second, cfg, shared);
                row.miscls_pct = misclassification_pct(est_map, truth_map);
                row.held_out = hr_dates.count(frame.date) == 0;
            }
            report.rows.push_back(row);
        }
        const fs::path report_path = cfg.out_dir / ("report_" + series.name + ".csv");
        refuse_existing(report_path, args.force);
        write_report_csv(report_path, report);

        const fs::path summary_path = cfg.out_dir / ("summary_" + series.name + ".csv");
        refuse_existing(summary_path, args.force);
        std::ofstream summary(summary_path);
        summary << "key,value\n";
        summary << "avg_sam_deg_all," << fmt(report.average_sam_deg(false)) << "\n";
        summary << "avg_sam_deg_heldout," << fmt(report.average_sam_deg(true)) << "\n";
        summary << "avg_miscls_pct_all," << fmt(report.average_miscls_pct(false)) << "\n";
        summary << "avg_miscls_pct_heldout," << fmt(report.average_miscls_pct(true)) << "\n";
        std::size_t excluded = 0, evaluated = 0, held_out = 0;
        for (const auto& row : report.rows) {
            excluded += row.sam_excluded;
            evaluated += row.sam_deg.has_value();
            held_out += row.held_out;
        }
        summary << "evaluated_dates," << evaluated << "\n";
        summary << "heldout_dates," << held_out << "\n";
        summary << "sam_excluded_pixels," << excluded << "\n";
        std::cout << series.name << ": avg SAM (held-out) "
                  << fmt(report.average_sam_deg(true)) << " deg, avg miscls (held-out) "
                  << fmt(report.average_miscls_pct(true)) << " %\n";
    }
    return 0;
}

int cmd_classify(const CommonArgs& args) {
    const RunConfig cfg = apply_overrides(args);
    const auto series_list = load_series(cfg);
    const std::optional<CentroidPair> shared =
        cfg.classify.centroids_per_date ? std::nullopt
                                        : std::optional<CentroidPair>(initial_centroids(cfg));

    for (const auto& series : series_list) {
        std::vector<WaterMap> maps;
        for (const auto& frame : series.frames) maps.push_back(map_for(frame, cfg, shared));

        for (std::size_t k = 0; k < maps.size(); ++k) {
            const fs::path path = cfg.out_dir / frame_name("watermap_" + series.name, int(k));
            refuse_existing(path, args.force);
            RasterImage raster(maps[k].height, maps[k].width, 1);
            raster.date = maps[k].date;
            raster.modality = "watermap";
            for (std::size_t i = 0; i < maps[k].labels.size(); ++i)
                raster.values[i] = float(maps[k].labels[i]);
            write_frst(path, raster);
        }
        const fs::path csv = cfg.out_dir / ("classify_" + series.name + ".csv");
        refuse_existing(csv, args.force);
        std::ofstream out(csv);
        out << "date,water_fraction\n";
        for (const auto& [date, fraction] : water_fraction_series(maps))
            out << format_date(date) << ',' << fmt(fraction) << "\n";
        std::cout << series.name << ": wrote " << maps.size() << " water maps\n";
    }
    return 0;
}

int cmd_calibrate_q(const CommonArgs& args) {
    const RunConfig cfg = apply_overrides(args);
    const PipelineInputs inputs = load_inputs(cfg);
    const auto trace = calibrate_trace(inputs, cfg);

    fs::create_directories(cfg.out_dir);
    const fs::path csv = cfg.out_dir / "calibration.csv";
    refuse_existing(csv, args.force);
    std::ofstream out(csv);
    out << "k,date,matched_index,window_span_days,delta_days,min_q2,max_q2\n";
    for (const auto& rec : trace) {
        const fs::path path = cfg.out_dir / frame_name("q", rec.k);
        refuse_existing(path, args.force);
        RasterImage raster = devectorize(rec.noise.diag, inputs.ordering);
        raster.date = rec.date;
        raster.modality = "process_noise";
        write_frst(path, raster);
        out << rec.k << ',' << format_date(rec.date) << ',' << rec.noise.matched_index << ','
            << fmt(rec.noise.window_span_days) << ',' << fmt(rec.noise.delta_days) << ','
            << fmt(rec.noise.diag.minCoeff()) << ',' << fmt(rec.noise.diag.maxCoeff()) << "\n";
    }
    std::cout << "wrote " << trace.size() << " process-noise rasters\n";
    return 0;
}

int cmd_synth(const CommonArgs& args) {
    SynthConfig cfg = load_synth_config(args.config);
    if (args.seed) cfg.scene.seed = *args.seed;
    const fs::path out = args.out.value_or(fs::path("synth_out"));
    if (!args.force && fs::exists(out) && !fs::is_empty(out))
        throw ConfigError("output directory '" + out.string() +
                          "' is not empty (pass --force to overwrite)");
    const SynthArtifacts artifacts = write_synth_dataset(cfg, out);
    std::cout << "wrote " << artifacts.truth_frames << " truth frames, "
              << artifacts.observations << " observations, " << artifacts.historical_frames
              << " historical frames into '" << out.string() << "'\n";
    return 0;
}

}  // namespace kalfuse::cli

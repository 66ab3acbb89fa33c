#include "kalfuse/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace kalfuse {

namespace {

std::vector<int> qa_codes_for(const ManifestRow& row, const RasterImage& image, int lr_rows,
                              int lr_cols) {
    std::vector<int> qa(std::size_t(lr_rows) * lr_cols, 0);
    if (!row.mask_path.empty()) {
        const RasterImage mask = read_frst(row.mask_path);
        if (mask.height != lr_rows || mask.width != lr_cols || mask.bands != 1)
            throw DataError("QA mask '" + row.mask_path.string() + "' must be a single-band " +
                            std::to_string(lr_rows) + "x" + std::to_string(lr_cols) + " raster");
        for (std::size_t i = 0; i < qa.size(); ++i) qa[i] = int(std::lround(mask.values[i]));
    }
    // A pixel with any embedded-invalid band is flagged unless the external
    // mask already did.
    if (!image.valid.empty()) {
        for (int r = 0; r < lr_rows; ++r)
            for (int c = 0; c < lr_cols; ++c) {
                bool ok = true;
                for (int b = 0; b < image.bands && ok; ++b) ok = image.is_valid(b, r, c);
                if (!ok && qa[std::size_t(r) * lr_cols + c] == 0)
                    qa[std::size_t(r) * lr_cols + c] = 1;
            }
    }
    return qa;
}

BlockDiagCovariance make_initial_covariance(CovarianceKind kind, const StateOrdering& ordering,
                                            double scale) {
    const int n = ordering.state_size();
    const int bd = block_dim_for(kind, ordering);
    BlockDiagCovariance cov(n, bd);
    if (kind == CovarianceKind::Diagonal) {
        for (int g = 0; g < cov.groups(); ++g) cov.block(g)(0, 0) = scale;
        return cov;
    }
    // Half-ones plus half-identity pattern per pixel-group; the dense oracle
    // uses the coarse-pixel pattern on its single group.
    const int pattern_dim =
        kind == CovarianceKind::Dense ? ordering.coarse_run_length() : bd;
    const Eigen::MatrixXd pattern =
        scale * (0.5 * Eigen::MatrixXd::Ones(pattern_dim, pattern_dim) +
                 0.5 * Eigen::MatrixXd::Identity(pattern_dim, pattern_dim));
    for (int g = 0; g < cov.groups(); ++g) {
        auto block = cov.block(g);
        for (int off = 0; off + pattern_dim <= bd; off += pattern_dim)
            block.block(off, off, pattern_dim, pattern_dim) = pattern;
    }
    return cov;
}

Eigen::VectorXd gather_measurement(const RasterImage& image, const OutlierMask& mask,
                                   int lr_cols) {
    const int lm = image.bands;
    Eigen::VectorXd y(Eigen::Index(mask.n_kept()) * lm);
    for (int i = 0; i < mask.n_kept(); ++i) {
        const int p = mask.kept[i];
        for (int b = 0; b < lm; ++b)
            y[Eigen::Index(i) * lm + b] = image.at(b, p / lr_cols, p % lr_cols);
    }
    return y;
}

char fmt_buf[64];
std::string fmt(double v) {
    std::snprintf(fmt_buf, sizeof fmt_buf, "%.10g", v);
    return fmt_buf;
}

}  // namespace

const ObservationRecord* InstantData::find(const std::string& modality) const {
    for (const auto& obs : observations)
        if (obs.spec->name == modality) return &obs;
    return nullptr;
}

PipelineInputs load_inputs(const RunConfig& config) {
    config.validate();
    const auto obs_rows = read_manifest(config.observations_manifest);
    const auto hist_rows = read_manifest(config.historical_manifest);
    if (obs_rows.empty()) throw DataError("observations manifest has no rows");

    const ModalitySpec& hr = config.high_res_modality();
    int coarse = 1;
    for (const auto& m : config.modalities) coarse = std::max(coarse, m.factor);

    // The HR grid comes from the first high-resolution raster.
    const ManifestRow* first_hr = nullptr;
    for (const auto& row : obs_rows)
        if (row.modality == hr.name && (first_hr == nullptr || row.date < first_hr->date))
            first_hr = &row;
    if (first_hr == nullptr)
        throw DataError("observations manifest has no '" + hr.name + "' rows");
    const RasterImage probe = read_frst(first_hr->path);
    StateOrdering ordering(probe.height, probe.width, probe.bands, coarse);

    // Group rows by date, loading and validating each raster.
    std::map<Date, InstantData> by_date;
    for (const auto& row : obs_rows) {
        const ModalitySpec* spec = config.find_modality(row.modality);
        if (spec == nullptr)
            throw ConfigError("manifest row references modality '" + row.modality +
                              "' missing from the config");
        RasterImage image = read_frst(row.path);
        image.date = row.date;
        image.modality = row.modality;
        const int lr_rows = ordering.height() / spec->factor;
        const int lr_cols = ordering.width() / spec->factor;
        const int lm = spec->measured_bands(ordering.bands());
        if (image.height != lr_rows || image.width != lr_cols || image.bands != lm)
            throw DataError("raster '" + row.path.string() + "' is " +
                            std::to_string(image.height) + "x" + std::to_string(image.width) +
                            "x" + std::to_string(image.bands) + ", expected " +
                            std::to_string(lr_rows) + "x" + std::to_string(lr_cols) + "x" +
                            std::to_string(lm) + " for modality '" + spec->name + "'");
        InstantData& instant = by_date[row.date];
        instant.date = row.date;
        if (instant.find(row.modality))
            throw DataError("duplicate observation of '" + row.modality + "' at " +
                            format_date(row.date));
        ObservationRecord rec;
        rec.spec = spec;
        rec.qa = qa_codes_for(row, image, lr_rows, lr_cols);
        rec.image = std::move(image);
        instant.observations.push_back(std::move(rec));
    }

    PipelineInputs inputs{ordering, {}, {}, 1.0};
    const auto order = config.canonical_order();
    for (auto& [date, instant] : by_date) {
        std::sort(instant.observations.begin(), instant.observations.end(),
                  [&order](const ObservationRecord& a, const ObservationRecord& b) {
                      const auto pos = [&order](const ModalitySpec* s) {
                          return std::find(order.begin(), order.end(), s) - order.begin();
                      };
                      return pos(a.spec) < pos(b.spec);
                  });
        inputs.instants.push_back(std::move(instant));
    }

    // Historical archive, restricted to the high-resolution modality.
    std::vector<const ManifestRow*> hist_sorted;
    for (const auto& row : hist_rows) {
        if (row.modality != hr.name)
            throw DataError("historical manifest row at " + format_date(row.date) +
                            " has modality '" + row.modality + "', expected '" + hr.name + "'");
        hist_sorted.push_back(&row);
    }
    std::sort(hist_sorted.begin(), hist_sorted.end(),
              [](const ManifestRow* a, const ManifestRow* b) { return a->date < b->date; });
    double hist_max = 0.0;
    for (const ManifestRow* row : hist_sorted) {
        RasterImage image = read_frst(row->path);
        if (image.height != inputs.ordering.height() || image.width != inputs.ordering.width() ||
            image.bands != inputs.ordering.bands())
            throw DataError("historical raster '" + row->path.string() +
                            "' does not match the HR grid");
        Eigen::VectorXd state = vectorize(image, inputs.ordering);
        hist_max = std::max(hist_max, state.maxCoeff());
        inputs.historical.add(row->date, std::move(state));
    }

    switch (config.smax_policy) {
        case SmaxPolicy::Fixed:
            inputs.s_max = config.smax_fixed;
            break;
        case SmaxPolicy::Historical:
            if (inputs.historical.size() == 0)
                throw DataError("historical s_max policy needs a nonempty archive");
            inputs.s_max = hist_max;
            break;
        case SmaxPolicy::Window: {
            double m = 0.0;
            for (const auto& instant : inputs.instants)
                for (const auto& obs : instant.observations)
                    for (float v : obs.image.values) m = std::max(m, double(v));
            inputs.s_max = m;
            break;
        }
    }
    if (!(inputs.s_max > 0.0))
        throw DataError("derived s_max is not positive; use the fixed policy");
    return inputs;
}

FusionResult run_fusion(const RunConfig& config, const FusionOptions& options) {
    PipelineInputs inputs = load_inputs(config);
    if (inputs.instants.empty()) throw DataError("empty observation timeline");

    const ModalitySpec& hr = config.high_res_modality();
    const ObservationRecord* init_obs = inputs.instants[0].find(hr.name);
    if (init_obs == nullptr)
        throw DataError("first instant " + format_date(inputs.instants[0].date) +
                        " has no high-resolution observation to initialize from");

    const StateOrdering& ordering = inputs.ordering;
    QCalibrator calibrator(inputs.historical, config.window, config.epsilon2, config.divisor);

    FusionResult result{FusionTimeline{}, ordering, inputs.s_max, {}};

    StateBelief belief;
    belief.mean = vectorize(init_obs->image, ordering);
    belief.cov = make_initial_covariance(config.structure, ordering, config.p0_scale);
    belief.instant = 0;
    belief.tag = BeliefTag::Initial;
    calibrator.set_reference(belief.mean);

    for (int k = 0; k < int(inputs.instants.size()); ++k) {
        const InstantData& instant = inputs.instants[k];
        TimelineEntry entry;
        entry.date = instant.date;

        if (k > 0) {
            const double delta = double(instant.date - inputs.instants[k - 1].date);
            const ProcessNoise noise = calibrator.process_noise(delta);
            entry.model = TransitionModel::random_walk(noise.diag);
            belief = predict(belief, entry.model);
            belief.instant = k;
            if (options.observer) options.observer(belief, "predict");
        }

        UpdateStats stats;
        for (const auto& obs : instant.observations) {
            if (k == 0 && obs.spec == init_obs->spec) {
                // Initialization consumes this row directly.
                entry.assimilated.push_back(obs.spec->name);
                entry.assimilated_pixels += int(mask_from_qa(obs.qa).n_kept());
                continue;
            }
            const OutlierMask mask = mask_from_qa(obs.qa);
            if (mask.empty()) {
                result.dropped.push_back(
                    DroppedRow{instant.date, obs.spec->name, "all pixels QA-flagged"});
                continue;
            }
            const ObservationOperator op = make_operator(*obs.spec, mask, ordering);
            const int lr_cols = ordering.width() / obs.spec->factor;
            const Eigen::VectorXd y = gather_measurement(obs.image, op.mask(), lr_cols);
            const std::size_t skipped_before = stats.skipped_lr_pixels.size();
            belief = update(belief, op, y, &stats);
            belief.instant = k;
            if (options.observer) options.observer(belief, "update");
            const std::size_t skipped = stats.skipped_lr_pixels.size() - skipped_before;
            entry.assimilated.push_back(obs.spec->name);
            entry.assimilated_pixels += op.n_kept() - int(skipped);
            if (skipped > 0) {
                std::string which;
                for (std::size_t i = skipped_before;
                     i < stats.skipped_lr_pixels.size() && i < skipped_before + 8; ++i) {
                    if (!which.empty()) which += ' ';
                    which += std::to_string(stats.skipped_lr_pixels[i]);
                }
                if (skipped > 8) which += " ...";
                result.dropped.push_back(DroppedRow{
                    instant.date, obs.spec->name,
                    "singular innovation at LR pixels " + which});
            }
            if (obs.spec->role == ModalityRole::HighRes && !(k == 0 && obs.spec == init_obs->spec))
                calibrator.set_reference(vectorize(obs.image, ordering));
        }

        belief = constrain(belief, inputs.s_max);
        belief.instant = k;
        entry.innovation_rms = stats.measurement_dims > 0
                                   ? std::sqrt(stats.innovation_sq / stats.measurement_dims)
                                   : 0.0;
        entry.filtered = belief;
        result.timeline.push(std::move(entry));
    }

    if (config.smoother) smooth(result.timeline, inputs.s_max, options.observer);
    return result;
}

std::vector<CalibrationRecord> calibrate_trace(const PipelineInputs& inputs,
                                               const RunConfig& config) {
    if (inputs.instants.empty()) throw DataError("empty observation timeline");
    const ModalitySpec& hr = config.high_res_modality();
    QCalibrator calibrator(inputs.historical, config.window, config.epsilon2, config.divisor);

    const ObservationRecord* init_obs = inputs.instants[0].find(hr.name);
    if (init_obs == nullptr)
        throw DataError("first instant has no high-resolution observation");
    calibrator.set_reference(vectorize(init_obs->image, inputs.ordering));

    std::vector<CalibrationRecord> trace;
    for (int k = 1; k < int(inputs.instants.size()); ++k) {
        const InstantData& instant = inputs.instants[k];
        const double delta = double(instant.date - inputs.instants[k - 1].date);
        trace.push_back(CalibrationRecord{k, instant.date, calibrator.process_noise(delta)});
        if (const ObservationRecord* obs = instant.find(hr.name);
            obs != nullptr && !mask_from_qa(obs->qa).empty())
            calibrator.set_reference(vectorize(obs->image, inputs.ordering));
    }
    return trace;
}

void write_outputs(const FusionResult& result, const RunConfig& config, bool force) {
    namespace fs = std::filesystem;
    const fs::path out = config.out_dir;
    fs::create_directories(out);

    auto frame_name = [](const char* stem, int k) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%s_%04d.frst", stem, k);
        return std::string(buf);
    };

    std::vector<fs::path> targets = {out / "log.csv", out / "drops.csv",
                                     out / "fused_manifest.csv"};
    if (result.timeline.has_smoothed()) targets.push_back(out / "smoothed_manifest.csv");
    for (int k = 0; k < result.timeline.size(); ++k) {
        targets.push_back(out / frame_name("fused", k));
        targets.push_back(out / frame_name("fused_cov", k));
        if (result.timeline.has_smoothed()) {
            targets.push_back(out / frame_name("smoothed", k));
            targets.push_back(out / frame_name("smoothed_cov", k));
        }
    }
    if (!force)
        for (const auto& t : targets)
            if (fs::exists(t))
                throw ConfigError("output '" + t.string() + "' exists (pass --force to overwrite)");

    std::vector<ManifestRow> fused_rows, smoothed_rows;
    for (int k = 0; k < result.timeline.size(); ++k) {
        const TimelineEntry& entry = result.timeline[k];
        RasterImage fused = devectorize(entry.filtered.mean, result.ordering);
        fused.date = entry.date;
        fused.modality = "fused";
        write_frst(out / frame_name("fused", k), fused);
        RasterImage cov = devectorize(entry.filtered.cov.diagonal(), result.ordering);
        cov.date = entry.date;
        cov.modality = "fused_cov";
        write_frst(out / frame_name("fused_cov", k), cov);
        fused_rows.push_back(ManifestRow{entry.date, "fused", frame_name("fused", k), {}});
        if (entry.smoothed) {
            RasterImage sm = devectorize(entry.smoothed->mean, result.ordering);
            sm.date = entry.date;
            sm.modality = "smoothed";
            write_frst(out / frame_name("smoothed", k), sm);
            RasterImage smc = devectorize(entry.smoothed->cov.diagonal(), result.ordering);
            smc.date = entry.date;
            smc.modality = "smoothed_cov";
            write_frst(out / frame_name("smoothed_cov", k), smc);
            smoothed_rows.push_back(
                ManifestRow{entry.date, "smoothed", frame_name("smoothed", k), {}});
        }
    }
    write_manifest(out / "fused_manifest.csv", fused_rows);
    if (!smoothed_rows.empty()) write_manifest(out / "smoothed_manifest.csv", smoothed_rows);

    std::ofstream log(out / "log.csv");
    log << "k,date,modalities,assimilated_pixels,mean_innovation_norm\n";
    for (int k = 0; k < result.timeline.size(); ++k) {
        const TimelineEntry& entry = result.timeline[k];
        log << k << ',' << format_date(entry.date) << ',';
        for (std::size_t i = 0; i < entry.assimilated.size(); ++i) {
            if (i) log << '|';
            log << entry.assimilated[i];
        }
        log << ',' << entry.assimilated_pixels << ',' << fmt(entry.innovation_rms) << "\n";
    }
    if (!log) throw DataError("failed writing run log");

    std::ofstream drops(out / "drops.csv");
    drops << "date,modality,reason\n";
    for (const auto& d : result.dropped)
        drops << format_date(d.date) << ',' << d.modality << ',' << d.reason << "\n";
    if (!drops) throw DataError("failed writing drop list");
}

}  // namespace kalfuse

#include "kalfuse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kalfuse/ordering.hpp"

namespace kalfuse {

double AreaCurve::at(double t) const {
    validate();
    t = std::clamp(t, 0.0, 1.0);
    if (t <= points.front().first) return points.front().second;
    if (t >= points.back().first) return points.back().second;
    for (std::size_t i = 1; i < points.size(); ++i) {
        if (t <= points[i].first) {
            const auto [t0, a0] = points[i - 1];
            const auto [t1, a1] = points[i];
            const double u = t1 > t0 ? (t - t0) / (t1 - t0) : 1.0;
            return a0 + u * (a1 - a0);
        }
    }
    return points.back().second;
}

void AreaCurve::validate() const {
    if (points.empty()) throw DataError("area curve needs at least one point");
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].second < 0.0 || points[i].second > 1.0)
            throw DataError("area curve fraction outside [0, 1]");
        if (i > 0 && points[i].first < points[i - 1].first)
            throw DataError("area curve times must be nondecreasing");
    }
}

void SceneSpec::validate() const {
    if (height <= 0 || width <= 0) throw DimensionError("scene grid must be positive");
    if (land_levels.size() == 0 || water_levels.size() != land_levels.size())
        throw DimensionError("land and water reflectance levels must match band counts");
    if ((land_levels.array() < 0.0).any() || (land_levels.array() > s_max).any() ||
        (water_levels.array() < 0.0).any() || (water_levels.array() > s_max).any())
        throw DataError("reflectance levels must lie in [0, s_max]");
    if (texture_sigma < 0.0) throw DataError("texture sigma must be nonnegative");
    area.validate();
}

namespace {

// Fixed pixel ranking; the first round(a*N) entries are water. Disk ranks
// center-out with raster-index tie-breaks; Sweep floods in raster order;
// Channel floods serpentine strips of channel_width columns along their
// length, alternating direction per strip.
std::vector<int> water_order(const SceneSpec& spec) {
    const int height = spec.height, width = spec.width;
    std::vector<int> order(std::size_t(height) * width);
    std::iota(order.begin(), order.end(), 0);
    if (spec.shape == WaterShape::Sweep) return order;
    if (spec.shape == WaterShape::Channel) {
        const int w = std::min(spec.channel_width, width);
        std::vector<long> key(order.size());
        for (int r = 0; r < height; ++r)
            for (int c = 0; c < width; ++c) {
                const int strip = c / w;
                const int strip_w = std::min(w, width - strip * w);
                const int rr = strip % 2 == 0 ? r : height - 1 - r;
                key[std::size_t(r) * width + c] =
                    long(height) * strip * w + long(rr) * strip_w + (c - strip * w);
            }
        std::stable_sort(order.begin(), order.end(),
                         [&key](int a, int b) { return key[a] < key[b]; });
        return order;
    }
    const double cr = (height - 1) / 2.0, cc = (width - 1) / 2.0;
    std::vector<double> dist(order.size());
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c)
            dist[std::size_t(r) * width + c] = (r - cr) * (r - cr) + (c - cc) * (c - cc);
    std::stable_sort(order.begin(), order.end(),
                     [&dist](int a, int b) { return dist[a] < dist[b]; });
    return order;
}

double normalized_time(const std::vector<Date>& dates, std::size_t i) {
    const int span = dates.back() - dates.front();
    return span > 0 ? double(dates[i] - dates.front()) / span : 0.0;
}

}  // namespace

std::vector<std::vector<std::uint8_t>> truth_water_labels(const SceneSpec& spec,
                                                          const std::vector<Date>& dates) {
    spec.validate();
    if (dates.empty()) throw DataError("truth generation needs at least one date");
    for (std::size_t i = 1; i < dates.size(); ++i)
        if (dates[i] <= dates[i - 1]) throw DataError("truth dates must strictly increase");

    const auto order = water_order(spec);
    const std::size_t n = order.size();
    std::vector<std::vector<std::uint8_t>> labels;
    labels.reserve(dates.size());
    for (std::size_t i = 0; i < dates.size(); ++i) {
        const double frac = spec.area.at(normalized_time(dates, i));
        const std::size_t n_water =
            std::min(n, std::size_t(std::llround(frac * double(n))));
        std::vector<std::uint8_t> map(n, 1);
        for (std::size_t j = 0; j < n_water; ++j) map[order[j]] = 0;
        labels.push_back(std::move(map));
    }
    return labels;
}

std::vector<RasterImage> generate_truth(const SceneSpec& spec, const std::vector<Date>& dates) {
    const auto labels = truth_water_labels(spec, dates);

    // Static texture field, one draw per (band, pixel).
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, spec.texture_sigma);
    const std::size_t n = std::size_t(spec.height) * spec.width;
    std::vector<double> texture(n * spec.bands());
    for (auto& t : texture) t = spec.texture_sigma > 0.0 ? noise(rng) : 0.0;

    std::vector<RasterImage> frames;
    frames.reserve(dates.size());
    for (std::size_t i = 0; i < dates.size(); ++i) {
        RasterImage frame(spec.height, spec.width, spec.bands());
        frame.date = dates[i];
        frame.modality = "truth";
        for (int b = 0; b < spec.bands(); ++b)
            for (std::size_t p = 0; p < n; ++p) {
                const double level =
                    labels[i][p] ? spec.land_levels[b] : spec.water_levels[b];
                const double v = level + texture[std::size_t(b) * n + p];
                frame.values[std::size_t(b) * n + p] =
                    float(std::clamp(v, 0.0, spec.s_max));
            }
        frames.push_back(std::move(frame));
    }
    return frames;
}

std::vector<Acquisition> acquire(const std::vector<RasterImage>& truth,
                                 const std::vector<Date>& truth_dates, const ModalitySpec& spec,
                                 const std::vector<Date>& schedule, double outage_rate,
                                 const StateOrdering& ordering, std::mt19937_64& rng) {
    if (truth.size() != truth_dates.size())
        throw DimensionError("truth frames and dates differ in count");
    if (outage_rate < 0.0 || outage_rate > 1.0)
        throw DataError("outage rate must lie in [0, 1]");

    const int lr_rows = ordering.height() / spec.factor;
    const int lr_cols = ordering.width() / spec.factor;
    const int n_lr = lr_rows * lr_cols;
    const SpectralResponse spectral = spec.spectral(ordering.bands());
    const int lm = spectral.measured_bands();
    // Generation-side noise may be zero; the operator's own variances are
    // only used by the filter, so unit placeholders keep apply() usable.
    const ObservationOperator op(spec.name, spectral, spec.spatial(), OutlierMask::all(n_lr),
                                 Eigen::VectorXd::Ones(lm), ordering);
    Eigen::VectorXd gen_var = spec.noise_variance;
    if (gen_var.size() == 1 && lm > 1) gen_var = Eigen::VectorXd::Constant(lm, gen_var[0]);
    if (gen_var.size() != lm)
        throw DimensionError("noise variance count does not match measured bands");
    if ((gen_var.array() < 0.0).any()) throw DataError("noise variances must be nonnegative");

    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    std::vector<Acquisition> out;
    out.reserve(schedule.size());
    for (Date date : schedule) {
        const auto it = std::find(truth_dates.begin(), truth_dates.end(), date);
        if (it == truth_dates.end())
            throw DataError("schedule date " + format_date(date) + " has no truth frame");
        const auto& frame = truth[std::size_t(it - truth_dates.begin())];

        const Eigen::VectorXd clean = op.apply(vectorize(frame, ordering));
        Acquisition acq;
        acq.date = date;
        acq.image = RasterImage(lr_rows, lr_cols, lm);
        acq.image.date = date;
        acq.image.modality = spec.name;
        for (int p = 0; p < n_lr; ++p)
            for (int b = 0; b < lm; ++b) {
                double v = clean[Eigen::Index(p) * lm + b];
                if (gen_var[b] > 0.0) v += std::sqrt(gen_var[b]) * unit(rng);
                acq.image.at(b, p / lr_cols, p % lr_cols) = float(v);
            }
        acq.qa.assign(n_lr, 0);
        if (outage_rate > 0.0)
            for (int p = 0; p < n_lr; ++p)
                if (coin(rng) < outage_rate) acq.qa[p] = 1;
        out.push_back(std::move(acq));
    }
    return out;
}

}  // namespace kalfuse

#include "kalfuse/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace kalfuse {

namespace {
constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;

void require_same_grid(int h1, int w1, int h2, int w2, const char* what) {
    if (h1 != h2 || w1 != w2)
        throw DimensionError(std::string(what) + ": grids " + std::to_string(h1) + "x" +
                             std::to_string(w1) + " and " + std::to_string(h2) + "x" +
                             std::to_string(w2) + " differ");
}
}  // namespace

double WaterMap::water_fraction() const {
    if (labels.empty()) return 0.0;
    std::size_t water = 0;
    for (auto l : labels) water += (l == 0);
    return double(water) / double(labels.size());
}

SamStats spectral_angle_stats(const RasterImage& reference, const RasterImage& estimate) {
    require_same_grid(reference.height, reference.width, estimate.height, estimate.width, "sam");
    if (reference.bands != estimate.bands)
        throw DimensionError("sam: band counts differ");
    SamStats stats;
    double sum = 0.0;
    for (int r = 0; r < reference.height; ++r) {
        for (int c = 0; c < reference.width; ++c) {
            double rr = 0.0, ee = 0.0, re = 0.0;
            for (int b = 0; b < reference.bands; ++b) {
                const double x = reference.at(b, r, c);
                const double y = estimate.at(b, r, c);
                rr += x * x;
                ee += y * y;
                re += x * y;
            }
            if (rr == 0.0 || ee == 0.0) {
                ++stats.pixels_excluded;
                continue;
            }
            const double cosv = std::clamp(re / std::sqrt(rr * ee), -1.0, 1.0);
            sum += std::acos(cosv);
            ++stats.pixels_used;
        }
    }
    stats.mean_deg = stats.pixels_used ? kRadToDeg * sum / double(stats.pixels_used) : 0.0;
    return stats;
}

double sam_degrees(const RasterImage& reference, const RasterImage& estimate) {
    return spectral_angle_stats(reference, estimate).mean_deg;
}

std::vector<Eigen::VectorXd> pixel_vectors(const RasterImage& image) {
    std::vector<Eigen::VectorXd> pixels;
    pixels.reserve(image.n_pixels());
    for (int r = 0; r < image.height; ++r)
        for (int c = 0; c < image.width; ++c) {
            Eigen::VectorXd v(image.bands);
            for (int b = 0; b < image.bands; ++b) v[b] = image.at(b, r, c);
            pixels.push_back(std::move(v));
        }
    return pixels;
}

CentroidPair kmeans2(const std::vector<Eigen::VectorXd>& pixels, int nir_band) {
    if (pixels.size() < 2) throw DataError("kmeans2 needs at least two pixels");
    const Eigen::Index bands = pixels[0].size();
    if (nir_band < 0 || nir_band >= bands) throw DimensionError("NIR band outside pixel bands");
    auto same = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return (a.array() == b.array()).all();
    };
    bool all_same = true;
    for (const auto& p : pixels) {
        if (p.size() != bands) throw DimensionError("pixel vectors have mixed lengths");
        if (!same(p, pixels[0])) all_same = false;
    }
    if (all_same) throw DataError("kmeans2: all pixels identical, no two clusters exist");

    // Permutation-invariant ranking: sort by (NIR, remaining bands).
    std::vector<const Eigen::VectorXd*> order;
    order.reserve(pixels.size());
    for (const auto& p : pixels) order.push_back(&p);
    std::sort(order.begin(), order.end(), [&](const Eigen::VectorXd* a, const Eigen::VectorXd* b) {
        if ((*a)[nir_band] != (*b)[nir_band]) return (*a)[nir_band] < (*b)[nir_band];
        return std::lexicographical_compare(a->data(), a->data() + a->size(), b->data(),
                                            b->data() + b->size());
    });
    const std::size_t n = order.size();
    CentroidPair centroids = {*order[(n - 1) / 10], *order[(n - 1) * 9 / 10]};
    if (same(centroids[0], centroids[1])) {
        centroids[0] = *order.front();
        centroids[1] = *order.back();
    }

    std::vector<std::uint8_t> assign(n, 255);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        Eigen::VectorXd sum0 = Eigen::VectorXd::Zero(bands), sum1 = Eigen::VectorXd::Zero(bands);
        std::size_t n0 = 0, n1 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d0 = (pixels[i] - centroids[0]).squaredNorm();
            const double d1 = (pixels[i] - centroids[1]).squaredNorm();
            const std::uint8_t a = d1 < d0 ? 1 : 0;
            if (a != assign[i]) {
                assign[i] = a;
                changed = true;
            }
            if (a == 0) {
                sum0 += pixels[i];
                ++n0;
            } else {
                sum1 += pixels[i];
                ++n1;
            }
        }
        if (!changed) break;
        if (n0 > 0) centroids[0] = sum0 / double(n0);
        if (n1 > 0) centroids[1] = sum1 / double(n1);
    }
    return centroids;
}

WaterMap classify_water(const RasterImage& image, const CentroidPair& centroids, int nir_band) {
    if (centroids[0].size() != image.bands || centroids[1].size() != image.bands)
        throw DimensionError("centroid dimensionality does not match image bands");
    if (nir_band < 0 || nir_band >= image.bands)
        throw DimensionError("NIR band outside image bands");
    const int water = centroids[0][nir_band] <= centroids[1][nir_band] ? 0 : 1;

    WaterMap map;
    map.height = image.height;
    map.width = image.width;
    map.date = image.date;
    map.labels.resize(map.n_pixels());
    Eigen::VectorXd pixel(image.bands);
    for (int r = 0; r < image.height; ++r)
        for (int c = 0; c < image.width; ++c) {
            for (int b = 0; b < image.bands; ++b) pixel[b] = image.at(b, r, c);
            const double dw = (pixel - centroids[water]).squaredNorm();
            const double dl = (pixel - centroids[1 - water]).squaredNorm();
            // Ties label land.
            map.labels[std::size_t(r) * image.width + c] = dw < dl ? 0 : 1;
        }
    return map;
}

double misclassification_pct(const WaterMap& map, const WaterMap& truth) {
    require_same_grid(map.height, map.width, truth.height, truth.width, "misclassification");
    std::size_t diff = 0;
    for (std::size_t i = 0; i < map.labels.size(); ++i)
        diff += (map.labels[i] != truth.labels[i]);
    return 100.0 * double(diff) / double(map.labels.size());
}

std::vector<std::pair<Date, double>> water_fraction_series(const std::vector<WaterMap>& maps) {
    if (maps.empty()) throw DataError("water fraction series needs at least one map");
    std::vector<std::pair<Date, double>> series;
    series.reserve(maps.size());
    for (const auto& m : maps) series.emplace_back(m.date, m.water_fraction());
    return series;
}

double EvaluationReport::average_sam_deg(bool held_out_only) const {
    double sum = 0.0;
    int n = 0;
    for (const auto& row : rows) {
        if (!row.sam_deg || (held_out_only && !row.held_out)) continue;
        sum += *row.sam_deg;
        ++n;
    }
    return n ? sum / n : 0.0;
}

double EvaluationReport::average_miscls_pct(bool held_out_only) const {
    double sum = 0.0;
    int n = 0;
    for (const auto& row : rows) {
        if (!row.miscls_pct || (held_out_only && !row.held_out)) continue;
        sum += *row.miscls_pct;
        ++n;
    }
    return n ? sum / n : 0.0;
}

void write_report_csv(const std::filesystem::path& path, const EvaluationReport& report) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out << "date,sam_deg,miscls_pct,water_fraction\n";
    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof buf, "%.10g", v);
        return std::string(buf);
    };
    for (const auto& row : report.rows) {
        out << format_date(row.date) << ',';
        if (row.sam_deg) out << fmt(*row.sam_deg);
        out << ',';
        if (row.miscls_pct) out << fmt(*row.miscls_pct);
        out << ',' << fmt(row.water_fraction) << "\n";
    }
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

}  // namespace kalfuse

#include "kalfuse/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace kalfuse {

namespace {

// days_from_civil / civil_from_days, Howard Hinnant's algorithms.
long days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

void civil_from_days(long z, int& y, int& m, int& d) {
    z += 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long yy = static_cast<long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = int(doy - (153 * mp + 2) / 5 + 1);
    m = int(mp + (mp < 10 ? 3 : -9));
    y = int(yy + (m <= 2));
}

constexpr char kFrstMagic[8] = {'F', 'R', 'S', 'T', '0', '0', '0', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

}  // namespace

Date parse_date(std::string_view iso) {
    int y = 0, m = 0, d = 0;
    char extra = 0;
    std::string buf(iso);
    if (std::sscanf(buf.c_str(), "%4d-%2d-%2d%c", &y, &m, &d, &extra) != 3 || buf.size() != 10)
        throw DataError("malformed date '" + buf + "' (expected YYYY-MM-DD)");
    if (m < 1 || m > 12 || d < 1 || d > 31)
        throw DataError("out-of-range date '" + buf + "'");
    return Date{int(days_from_civil(y, m, d))};
}

std::string format_date(Date date) {
    int y, m, d;
    civil_from_days(date.days, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d);
    return buf;
}

RasterImage::RasterImage(int height_, int width_, int bands_, float fill)
    : height(height_), width(width_), bands(bands_),
      values(std::size_t(height_) * width_ * bands_, fill) {
    if (height_ <= 0 || width_ <= 0 || bands_ <= 0)
        throw DimensionError("raster dimensions must be positive");
}

bool RasterImage::all_valid() const {
    if (valid.empty()) return true;
    return std::all_of(valid.begin(), valid.end(), [](std::uint8_t f) { return f != 0; });
}

void RasterImage::validate() const {
    if (height <= 0 || width <= 0 || bands <= 0)
        throw DimensionError("raster dimensions must be positive");
    if (values.size() != size())
        throw DimensionError("raster value count " + std::to_string(values.size()) +
                             " does not match " + std::to_string(size()));
    if (!valid.empty() && valid.size() != size())
        throw DimensionError("raster mask count does not match value count");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i]))
            throw DataError("non-finite raster value at flat index " + std::to_string(i));
        if (!valid.empty() && valid[i] == 0 && values[i] != 0.0f)
            throw DataError("invalid sample carries non-zero value at flat index " +
                            std::to_string(i));
    }
}

void write_frst(const std::filesystem::path& path, const RasterImage& image) {
    image.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out.write(kFrstMagic, sizeof kFrstMagic);
    write_u32(out, std::uint32_t(image.height));
    write_u32(out, std::uint32_t(image.width));
    write_u32(out, std::uint32_t(image.bands));
    const char has_mask = image.valid.empty() ? 0 : 1;
    out.write(&has_mask, 1);
    out.write(reinterpret_cast<const char*>(image.values.data()),
              std::streamsize(image.values.size() * sizeof(float)));
    if (has_mask)
        out.write(reinterpret_cast<const char*>(image.valid.data()),
                  std::streamsize(image.valid.size()));
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

RasterImage read_frst(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open raster '" + path.string() + "'");
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kFrstMagic, sizeof magic) != 0)
        throw DataError("'" + path.string() + "' is not an FRST v1 file");
    const std::uint32_t h = read_u32(in), w = read_u32(in), b = read_u32(in);
    char has_mask = 0;
    in.read(&has_mask, 1);
    if (!in || h == 0 || w == 0 || b == 0 || h > (1u << 20) || w > (1u << 20) || b > 4096)
        throw DataError("'" + path.string() + "' has an implausible header");
    RasterImage image{int(h), int(w), int(b)};
    in.read(reinterpret_cast<char*>(image.values.data()),
            std::streamsize(image.values.size() * sizeof(float)));
    if (has_mask) {
        image.valid.resize(image.size());
        in.read(reinterpret_cast<char*>(image.valid.data()), std::streamsize(image.valid.size()));
        // Zero out invalid samples so numeric code never reads them.
        for (std::size_t i = 0; i < image.valid.size(); ++i)
            if (image.valid[i] == 0) image.values[i] = 0.0f;
    }
    if (!in) throw DataError("'" + path.string() + "' is truncated");
    image.validate();
    return image;
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest '" + path.string() + "'");
    const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    std::vector<ManifestRow> rows;
    std::string line;
    bool header_seen = false;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != "date,modality,path,mask_path")
                throw DataError("manifest '" + path.string() +
                                "' has unexpected header '" + line + "'");
            header_seen = true;
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() == 3) fields.emplace_back();  // empty mask_path
        if (fields.size() != 4)
            throw DataError("manifest '" + path.string() + "' line " + std::to_string(line_no) +
                            ": expected 4 fields, got " + std::to_string(fields.size()));
        ManifestRow row;
        row.date = parse_date(fields[0]);
        row.modality = fields[1];
        if (row.modality.empty())
            throw DataError("manifest '" + path.string() + "' line " + std::to_string(line_no) +
                            ": empty modality");
        if (fields[2].empty())
            throw DataError("manifest '" + path.string() + "' line " + std::to_string(line_no) +
                            ": empty path");
        auto resolve = [&base](const std::string& p) -> std::filesystem::path {
            std::filesystem::path fp(p);
            return fp.is_absolute() ? fp : base / fp;
        };
        row.path = resolve(fields[2]);
        if (!fields[3].empty()) row.mask_path = resolve(fields[3]);
        rows.push_back(std::move(row));
    }
    if (!header_seen) throw DataError("manifest '" + path.string() + "' is empty");
    return rows;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows,
                    const std::vector<std::string>& comments) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    for (const auto& c : comments) out << "# " << c << "\n";
    out << "date,modality,path,mask_path\n";
    for (const auto& row : rows) {
        out << format_date(row.date) << ',' << row.modality << ',' << row.path.string() << ','
            << row.mask_path.string() << "\n";
    }
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

}  // namespace kalfuse

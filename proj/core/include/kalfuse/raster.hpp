#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kalfuse/date.hpp"
#include "kalfuse/errors.hpp"

namespace kalfuse {

/// One dated multiband image of one modality. Values are reflectances stored
/// band-sequential, row-major within each band. An empty `valid` vector means
/// every sample is valid; otherwise `valid` holds one flag per sample and the
/// corresponding value of an invalid sample is zeroed so numeric code never
/// reads a sentinel.
struct RasterImage {
    int height = 0;
    int width = 0;
    int bands = 0;
    std::vector<float> values;
    std::vector<std::uint8_t> valid;
    Date date{};
    std::string modality;

    RasterImage() = default;
    RasterImage(int height, int width, int bands, float fill = 0.0f);

    std::size_t n_pixels() const { return std::size_t(height) * std::size_t(width); }
    std::size_t size() const { return n_pixels() * std::size_t(bands); }

    std::size_t offset(int band, int row, int col) const {
        return (std::size_t(band) * height + row) * width + col;
    }
    float& at(int band, int row, int col) { return values[offset(band, row, col)]; }
    float at(int band, int row, int col) const { return values[offset(band, row, col)]; }

    bool is_valid(int band, int row, int col) const {
        return valid.empty() || valid[offset(band, row, col)] != 0;
    }
    bool all_valid() const;

    /// Checks the container invariants (sizes, finiteness, zeroed invalid
    /// samples). Throws DataError / DimensionError.
    void validate() const;
};

/// FRST v1 container: magic "FRST0001", little-endian u32 height/width/bands,
/// u8 has_mask, bands*height*width float32 values (band-sequential,
/// row-major), then the same count of u8 validity flags when has_mask is 1.
void write_frst(const std::filesystem::path& path, const RasterImage& image);
RasterImage read_frst(const std::filesystem::path& path);

/// One row of a dataset manifest.
struct ManifestRow {
    Date date{};
    std::string modality;
    std::filesystem::path path;
    std::filesystem::path mask_path;  // may be empty
};

/// Reads a manifest CSV with header `date,modality,path,mask_path`. Relative
/// raster paths are resolved against the manifest's directory. Lines starting
/// with '#' are ignored.
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

/// Writes a manifest CSV; `comments` are emitted as leading '#' lines. Raster
/// paths are written as given (use paths relative to the manifest location).
void write_manifest(const std::filesystem::path& path,
                    const std::vector<ManifestRow>& rows,
                    const std::vector<std::string>& comments = {});

}  // namespace kalfuse

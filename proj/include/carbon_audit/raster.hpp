#pragma once

#include "carbon_audit/geometry.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace carbon_audit::raster {

// Continuous raster position: (0, 0) is the outer top-left corner, pixel
// centers sit at +0.5. May lie outside the grid.
struct PixelCoord {
    double col = 0.0;
    double row = 0.0;
};

/// Single-band north-up raster in WGS84 degrees. Values are row-major,
/// row 0 northernmost, in t/ha. Immutable after construction.
class GeoGrid {
public:
    // Throws ValidationError when the invariants do not hold: positive
    // dimensions and pixel sizes, values.size() == nrows * ncols, and every
    // value finite unless it equals the nodata sentinel.
    GeoGrid(std::size_t ncols, std::size_t nrows, double origin_lon, double origin_lat, double pixel_width_deg,
            double pixel_height_deg, std::optional<double> nodata, std::vector<double> values);

    std::size_t ncols() const { return ncols_; }
    std::size_t nrows() const { return nrows_; }
    std::size_t size() const { return values_.size(); }
    double origin_lon() const { return origin_lon_; }
    double origin_lat() const { return origin_lat_; }
    double pixel_width_deg() const { return pixel_width_; }
    double pixel_height_deg() const { return pixel_height_; }
    const std::optional<double>& nodata() const { return nodata_; }
    std::span<const double> values() const { return values_; }

    double at(std::size_t row, std::size_t col) const { return values_[row * ncols_ + col]; }
    bool is_nodata(double v) const;
    bool is_nodata_at(std::size_t row, std::size_t col) const { return is_nodata(at(row, col)); }

    geo::BBox extent() const;
    geo::LonLat pixel_center(std::size_t row, std::size_t col) const;

    // Same georeferencing, values multiplied by k (nodata cells untouched).
    GeoGrid scaled(double k) const;

    friend bool operator==(const GeoGrid& a, const GeoGrid& b);

private:
    std::size_t ncols_;
    std::size_t nrows_;
    double origin_lon_;
    double origin_lat_;
    double pixel_width_;
    double pixel_height_;
    std::optional<double> nodata_;
    std::vector<double> values_;
};

// col = (lon - origin_lon) / pixel_width; row = (origin_lat - lat) / pixel_height.
PixelCoord world_to_pixel(const GeoGrid& grid, double lon, double lat);
geo::LonLat pixel_to_world(const GeoGrid& grid, PixelCoord p);

// ESRI ASCII grid. Header keywords are case-insensitive; row 1 is northernmost.
// Throws ParseError with a line/token position on malformed input.
GeoGrid parse_esri_ascii(std::string_view text);

/// Values and header numbers are written with 17 significant digits so that
/// parsing the output reproduces the grid exactly. The lower-left corner is
/// chosen so that yllcorner + nrows * cellsize evaluates back to origin_lat;
/// grids whose origin cannot be expressed that way (rare; never the case for
/// grids that came from an ESRI file) lose the last ulp of origin_lat.
/// Throws UnsupportedFormatError for non-square pixels.
std::string write_esri_ascii(const GeoGrid& grid);

// Minimal GeoTIFF reader: little-endian classic TIFF, one sample per pixel,
// float32 / uint8 / uint16 samples, strips, no compression or Deflate,
// ModelPixelScale + ModelTiepoint georeferencing, optional GDAL_NODATA.
// Anything else throws UnsupportedFormatError naming the feature.
GeoGrid parse_geotiff_subset(std::span<const std::uint8_t> bytes);

// Dispatch on extension (.asc / .tif / .tiff) and read from disk.
GeoGrid load_raster(const std::string& path);

} // namespace carbon_audit::raster

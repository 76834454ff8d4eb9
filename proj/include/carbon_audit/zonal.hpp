#pragma once

#include "carbon_audit/geometry.hpp"
#include "carbon_audit/raster.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace carbon_audit::zonal {

inline constexpr double kDefaultTargetPixelM = 1.0;

// Cell-inclusion rule recorded in reports.
inline constexpr std::string_view kInclusionRule = "pixel-center-in-polygon";

struct ZonalResult {
    double mean_t_per_ha = 0.0;
    std::size_t cell_count = 0;      // valid cells averaged
    std::size_t nodata_count = 0;    // cells inside the polygon without a value
    std::size_t grid_cell_count = 0; // all cells of the regridded bbox
    double target_pixel_m = kDefaultTargetPixelM;
    double polygon_area_ha = 0.0;

    friend bool operator==(const ZonalResult&, const ZonalResult&) = default;
};

/// The "filtered" satellite estimate: the raster is resampled with cubic
/// convolution onto ~target_pixel_m cells over the polygon bounding box, cells
/// whose centers fall inside the polygon are kept, and their valid values
/// are averaged (t/ha).
///
/// The metre-to-degree conversion uses the local projection at the polygon
/// centroid, so cells are square on the ground.
///
/// Throws EmptyZoneError when the polygon misses the raster or keeps no
/// cells, NodataZoneError when every kept cell is nodata, GeometryError for
/// invalid polygons, DomainError for a non-positive target size.
ZonalResult zonal_filtered_mean(const raster::GeoGrid& grid, const geo::GeoPolygon& poly,
                                double target_pixel_m = kDefaultTargetPixelM);

// Serial implementation kept for testing and benchmarking.
ZonalResult zonal_filtered_mean_reference(const raster::GeoGrid& grid, const geo::GeoPolygon& poly,
                                          double target_pixel_m = kDefaultTargetPixelM);

// Regridded lattice used by zonal_filtered_mean (also what the heatmap shows).
raster::GeoGrid zonal_lattice(const raster::GeoGrid& grid, const geo::GeoPolygon& poly,
                              double target_pixel_m = kDefaultTargetPixelM);

// --- GeoJSON site boundaries ---------------------------------------------

struct SiteBoundary {
    std::string site_id;
    std::optional<geo::GeoPolygon> polygon; // empty when `error` is set
    std::optional<double> declared_area_ha;
    std::optional<std::string> error;
    std::vector<std::string> warnings;
};

struct GeoJsonOptions {
    // Accept MultiPolygon geometries with more than one part, keeping the first.
    bool allow_multipolygon = false;
};

/// Reads a FeatureCollection (or a single Feature / bare geometry) of
/// Polygon / MultiPolygon sites in lon-lat order. The site id comes from the
/// `site_id` property (falling back to `id`, then the 1-based feature index);
/// `declared_area_ha` is optional. Problems with one feature are reported on
/// that feature only; malformed JSON throws ParseError.
std::vector<SiteBoundary> parse_sites_geojson(std::string_view text, const GeoJsonOptions& options = {});

} // namespace carbon_audit::zonal

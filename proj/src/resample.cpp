#include "carbon_audit/resample.hpp"

#include "carbon_audit/error.hpp"
#include "carbon_audit/text.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

namespace carbon_audit::raster {

double cubic_kernel(double t) {
    constexpr double a = kKeysA;
    const double x = std::abs(t);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    return 0.0;
}

namespace {

struct Axis {
    std::int64_t base = 0; // index of the sample at or left of the point
    double frac = 0.0;     // in [0, 1)
};

Axis locate(double pixel_coord) {
    // pixel centers sit at +0.5
    const double x = pixel_coord - 0.5;
    Axis a;
    a.base = static_cast<std::int64_t>(std::floor(x));
    a.frac = x - static_cast<double>(a.base);
    if (a.frac < kNodeSnapPx) {
        a.frac = 0.0;
    } else if (a.frac > 1.0 - kNodeSnapPx) {
        a.base += 1;
        a.frac = 0.0;
    }
    return a;
}

std::size_t clamp_index(std::int64_t i, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<std::int64_t>(i, 0, static_cast<std::int64_t>(n) - 1));
}

struct Geometry {
    std::size_t ncols = 0;
    std::size_t nrows = 0;
    double width = 0.0;
    double height = 0.0;
    double west = 0.0;
    double north = 0.0;
    double nodata = kRegridNodata;
};

Geometry plan_regrid(const GeoGrid& grid, double width, double height, const geo::BBox& bbox) {
    if (!(width > 0.0) || !(height > 0.0) || !std::isfinite(width) || !std::isfinite(height)) {
        throw DomainError("regrid: target pixel size must be finite and positive");
    }
    if (!(bbox.east > bbox.west) || !(bbox.north > bbox.south)) throw DomainError("regrid: empty bounding box");
    if (!bbox.intersects(grid.extent())) {
        throw DomainError("regrid: bounding box does not intersect the raster extent");
    }
    Geometry g;
    // 1e-9 guards against a whole-number ratio landing one ulp above itself
    g.ncols = static_cast<std::size_t>(std::max(1.0, std::ceil(bbox.width() / width - 1e-9)));
    g.nrows = static_cast<std::size_t>(std::max(1.0, std::ceil(bbox.height() / height - 1e-9)));
    g.width = width;
    g.height = height;
    g.west = bbox.west;
    g.north = bbox.north;
    if (grid.nodata()) g.nodata = *grid.nodata();
    return g;
}

// Output cell (r, c) expressed in source pixel coordinates.
PixelCoord source_coord(const GeoGrid& grid, const Geometry& g, std::size_t r, std::size_t c) {
    const double col0 = (g.west - grid.origin_lon()) / grid.pixel_width_deg();
    const double row0 = (grid.origin_lat() - g.north) / grid.pixel_height_deg();
    return {col0 + (static_cast<double>(c) + 0.5) * (g.width / grid.pixel_width_deg()),
            row0 + (static_cast<double>(r) + 0.5) * (g.height / grid.pixel_height_deg())};
}

bool inside_extent(const GeoGrid& grid, PixelCoord p) {
    return p.col >= 0.0 && p.row >= 0.0 && p.col <= static_cast<double>(grid.ncols()) &&
           p.row <= static_cast<double>(grid.nrows());
}

double regrid_cell(const GeoGrid& grid, const Geometry& g, std::size_t r, std::size_t c) {
    const auto p = source_coord(grid, g, r, c);
    if (!inside_extent(grid, p)) return g.nodata;
    const auto v = sample_pixel(grid, p);
    return v ? *v : g.nodata;
}

GeoGrid finish(const GeoGrid& grid, const Geometry& g, std::vector<double> values) {
    const bool any_nodata = std::any_of(values.begin(), values.end(), [&](double v) {
        return v == g.nodata || (std::isnan(g.nodata) && std::isnan(v));
    });
    std::optional<double> nodata;
    if (grid.nodata() || any_nodata) nodata = g.nodata;
    return GeoGrid(g.ncols, g.nrows, g.west, g.north, g.width, g.height, nodata, std::move(values));
}

} // namespace

std::optional<double> sample_pixel(const GeoGrid& grid, PixelCoord p) {
    if (!inside_extent(grid, p)) {
        throw OutOfBoundsError("sample at pixel (" + text::format_double(p.col) + ", " + text::format_double(p.row) +
                               ") lies outside the " + std::to_string(grid.ncols()) + "x" +
                               std::to_string(grid.nrows()) + " grid");
    }
    const Axis ax = locate(p.col);
    const Axis ay = locate(p.row);

    std::array<std::size_t, 4> cols{};
    std::array<std::size_t, 4> rows{};
    for (int k = 0; k < 4; ++k) {
        cols[k] = clamp_index(ax.base - 1 + k, grid.ncols());
        rows[k] = clamp_index(ay.base - 1 + k, grid.nrows());
    }

    bool support_has_nodata = false;
    for (auto r : rows) {
        for (auto c : cols) support_has_nodata = support_has_nodata || grid.is_nodata_at(r, c);
    }

    if (support_has_nodata) {
        for (int j = 1; j <= 2; ++j) {
            for (int i = 1; i <= 2; ++i) {
                if (grid.is_nodata_at(rows[j], cols[i])) return std::nullopt;
            }
        }
        const double top = grid.at(rows[1], cols[1]) * (1.0 - ax.frac) + grid.at(rows[1], cols[2]) * ax.frac;
        const double bottom = grid.at(rows[2], cols[1]) * (1.0 - ax.frac) + grid.at(rows[2], cols[2]) * ax.frac;
        return top * (1.0 - ay.frac) + bottom * ay.frac;
    }

    const std::array<double, 4> wx = {cubic_kernel(1.0 + ax.frac), cubic_kernel(ax.frac), cubic_kernel(1.0 - ax.frac),
                                      cubic_kernel(2.0 - ax.frac)};
    const std::array<double, 4> wy = {cubic_kernel(1.0 + ay.frac), cubic_kernel(ay.frac), cubic_kernel(1.0 - ay.frac),
                                      cubic_kernel(2.0 - ay.frac)};

    // Accumulate offsets from the anchor cell: constant supports give the
    // anchor value exactly and node samples return the stored value.
    const double anchor = grid.at(rows[1], cols[1]);
    double acc = 0.0;
    for (int j = 0; j < 4; ++j) {
        double row_acc = 0.0;
        for (int i = 0; i < 4; ++i) row_acc += wx[i] * (grid.at(rows[j], cols[i]) - anchor);
        acc += wy[j] * row_acc;
    }
    return anchor + acc;
}

std::optional<double> bicubic_sample(const GeoGrid& grid, double lon, double lat) {
    if (!std::isfinite(lon) || !std::isfinite(lat)) throw OutOfBoundsError("sample coordinate is not finite");
    return sample_pixel(grid, world_to_pixel(grid, lon, lat));
}

GeoGrid regrid(const GeoGrid& grid, double target_pixel_deg, const geo::BBox& bbox) {
    return regrid(grid, target_pixel_deg, target_pixel_deg, bbox);
}

GeoGrid regrid(const GeoGrid& grid, double target_width_deg, double target_height_deg, const geo::BBox& bbox) {
    const Geometry g = plan_regrid(grid, target_width_deg, target_height_deg, bbox);
    std::vector<double> values(g.ncols * g.nrows);
    const auto nrows = static_cast<std::int64_t>(g.nrows);
    #pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < nrows; ++r) {
        const auto row = static_cast<std::size_t>(r);
        for (std::size_t c = 0; c < g.ncols; ++c) values[row * g.ncols + c] = regrid_cell(grid, g, row, c);
    }
    return finish(grid, g, std::move(values));
}

GeoGrid regrid_reference(const GeoGrid& grid, double target_width_deg, double target_height_deg,
                         const geo::BBox& bbox) {
    const Geometry g = plan_regrid(grid, target_width_deg, target_height_deg, bbox);
    std::vector<double> values(g.ncols * g.nrows);
    for (std::size_t r = 0; r < g.nrows; ++r) {
        for (std::size_t c = 0; c < g.ncols; ++c) values[r * g.ncols + c] = regrid_cell(grid, g, r, c);
    }
    return finish(grid, g, std::move(values));
}

} // namespace carbon_audit::raster

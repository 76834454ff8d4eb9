#pragma once

#include "carbon_audit/crownmatch.hpp"
#include "carbon_audit/geometry.hpp"
#include "carbon_audit/raster.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>

namespace carbon_audit::render {

using Rgb = std::array<std::uint8_t, 3>;

// Linear RGB ramp: minimum value -> kLowColor, maximum -> kHighColor.
inline constexpr Rgb kLowColor = {0xf7, 0xfc, 0xb9};
inline constexpr Rgb kHighColor = {0x00, 0x45, 0x29};

// Color for v on the ramp [lo, hi]; lo == hi maps everything to kLowColor.
Rgb ramp_color(double v, double lo, double hi);

/// Static SVG heatmap of an (already regridded) raster.
///
/// One `<rect class="cell">` per valid cell (nodata cells are left blank),
/// one `<path class="site">` for the polygon, one `<rect class="crown">` per
/// crown, and a legend annotated with the min and max values. Coordinates are
/// printed with fixed precision, so identical inputs give identical bytes.
/// Throws RenderError when the grid has no valid cell.
std::string render_heatmap_svg(const raster::GeoGrid& grid, const geo::GeoPolygon& poly,
                               std::span<const crownmatch::CrownBox> crowns = {});

} // namespace carbon_audit::render

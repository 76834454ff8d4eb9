#pragma once

#include "carbon_audit/raster.hpp"

#include <optional>
#include <string_view>

namespace carbon_audit::raster {

// Recorded in every audit report.
inline constexpr std::string_view kKernelName = "keys-cubic-convolution(a=-0.5)";
inline constexpr double kKeysA = -0.5;

// Sentinel written into regridded cells that have no value, unless the source
// grid already defines one.
inline constexpr double kRegridNodata = -9999.0;

// Offsets closer than this (in pixels) to a pixel center are treated as
// sitting on it, so node reproduction survives coordinate round-off.
inline constexpr double kNodeSnapPx = 1e-9;

/// Keys cubic convolution kernel, a = -0.5.
///   |t| <= 1     : (a+2)|t|^3 - (a+3)|t|^2 + 1
///   1 < |t| < 2  : a|t|^3 - 5a|t|^2 + 8a|t| - 4a
///   otherwise    : 0
double cubic_kernel(double t);

/// Separable 4x4 cubic convolution on pixel-center values with clamp
/// (edge-replicate) padding.
///
/// Nodata handling: when any cell of the 4x4 support is nodata the sample
/// falls back to bilinear on the central 2x2; if that also touches nodata the
/// result is nullopt. Throws OutOfBoundsError outside the grid extent.
std::optional<double> sample_pixel(const GeoGrid& grid, PixelCoord p);
std::optional<double> bicubic_sample(const GeoGrid& grid, double lon, double lat);

/// Resamples `grid` onto a lattice anchored at the bbox north-west corner,
/// snapped outward to whole target pixels. Output pixel centers outside the
/// source extent, or whose sample is nodata, hold the output nodata value.
/// Rows are evaluated in parallel; the result is bit-identical to
/// regrid_reference for any thread count.
/// Throws DomainError for non-positive sizes or a bbox that misses the grid.
GeoGrid regrid(const GeoGrid& grid, double target_pixel_deg, const geo::BBox& bbox);
GeoGrid regrid(const GeoGrid& grid, double target_width_deg, double target_height_deg, const geo::BBox& bbox);

// Serial implementation kept for testing and benchmarking.
GeoGrid regrid_reference(const GeoGrid& grid, double target_width_deg, double target_height_deg,
                         const geo::BBox& bbox);

} // namespace carbon_audit::raster

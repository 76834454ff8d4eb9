#include "carbon_audit/render.hpp"

#include "carbon_audit/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace carbon_audit::render {

namespace {

constexpr double kTargetSize = 600.0;
constexpr double kLegendHeight = 48.0;

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string hex(Rgb c) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
    return buf;
}

} // namespace

Rgb ramp_color(double v, double lo, double hi) {
    double t = hi > lo ? (v - lo) / (hi - lo) : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    Rgb out{};
    for (int k = 0; k < 3; ++k) {
        const double c = kLowColor[k] + t * (static_cast<double>(kHighColor[k]) - kLowColor[k]);
        out[k] = static_cast<std::uint8_t>(std::lround(c));
    }
    return out;
}

std::string render_heatmap_svg(const raster::GeoGrid& grid, const geo::GeoPolygon& poly,
                               std::span<const crownmatch::CrownBox> crowns) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : grid.values()) {
        if (grid.is_nodata(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!std::isfinite(lo)) throw RenderError("heatmap: raster has no valid cells");
    if (grid.ncols() == 0 || grid.nrows() == 0) throw RenderError("heatmap: degenerate raster extent");

    const double cell = kTargetSize / static_cast<double>(std::max(grid.ncols(), grid.nrows()));
    const double width = cell * static_cast<double>(grid.ncols());
    const double height = cell * static_cast<double>(grid.nrows());
    const auto to_x = [&](double lon) { return (lon - grid.origin_lon()) / grid.pixel_width_deg() * cell; };
    const auto to_y = [&](double lat) { return (grid.origin_lat() - lat) / grid.pixel_height_deg() * cell; };

    std::string svg;
    svg.reserve(grid.size() * 80 + 1024);
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) + "\" height=\"" +
           fmt(height + kLegendHeight) + "\" viewBox=\"0 0 " + fmt(width) + " " + fmt(height + kLegendHeight) +
           "\">\n";
    svg += "<defs><linearGradient id=\"ramp\" x1=\"0\" x2=\"1\" y1=\"0\" y2=\"0\"><stop offset=\"0\" stop-color=\"" +
           hex(kLowColor) + "\"/><stop offset=\"1\" stop-color=\"" + hex(kHighColor) +
           "\"/></linearGradient></defs>\n";
    svg += "<g id=\"cells\" shape-rendering=\"crispEdges\">\n";
    for (std::size_t r = 0; r < grid.nrows(); ++r) {
        for (std::size_t c = 0; c < grid.ncols(); ++c) {
            const double v = grid.at(r, c);
            if (grid.is_nodata(v)) continue;
            svg += "<rect class=\"cell\" x=\"" + fmt(static_cast<double>(c) * cell) + "\" y=\"" +
                   fmt(static_cast<double>(r) * cell) + "\" width=\"" + fmt(cell) + "\" height=\"" + fmt(cell) +
                   "\" fill=\"" + hex(ramp_color(v, lo, hi)) + "\"/>\n";
        }
    }
    svg += "</g>\n";

    std::string d;
    auto ring_path = [&](const geo::Ring& ring) {
        const auto pts = geo::normalized_ring(ring);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            d += (i == 0 ? "M" : " L") + fmt(to_x(pts[i].lon)) + " " + fmt(to_y(pts[i].lat));
        }
        d += " Z ";
    };
    ring_path(poly.exterior);
    for (const auto& h : poly.holes) ring_path(h);
    d.pop_back();
    svg += "<path class=\"site\" d=\"" + d + "\" fill=\"none\" fill-rule=\"evenodd\" stroke=\"#d7301f\" stroke-width=\"2\"/>\n";

    for (const auto& crown : crowns) {
        const double x0 = to_x(crown.min_lon);
        const double y0 = to_y(crown.max_lat);
        svg += "<rect class=\"crown\" x=\"" + fmt(x0) + "\" y=\"" + fmt(y0) + "\" width=\"" +
               fmt(to_x(crown.max_lon) - x0) + "\" height=\"" + fmt(to_y(crown.min_lat) - y0) +
               "\" fill=\"none\" stroke=\"#2b8cbe\" stroke-width=\"1\"/>\n";
    }

    const double ly = height + 8.0;
    svg += "<rect class=\"legend\" x=\"0.000\" y=\"" + fmt(ly) + "\" width=\"" + fmt(width) +
           "\" height=\"16.000\" fill=\"url(#ramp)\"/>\n";
    svg += "<text class=\"legend-min\" x=\"0.000\" y=\"" + fmt(ly + 34.0) +
           "\" font-family=\"sans-serif\" font-size=\"12\">min " + fmt(lo) + " t/ha</text>\n";
    svg += "<text class=\"legend-max\" x=\"" + fmt(width) + "\" y=\"" + fmt(ly + 34.0) +
           "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">max " + fmt(hi) + " t/ha</text>\n";
    svg += "</svg>\n";
    return svg;
}

} // namespace carbon_audit::render

#include "carbon_audit/zonal.hpp"

#include "carbon_audit/error.hpp"
#include "carbon_audit/resample.hpp"
#include "carbon_audit/text.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>

namespace carbon_audit::zonal {

namespace {

struct Plan {
    geo::PolygonArea area;
    double width_deg = 0.0;
    double height_deg = 0.0;
    geo::BBox box;
};

Plan plan_zone(const raster::GeoGrid& grid, const geo::GeoPolygon& poly, double target_pixel_m) {
    if (!(target_pixel_m > 0.0) || !std::isfinite(target_pixel_m)) {
        throw DomainError("target pixel size must be finite and positive, got " + text::format_double(target_pixel_m));
    }
    Plan p;
    p.area = geo::polygon_area(poly);
    const geo::LocalProjection proj(geo::centroid(poly));
    p.width_deg = target_pixel_m * proj.lon_deg_per_m();
    p.height_deg = target_pixel_m * proj.lat_deg_per_m();
    p.box = geo::bbox(poly);
    if (!p.box.intersects(grid.extent())) throw EmptyZoneError("polygon does not overlap the raster extent");
    return p;
}

struct RowStats {
    std::size_t kept = 0;
    std::size_t nodata = 0;
    std::optional<double> first_valid;
    double sum = 0.0; // of (value - anchor)
    double comp = 0.0;
};

void kahan_add(double& sum, double& comp, double x) {
    const double y = x - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
}

ZonalResult assemble(const Plan& plan, const raster::GeoGrid& fine, double target_pixel_m, std::size_t valid,
                     std::size_t nodata, std::size_t kept, double mean) {
    if (kept == 0) throw EmptyZoneError("no regridded cell center falls inside the polygon");
    if (valid == 0) throw NodataZoneError("all " + std::to_string(kept) + " cells inside the polygon are nodata");
    ZonalResult out;
    out.mean_t_per_ha = mean;
    out.cell_count = valid;
    out.nodata_count = nodata;
    out.grid_cell_count = fine.size();
    out.target_pixel_m = target_pixel_m;
    out.polygon_area_ha = plan.area.hectares;
    return out;
}

} // namespace

raster::GeoGrid zonal_lattice(const raster::GeoGrid& grid, const geo::GeoPolygon& poly, double target_pixel_m) {
    const Plan plan = plan_zone(grid, poly, target_pixel_m);
    return raster::regrid(grid, plan.width_deg, plan.height_deg, plan.box);
}

ZonalResult zonal_filtered_mean(const raster::GeoGrid& grid, const geo::GeoPolygon& poly, double target_pixel_m) {
    const geo::PreparedPolygon prepared(poly);
    const Plan plan = plan_zone(grid, poly, target_pixel_m);
    const auto fine = raster::regrid(grid, plan.width_deg, plan.height_deg, plan.box);

    const auto nrows = static_cast<std::int64_t>(fine.nrows());
    std::vector<RowStats> stats(fine.nrows());
    std::vector<std::uint8_t> keep(fine.size(), 0);

    #pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < nrows; ++r) {
        const auto row = static_cast<std::size_t>(r);
        auto& s = stats[row];
        for (std::size_t c = 0; c < fine.ncols(); ++c) {
            const auto center = fine.pixel_center(row, c);
            if (!prepared.contains(center.lon, center.lat)) continue;
            ++s.kept;
            if (fine.is_nodata_at(row, c)) {
                ++s.nodata;
                continue;
            }
            keep[row * fine.ncols() + c] = 1;
            if (!s.first_valid) s.first_valid = fine.at(row, c);
        }
    }

    // The first valid value in row-major order anchors the sum so that a
    // constant field averages back to itself exactly.
    std::optional<double> anchor;
    for (const auto& s : stats) {
        if (s.first_valid) {
            anchor = s.first_valid;
            break;
        }
    }
    const double a = anchor.value_or(0.0);

    #pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < nrows; ++r) {
        const auto row = static_cast<std::size_t>(r);
        auto& s = stats[row];
        for (std::size_t c = 0; c < fine.ncols(); ++c) {
            if (keep[row * fine.ncols() + c]) kahan_add(s.sum, s.comp, fine.at(row, c) - a);
        }
    }

    std::size_t kept = 0;
    std::size_t nodata = 0;
    double sum = 0.0;
    double comp = 0.0;
    for (const auto& s : stats) {
        kept += s.kept;
        nodata += s.nodata;
        kahan_add(sum, comp, s.sum);
    }
    const std::size_t valid = kept - nodata;
    const double mean = valid ? a + sum / static_cast<double>(valid) : 0.0;
    return assemble(plan, fine, target_pixel_m, valid, nodata, kept, mean);
}

ZonalResult zonal_filtered_mean_reference(const raster::GeoGrid& grid, const geo::GeoPolygon& poly,
                                          double target_pixel_m) {
    const Plan plan = plan_zone(grid, poly, target_pixel_m);
    const auto fine = raster::regrid_reference(grid, plan.width_deg, plan.height_deg, plan.box);

    std::size_t kept = 0;
    std::size_t nodata = 0;
    std::vector<double> kept_values;
    for (std::size_t r = 0; r < fine.nrows(); ++r) {
        for (std::size_t c = 0; c < fine.ncols(); ++c) {
            const auto center = fine.pixel_center(r, c);
            if (!geo::point_in_polygon(poly, center.lon, center.lat)) continue;
            ++kept;
            if (fine.is_nodata_at(r, c)) {
                ++nodata;
            } else {
                kept_values.push_back(fine.at(r, c));
            }
        }
    }
    double mean = 0.0;
    if (!kept_values.empty()) {
        const double a = kept_values.front();
        double sum = 0.0;
        for (double v : kept_values) sum += v - a;
        mean = a + sum / static_cast<double>(kept_values.size());
    }
    return assemble(plan, fine, target_pixel_m, kept_values.size(), nodata, kept, mean);
}

// ---------------------------------------------------------------------------
// GeoJSON

namespace {

using nlohmann::json;

geo::Ring ring_from_json(const json& coords) {
    if (!coords.is_array()) throw ParseError("ring is not an array of positions");
    geo::Ring ring;
    for (const auto& pos : coords) {
        if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number()) {
            throw ParseError("position is not a [lon, lat] pair");
        }
        ring.push_back({pos[0].get<double>(), pos[1].get<double>()});
    }
    return ring;
}

geo::GeoPolygon polygon_from_json(const json& rings) {
    if (!rings.is_array() || rings.empty()) throw ParseError("polygon has no rings");
    geo::GeoPolygon poly;
    poly.exterior = ring_from_json(rings[0]);
    for (std::size_t i = 1; i < rings.size(); ++i) poly.holes.push_back(ring_from_json(rings[i]));
    return poly;
}

SiteBoundary site_from_feature(const json& feature, std::size_t index, const GeoJsonOptions& options) {
    SiteBoundary site;
    site.site_id = std::to_string(index + 1);
    const json* props = nullptr;
    if (feature.contains("properties") && feature["properties"].is_object()) props = &feature["properties"];
    if (props && props->contains("site_id")) {
        const auto& v = (*props)["site_id"];
        site.site_id = v.is_string() ? v.get<std::string>() : v.dump();
    } else if (feature.contains("id")) {
        const auto& v = feature["id"];
        site.site_id = v.is_string() ? v.get<std::string>() : v.dump();
    }
    try {
        if (props && props->contains("declared_area_ha") && !(*props)["declared_area_ha"].is_null()) {
            const auto& v = (*props)["declared_area_ha"];
            if (!v.is_number() || !(v.get<double>() > 0.0)) throw ParseError("declared_area_ha must be a positive number");
            site.declared_area_ha = v.get<double>();
        }
        const json& geom = feature.contains("geometry") ? feature["geometry"] : feature;
        if (!geom.is_object() || !geom.contains("type")) throw ParseError("feature has no geometry");
        const auto type = geom["type"].get<std::string>();
        if (!geom.contains("coordinates")) throw ParseError("geometry has no coordinates");
        geo::GeoPolygon poly;
        if (type == "Polygon") {
            poly = polygon_from_json(geom["coordinates"]);
        } else if (type == "MultiPolygon") {
            const auto& parts = geom["coordinates"];
            if (!parts.is_array() || parts.empty()) throw ParseError("MultiPolygon has no parts");
            if (parts.size() > 1) {
                if (!options.allow_multipolygon) {
                    throw GeometryError("MultiPolygon with " + std::to_string(parts.size()) +
                                        " parts; only the first part is a site (enable multipolygon support to keep it)");
                }
                site.warnings.push_back("MultiPolygon: ignored " + std::to_string(parts.size() - 1) +
                                        " additional part(s)");
            }
            poly = polygon_from_json(parts[0]);
        } else {
            throw ParseError("unsupported geometry type '" + type + "' (Polygon or MultiPolygon expected)");
        }
        const auto issues = geo::validation_issues(poly);
        if (!issues.empty()) {
            std::string msg = "invalid polygon:";
            for (const auto& i : issues) msg += " " + i + ";";
            msg.pop_back();
            throw GeometryError(msg);
        }
        site.polygon = std::move(poly);
    } catch (const Error& e) {
        site.error = e.what();
    } catch (const json::exception& e) {
        site.error = std::string("GeoJSON: ") + e.what();
    }
    return site;
}

} // namespace

std::vector<SiteBoundary> parse_sites_geojson(std::string_view content, const GeoJsonOptions& options) {
    json doc;
    try {
        doc = json::parse(content);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("GeoJSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("type")) throw ParseError("GeoJSON: top-level object with a 'type' expected");
    std::vector<SiteBoundary> out;
    const auto type = doc["type"].is_string() ? doc["type"].get<std::string>() : std::string();
    if (type == "FeatureCollection") {
        if (!doc.contains("features") || !doc["features"].is_array()) throw ParseError("GeoJSON: missing features");
        std::size_t i = 0;
        for (const auto& f : doc["features"]) out.push_back(site_from_feature(f, i++, options));
    } else if (type == "Feature" || type == "Polygon" || type == "MultiPolygon") {
        out.push_back(site_from_feature(doc, 0, options));
    } else {
        throw ParseError("GeoJSON: unsupported top-level type '" + type + "'");
    }
    return out;
}

} // namespace carbon_audit::zonal

#include "carbon_audit/geometry.hpp"

#include "carbon_audit/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace carbon_audit::geo {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
// Boundary snapping tolerance in degrees (about 1 micrometre on the ground).
constexpr double kBoundaryTolDeg = 1e-11;

bool on_segment(LonLat a, LonLat b, double px, double py) {
    const double dx = b.lon - a.lon;
    const double dy = b.lat - a.lat;
    const double len = std::hypot(dx, dy);
    const double cross = dx * (py - a.lat) - dy * (px - a.lon);
    // |cross| / len is the perpendicular distance to the supporting line
    if (std::abs(cross) > kBoundaryTolDeg * len) return false;
    return px >= std::min(a.lon, b.lon) - kBoundaryTolDeg && px <= std::max(a.lon, b.lon) + kBoundaryTolDeg &&
           py >= std::min(a.lat, b.lat) - kBoundaryTolDeg && py <= std::max(a.lat, b.lat) + kBoundaryTolDeg;
}

bool on_ring_boundary(const Ring& ring, double px, double py) {
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        if (on_segment(ring[j], ring[i], px, py)) return true;
    }
    return false;
}

// PNPOLY crossing test.
bool ray_cast(const Ring& ring, double px, double py) {
    bool inside = false;
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const auto& a = ring[i];
        const auto& b = ring[j];
        if ((a.lat > py) != (b.lat > py)) {
            const double x_cross = (b.lon - a.lon) * (py - a.lat) / (b.lat - a.lat) + a.lon;
            if (px < x_cross) inside = !inside;
        }
    }
    return inside;
}

double orient(LonLat a, LonLat b, LonLat c) {
    return (b.lon - a.lon) * (c.lat - a.lat) - (b.lat - a.lat) * (c.lon - a.lon);
}

bool within_box(LonLat a, LonLat b, LonLat p) {
    return p.lon >= std::min(a.lon, b.lon) && p.lon <= std::max(a.lon, b.lon) && p.lat >= std::min(a.lat, b.lat) &&
           p.lat <= std::max(a.lat, b.lat);
}

bool segments_touch(LonLat p1, LonLat p2, LonLat q1, LonLat q2) {
    const double d1 = orient(q1, q2, p1);
    const double d2 = orient(q1, q2, p2);
    const double d3 = orient(p1, p2, q1);
    const double d4 = orient(p1, p2, q2);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
    if (d1 == 0 && within_box(q1, q2, p1)) return true;
    if (d2 == 0 && within_box(q1, q2, p2)) return true;
    if (d3 == 0 && within_box(p1, p2, q1)) return true;
    if (d4 == 0 && within_box(p1, p2, q2)) return true;
    return false;
}

bool ring_self_intersects(const Ring& ring) {
    const std::size_t n = ring.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto a1 = ring[i];
        const auto a2 = ring[(i + 1) % n];
        for (std::size_t j = i + 1; j < n; ++j) {
            // adjacent edges share a vertex
            if (j == i + 1 || (i == 0 && j == n - 1)) continue;
            if (segments_touch(a1, a2, ring[j], ring[(j + 1) % n])) return true;
        }
    }
    return false;
}

double shoelace_m2(const Ring& ring, const LocalProjection& proj) {
    // Twice the signed area, accumulated relative to the first vertex.
    const auto p0 = proj.forward(ring[0]);
    double twice = 0.0;
    for (std::size_t i = 1; i + 1 < ring.size(); ++i) {
        const auto a = proj.forward(ring[i]);
        const auto b = proj.forward(ring[i + 1]);
        twice += (a.x - p0.x) * (b.y - p0.y) - (b.x - p0.x) * (a.y - p0.y);
    }
    return std::abs(twice) / 2.0;
}

double point_segment_distance(PlaneXY p, PlaneXY a, PlaneXY b) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

} // namespace

LocalProjection::LocalProjection(LonLat origin) : origin_(origin), cos_lat0_(std::cos(origin.lat * kDegToRad)) {}

PlaneXY LocalProjection::forward(LonLat p) const {
    return {kEarthRadiusM * (p.lon - origin_.lon) * kDegToRad * cos_lat0_,
            kEarthRadiusM * (p.lat - origin_.lat) * kDegToRad};
}

LonLat LocalProjection::inverse(PlaneXY p) const {
    return {origin_.lon + p.x / (kEarthRadiusM * cos_lat0_) / kDegToRad, origin_.lat + p.y / kEarthRadiusM / kDegToRad};
}

double LocalProjection::lon_deg_per_m() const { return 1.0 / (kEarthRadiusM * kDegToRad * cos_lat0_); }
double LocalProjection::lat_deg_per_m() const { return 1.0 / (kEarthRadiusM * kDegToRad); }

Ring normalized_ring(const Ring& ring, const std::string& what) {
    Ring out = ring;
    while (out.size() > 1 && out.front() == out.back()) out.pop_back();
    Ring distinct = out;
    std::sort(distinct.begin(), distinct.end(),
              [](const LonLat& a, const LonLat& b) { return a.lon < b.lon || (a.lon == b.lon && a.lat < b.lat); });
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 3) {
        throw GeometryError(what + " has " + std::to_string(distinct.size()) +
                            " distinct vertices; at least 3 are required");
    }
    for (const auto& p : out) {
        if (!std::isfinite(p.lon) || !std::isfinite(p.lat)) throw GeometryError(what + " has a non-finite vertex");
    }
    return out;
}

LonLat centroid(const GeoPolygon& poly) {
    const auto ring = normalized_ring(poly.exterior, "exterior ring");
    double lon = 0.0;
    double lat = 0.0;
    for (const auto& p : ring) {
        lon += p.lon;
        lat += p.lat;
    }
    const auto n = static_cast<double>(ring.size());
    return {lon / n, lat / n};
}

BBox bbox(const GeoPolygon& poly) {
    if (poly.exterior.empty()) throw GeometryError("polygon has no exterior ring");
    BBox b{poly.exterior[0].lon, poly.exterior[0].lat, poly.exterior[0].lon, poly.exterior[0].lat};
    for (const auto& p : poly.exterior) {
        b.west = std::min(b.west, p.lon);
        b.east = std::max(b.east, p.lon);
        b.south = std::min(b.south, p.lat);
        b.north = std::max(b.north, p.lat);
    }
    return b;
}

std::vector<std::string> validation_issues(const GeoPolygon& poly) {
    std::vector<std::string> issues;
    Ring exterior;
    try {
        exterior = normalized_ring(poly.exterior, "exterior ring");
    } catch (const GeometryError& e) {
        issues.emplace_back(e.what());
        return issues;
    }
    if (ring_self_intersects(exterior)) issues.emplace_back("exterior ring self-intersects");
    for (std::size_t h = 0; h < poly.holes.size(); ++h) {
        const auto name = "hole " + std::to_string(h + 1);
        try {
            auto hole = normalized_ring(poly.holes[h], name);
            if (ring_self_intersects(hole)) issues.push_back(name + " self-intersects");
            for (const auto& p : hole) {
                if (!ray_cast(exterior, p.lon, p.lat) && !on_ring_boundary(exterior, p.lon, p.lat)) {
                    issues.push_back(name + " is not enclosed by the exterior ring");
                    break;
                }
            }
        } catch (const GeometryError& e) {
            issues.emplace_back(e.what());
        }
    }
    return issues;
}

PreparedPolygon::PreparedPolygon(const GeoPolygon& poly) : exterior_(normalized_ring(poly.exterior, "exterior ring")) {
    for (std::size_t h = 0; h < poly.holes.size(); ++h) {
        holes_.push_back(normalized_ring(poly.holes[h], "hole " + std::to_string(h + 1)));
    }
}

bool PreparedPolygon::contains(double lon, double lat) const {
    if (on_ring_boundary(exterior_, lon, lat)) return true;
    if (!ray_cast(exterior_, lon, lat)) return false;
    for (const auto& hole : holes_) {
        if (on_ring_boundary(hole, lon, lat)) return true;
        if (ray_cast(hole, lon, lat)) return false;
    }
    return true;
}

bool point_in_polygon(const GeoPolygon& poly, double lon, double lat) {
    return PreparedPolygon(poly).contains(lon, lat);
}

PolygonArea polygon_area(const GeoPolygon& poly) {
    const auto exterior = normalized_ring(poly.exterior, "exterior ring");
    const auto box = bbox(poly);
    if (box.width() >= kMaxLocalExtentDeg || box.height() >= kMaxLocalExtentDeg) {
        throw UnsupportedExtentError("polygon extent " + std::to_string(box.width()) + " x " +
                                     std::to_string(box.height()) +
                                     " deg is too large for the local equirectangular projection (limit " +
                                     std::to_string(kMaxLocalExtentDeg) + " deg)");
    }
    const LocalProjection proj(centroid(poly));
    double m2 = shoelace_m2(exterior, proj);
    for (std::size_t h = 0; h < poly.holes.size(); ++h) {
        m2 -= shoelace_m2(normalized_ring(poly.holes[h], "hole " + std::to_string(h + 1)), proj);
    }
    const auto sw = proj.forward({box.west, box.south});
    const auto ne = proj.forward({box.east, box.north});
    const double box_m2 = std::abs((ne.x - sw.x) * (ne.y - sw.y));
    const double diag2 = (ne.x - sw.x) * (ne.x - sw.x) + (ne.y - sw.y) * (ne.y - sw.y);
    PolygonArea out;
    out.degenerate = m2 <= 1e-12 * diag2 || box_m2 == 0.0;
    out.hectares = out.degenerate ? 0.0 : m2 / kSquareMetersPerHectare;
    return out;
}

double polygon_area_ha(const GeoPolygon& poly) { return polygon_area(poly).hectares; }

double distance_outside_m(const GeoPolygon& poly, double lon, double lat) {
    if (point_in_polygon(poly, lon, lat)) return 0.0;
    const LocalProjection proj(centroid(poly));
    const auto p = proj.forward({lon, lat});
    double best = std::numeric_limits<double>::infinity();
    auto scan = [&](const Ring& ring) {
        const std::size_t n = ring.size();
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
            best = std::min(best, point_segment_distance(p, proj.forward(ring[j]), proj.forward(ring[i])));
        }
    };
    scan(normalized_ring(poly.exterior));
    for (const auto& h : poly.holes) scan(normalized_ring(h));
    return best;
}

} // namespace carbon_audit::geo

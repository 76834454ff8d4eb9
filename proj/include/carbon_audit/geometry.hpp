#pragma once

#include <string>
#include <vector>

namespace carbon_audit::geo {

// Authalic Earth radius (m) used for every local metric projection.
inline constexpr double kEarthRadiusM = 6371007.181;
inline constexpr double kSquareMetersPerHectare = 10000.0;

// Local projections are only accepted for polygons smaller than this (degrees).
inline constexpr double kMaxLocalExtentDeg = 0.5;

struct LonLat {
    double lon = 0.0;
    double lat = 0.0;
    friend bool operator==(const LonLat&, const LonLat&) = default;
};

struct PlaneXY {
    double x = 0.0;
    double y = 0.0;
};

using Ring = std::vector<LonLat>;

// Exterior ring plus optional holes, lon/lat degrees (WGS84).
// Rings are implicitly closed; a repeated closing vertex is tolerated.
struct GeoPolygon {
    Ring exterior;
    std::vector<Ring> holes;
};

struct BBox {
    double west = 0.0;
    double south = 0.0;
    double east = 0.0;
    double north = 0.0;

    double width() const { return east - west; }
    double height() const { return north - south; }
    bool intersects(const BBox& o) const {
        return west < o.east && o.west < east && south < o.north && o.south < north;
    }
};

/// Equirectangular projection about a reference point:
/// x = R * dlon * cos(lat0), y = R * dlat (angles in radians).
class LocalProjection {
public:
    explicit LocalProjection(LonLat origin);

    PlaneXY forward(LonLat p) const;
    LonLat inverse(PlaneXY p) const;

    // Degrees spanned by one meter along each axis at the origin.
    double lon_deg_per_m() const;
    double lat_deg_per_m() const;

    LonLat origin() const { return origin_; }

private:
    LonLat origin_;
    double cos_lat0_;
};

// Drops a duplicated closing vertex and checks >= 3 distinct vertices.
// Throws GeometryError naming `what` otherwise.
Ring normalized_ring(const Ring& ring, const std::string& what = "ring");

// Arithmetic mean of the distinct exterior vertices.
LonLat centroid(const GeoPolygon& poly);
BBox bbox(const GeoPolygon& poly);

// Structural checks beyond vertex count: ring self-intersection and holes
// lying inside the exterior. Returns human-readable problems (empty = valid).
std::vector<std::string> validation_issues(const GeoPolygon& poly);

/// Even-odd ray casting in the lon/lat plane. Points on any ring boundary
/// count as inside; points strictly inside a hole are outside.
/// Throws GeometryError for rings with fewer than 3 distinct vertices.
bool point_in_polygon(const GeoPolygon& poly, double lon, double lat);

// Rings normalized once, for repeated containment queries.
class PreparedPolygon {
public:
    explicit PreparedPolygon(const GeoPolygon& poly);
    bool contains(double lon, double lat) const;

private:
    Ring exterior_;
    std::vector<Ring> holes_;
};

struct PolygonArea {
    double hectares = 0.0;
    bool degenerate = false;
};

/// Shoelace area on the local projection about the polygon centroid, holes
/// subtracted. Throws UnsupportedExtentError when the polygon spans
/// kMaxLocalExtentDeg or more in either direction.
PolygonArea polygon_area(const GeoPolygon& poly);
double polygon_area_ha(const GeoPolygon& poly);

// Planar distance (m) from a point to the nearest ring edge; 0 when inside.
double distance_outside_m(const GeoPolygon& poly, double lon, double lat);

} // namespace carbon_audit::geo

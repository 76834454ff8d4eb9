#include "carbon_audit/error.hpp"
#include "carbon_audit/resample.hpp"
#include "carbon_audit/zonal.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace carbon_audit;
using namespace carbon_audit::zonal;

namespace {

// Independent even-odd test for the oracle (no boundary handling needed:
// dense samples never land exactly on an edge).
bool inside(const geo::Ring& ring, double x, double y) {
    bool in = false;
    for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
        const auto& a = ring[i];
        const auto& b = ring[j];
        if ((a.lat > y) != (b.lat > y) && x < (b.lon - a.lon) * (y - a.lat) / (b.lat - a.lat) + a.lon) in = !in;
    }
    return in;
}

geo::GeoPolygon irregular(geo::LonLat c) {
    // ~0.5 ha concave heptagon, metres about c
    const std::vector<std::pair<double, double>> xy = {{-45, -30}, {10, -42}, {48, -20}, {30, 8},
                                                       {44, 38},   {-5, 30},  {-38, 22}};
    const geo::LocalProjection proj(c);
    geo::GeoPolygon p;
    for (auto [x, y] : xy) p.exterior.push_back(proj.inverse({x, y}));
    return p;
}

// Center of the smooth test raster; sites sit well inside it.
const geo::LonLat kCenter{synth::kOriginLon + 20 * synth::kPixelDeg, synth::kOriginLat - 20 * synth::kPixelDeg};

} // namespace

TEST(Zonal, ConstantFieldExact) {
    const auto g = synth::constant_grid(40, 100.0);
    for (double m : {1.0, 0.5, 2.5}) {
        const auto r = zonal_filtered_mean(g, irregular(kCenter), m);
        EXPECT_EQ(r.mean_t_per_ha, 100.0);
        EXPECT_GT(r.cell_count, 0u);
        EXPECT_EQ(r.nodata_count, 0u);
    }
    EXPECT_EQ(zonal_filtered_mean(g, synth::square_ha(kCenter, 0.5)).mean_t_per_ha, 100.0);
}

TEST(Zonal, LinearRampMatchesClosedForm) {
    // f(col, row) = 80 + 3 col - 2 row on pixel centers; over a rectangle the
    // average of a linear field is its value at the rectangle center
    const auto g = synth::grid_from(40, 40, synth::kOriginLon, synth::kOriginLat, synth::kPixelDeg,
                                    [](double c, double r) { return 80.0 + 3.0 * c - 2.0 * r; });
    for (double ha : {0.3, 0.5, 0.62}) {
        const auto poly = synth::square_ha(kCenter, ha);
        const auto b = geo::bbox(poly);
        const auto mid = raster::world_to_pixel(g, (b.west + b.east) / 2, (b.north + b.south) / 2);
        const double expected = 80.0 + 3.0 * (mid.col - 0.5) - 2.0 * (mid.row - 0.5);
        const double got = zonal_filtered_mean(g, poly).mean_t_per_ha;
        EXPECT_LT(std::abs(got - expected) / expected, 0.005) << ha << ": " << got << " vs " << expected;
    }
}

TEST(Zonal, IrregularPolygonMatchesDenseBruteForce) {
    const auto g = synth::smooth_grid(40, 9);
    const std::vector<double> v(g.values().begin(), g.values().end());
    const auto poly = irregular(kCenter);
    const auto got = zonal_filtered_mean(g, poly, 1.0).mean_t_per_ha;

    // Oracle: naive kernel sampled on a 0.1 m lattice over the bbox
    const auto box = geo::bbox(poly);
    const geo::LocalProjection proj(kCenter);
    const double dlon = 0.1 * proj.lon_deg_per_m();
    const double dlat = 0.1 * proj.lat_deg_per_m();
    double sum = 0.0;
    std::size_t n = 0;
    for (double lat = box.north - dlat / 2; lat > box.south; lat -= dlat) {
        for (double lon = box.west + dlon / 2; lon < box.east; lon += dlon) {
            if (!inside(poly.exterior, lon, lat)) continue;
            const double col = (lon - g.origin_lon()) / g.pixel_width_deg();
            const double row = (g.origin_lat() - lat) / g.pixel_height_deg();
            sum += oracle::naive_bicubic(v, 40, 40, col, row);
            ++n;
        }
    }
    ASSERT_GT(n, 100000u);
    const double want = sum / static_cast<double>(n);
    EXPECT_LT(std::abs(got - want) / want, 0.005) << got << " vs " << want;
}

TEST(ZonalProperty, ResolutionStability) {
    for (unsigned seed : {1u, 2u, 3u}) {
        const auto g = synth::smooth_grid(40, seed);
        for (const auto& poly : {irregular(kCenter), synth::square_ha(kCenter, 0.5)}) {
            const double m1 = zonal_filtered_mean(g, poly, 1.0).mean_t_per_ha;
            const double m05 = zonal_filtered_mean(g, poly, 0.5).mean_t_per_ha;
            EXPECT_LT(std::abs(m1 - m05) / m1, 0.005);
        }
    }
}

TEST(ZonalProperty, FullBboxPolygonKeepsEveryCell) {
    const auto g = synth::smooth_grid(40, 4);
    const geo::LocalProjection proj(kCenter);
    // a rectangle spanning just under whole target cells, so the lattice has no spill-over column;
    // corner subtraction near lon -80.5 costs ~1e-9 in the cell ratio, hence the margin
    const double w = 57 * proj.lon_deg_per_m() * (1 - 1e-7);
    const double h = 83 * proj.lat_deg_per_m() * (1 - 1e-7);
    const geo::GeoPolygon rect{{{kCenter.lon - w / 2, kCenter.lat - h / 2},
                                {kCenter.lon + w / 2, kCenter.lat - h / 2},
                                {kCenter.lon + w / 2, kCenter.lat + h / 2},
                                {kCenter.lon - w / 2, kCenter.lat + h / 2}},
                               {}};
    const auto full = zonal_filtered_mean(g, rect);
    EXPECT_EQ(full.grid_cell_count, 57u * 83u);
    EXPECT_EQ(full.cell_count, full.grid_cell_count);

    geo::GeoPolygon diamond{{{kCenter.lon, kCenter.lat - h / 2},
                             {kCenter.lon + w / 2, kCenter.lat},
                             {kCenter.lon, kCenter.lat + h / 2},
                             {kCenter.lon - w / 2, kCenter.lat}},
                            {}};
    const auto part = zonal_filtered_mean(g, diamond);
    EXPECT_EQ(part.grid_cell_count, full.grid_cell_count);
    EXPECT_LT(part.cell_count, full.cell_count);
}

TEST(ZonalProperty, Deterministic) {
    const auto g = synth::smooth_grid(40, 5);
    const auto a = zonal_filtered_mean(g, irregular(kCenter));
    for (int i = 0; i < 3; ++i) EXPECT_EQ(zonal_filtered_mean(g, irregular(kCenter)), a);
}

TEST(Zonal, ParallelAgreesWithSerialReference) {
    const auto g = synth::smooth_grid(40, 6);
    for (const auto& poly : {irregular(kCenter), synth::square_ha(kCenter, 0.47)}) {
        const auto par = zonal_filtered_mean(g, poly);
        const auto ref = zonal_filtered_mean_reference(g, poly);
        EXPECT_EQ(par.cell_count, ref.cell_count);
        EXPECT_EQ(par.nodata_count, ref.nodata_count);
        EXPECT_EQ(par.grid_cell_count, ref.grid_cell_count);
        EXPECT_NEAR(par.mean_t_per_ha, ref.mean_t_per_ha, 1e-12 * ref.mean_t_per_ha);
    }
}

TEST(Zonal, AreaReported) {
    const auto g = synth::constant_grid(40, 1.0);
    EXPECT_NEAR(zonal_filtered_mean(g, synth::square_ha(kCenter, 0.53)).polygon_area_ha, 0.53, 1e-6);
}

TEST(Zonal, EmptyZones) {
    const auto g = synth::constant_grid(40, 1.0);
    // entirely off the raster
    EXPECT_THROW(zonal_filtered_mean(g, synth::square_ha({10.0, 10.0}, 0.5)), EmptyZoneError);
    // smaller than one target cell: the only cell center lies outside
    EXPECT_THROW(zonal_filtered_mean(g, synth::square_ha(kCenter, 0.3 * 0.3 / 10000.0)), EmptyZoneError);
    EXPECT_THROW(zonal_filtered_mean(g, synth::square_ha(kCenter, 0.5), 0.0), DomainError);
}

TEST(Zonal, NodataZones) {
    const auto all_nodata = synth::grid_from(40, 40, synth::kOriginLon, synth::kOriginLat, synth::kPixelDeg,
                                             [](double, double) { return -9999.0; }, -9999.0);
    EXPECT_THROW(zonal_filtered_mean(all_nodata, synth::square_ha(kCenter, 0.5)), NodataZoneError);

    // a nodata hole under part of the polygon is counted, the rest averaged
    const auto holed = synth::grid_from(40, 40, synth::kOriginLon, synth::kOriginLat, synth::kPixelDeg,
                                        [](double c, double r) { return (c == 20 && r == 20) ? -9999.0 : 60.0; },
                                        -9999.0);
    const auto r = zonal_filtered_mean(holed, synth::square_ha(kCenter, 0.5));
    EXPECT_GT(r.nodata_count, 0u);
    EXPECT_GT(r.cell_count, 0u);
    EXPECT_EQ(r.mean_t_per_ha, 60.0);
}

TEST(Zonal, HoleExcludedFromMean) {
    const auto g = synth::grid_from(40, 40, synth::kOriginLon, synth::kOriginLat, synth::kPixelDeg,
                                    [](double c, double) { return 10.0 + c; });
    auto poly = synth::square_ha(kCenter, 0.5);
    const auto without = zonal_filtered_mean(g, poly);
    poly.holes.push_back(synth::square_ha(kCenter, 0.1).exterior);
    const auto with = zonal_filtered_mean(g, poly);
    EXPECT_LT(with.cell_count, without.cell_count);
    EXPECT_NEAR(static_cast<double>(without.cell_count - with.cell_count), 1000.0, 60.0);
}

TEST(SitesGeoJson, FeatureCollection) {
    const std::string text = R"({"type":"FeatureCollection","features":[
      {"type":"Feature","properties":{"site_id":"A","declared_area_ha":0.53},
       "geometry":{"type":"Polygon","coordinates":[[[0,0],[0.001,0],[0.001,0.001],[0,0.001],[0,0]]]}},
      {"type":"Feature","id":7,"properties":{},
       "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,1],[1,0],[0,1],[0,0]]]}},
      {"type":"Feature","properties":null,
       "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[0,0]]]}},
      {"type":"Feature","properties":{"site_id":"D"},"geometry":{"type":"Point","coordinates":[0,0]}}
    ]})";
    const auto sites = parse_sites_geojson(text);
    ASSERT_EQ(sites.size(), 4u);
    EXPECT_EQ(sites[0].site_id, "A");
    EXPECT_EQ(sites[0].declared_area_ha, 0.53);
    ASSERT_TRUE(sites[0].polygon.has_value());
    EXPECT_FALSE(sites[0].error);
    EXPECT_EQ(sites[1].site_id, "7");
    EXPECT_TRUE(sites[1].error.has_value()); // bow tie
    EXPECT_EQ(sites[2].site_id, "3");
    EXPECT_TRUE(sites[2].error.has_value()); // two distinct vertices
    EXPECT_TRUE(sites[3].error.has_value());
}

TEST(SitesGeoJson, MultiPolygonPolicy) {
    const std::string one = R"({"type":"MultiPolygon","coordinates":[[[[0,0],[1,0],[1,1],[0,0]]]]})";
    const std::string two =
        R"({"type":"MultiPolygon","coordinates":[[[[0,0],[1,0],[1,1],[0,0]]],[[[5,5],[6,5],[6,6],[5,5]]]]})";
    EXPECT_FALSE(parse_sites_geojson(one)[0].error);
    const auto rejected = parse_sites_geojson(two);
    ASSERT_TRUE(rejected[0].error.has_value());
    EXPECT_NE(rejected[0].error->find("MultiPolygon"), std::string::npos);
    const auto allowed = parse_sites_geojson(two, GeoJsonOptions{true});
    EXPECT_FALSE(allowed[0].error);
    EXPECT_EQ(allowed[0].polygon->exterior.size(), 4u);
    EXPECT_EQ(allowed[0].warnings.size(), 1u);
}

TEST(SitesGeoJson, MalformedDocument) {
    EXPECT_THROW(parse_sites_geojson("{not json"), ParseError);
    EXPECT_THROW(parse_sites_geojson("[1,2]"), ParseError);
    EXPECT_THROW(parse_sites_geojson(R"({"type":"Topology"})"), ParseError);
}

#include "carbon_audit/error.hpp"
#include "carbon_audit/io.hpp"
#include "carbon_audit/raster.hpp"
#include "support/geotiff_fixtures.hpp"

#include <gtest/gtest.h>

using namespace carbon_audit;
using namespace carbon_audit::raster;

namespace {

GeoGrid load(const std::string& name) { return parse_geotiff_subset(io::read_binary_file(fixtures::data_path(name))); }

std::vector<double> values(const GeoGrid& g) { return {g.values().begin(), g.values().end()}; }

void expect_georef(const GeoGrid& g, double lon, double lat) {
    EXPECT_EQ(g.origin_lon(), lon);
    EXPECT_EQ(g.origin_lat(), lat);
    EXPECT_EQ(g.pixel_width_deg(), fixtures::kScale);
    EXPECT_EQ(g.pixel_height_deg(), fixtures::kScale);
}

} // namespace

TEST(GeoTiff, Float32Uncompressed) {
    const auto g = load("f32_3x3.tif");
    EXPECT_EQ(g.ncols(), 3u);
    EXPECT_EQ(g.nrows(), 3u);
    EXPECT_EQ(values(g), fixtures::kF32);
    EXPECT_EQ(g.nodata(), -9999.0);
    EXPECT_TRUE(g.is_nodata_at(1, 1));
    expect_georef(g, fixtures::kTieLon, fixtures::kTieLat);
}

TEST(GeoTiff, Float32DeflateIdentical) {
    EXPECT_EQ(load("f32_3x3_deflate.tif"), load("f32_3x3.tif"));
}

TEST(GeoTiff, Uint16BothCompressions) {
    const auto g = load("u16_4x3.tif");
    EXPECT_EQ(g.ncols(), 4u);
    EXPECT_EQ(g.nrows(), 3u);
    EXPECT_EQ(values(g), fixtures::kU16);
    EXPECT_FALSE(g.nodata().has_value());
    expect_georef(g, fixtures::kTieLon, fixtures::kTieLat);
    EXPECT_EQ(load("u16_4x3_deflate.tif"), g);
}

TEST(GeoTiff, Uint8) {
    const auto g = load("u8_2x2.tif");
    EXPECT_EQ(values(g), fixtures::kU8);
}

TEST(GeoTiff, PixelIsPointShiftsOriginHalfPixel) {
    const auto g = load("f32_pixel_is_point.tif");
    expect_georef(g, fixtures::kTieLon - fixtures::kScale / 2, fixtures::kTieLat + fixtures::kScale / 2);
    EXPECT_EQ(values(g), fixtures::kF32);
}

TEST(GeoTiff, LoadRasterDispatchesOnExtension) {
    EXPECT_EQ(load_raster(fixtures::data_path("f32_3x3.tif")), load("f32_3x3.tif"));
    EXPECT_THROW(load_raster(fixtures::data_path("nothing.png")), UnsupportedFormatError);
}

TEST(GeoTiff, OutOfSubsetFixturesNameTheFeature) {
    for (const auto& c : fixtures::kOutOfSubset) {
        try {
            load(c.file);
            ADD_FAILURE() << c.file << " was accepted";
        } catch (const UnsupportedFormatError& e) {
            EXPECT_EQ(std::string(e.what()), c.message) << c.file;
        }
    }
}

TEST(GeoTiff, GarbageIsMalformedNotCrash) {
    std::vector<std::uint8_t> bytes = {'I', 'I', 42, 0, 0xff, 0xff, 0xff, 0x7f};
    EXPECT_THROW(parse_geotiff_subset(bytes), ParseError);
    EXPECT_THROW(parse_geotiff_subset(std::vector<std::uint8_t>{1, 2, 3}), ParseError);

    // truncations of a valid file never read out of bounds
    const auto full = io::read_binary_file(fixtures::data_path("f32_3x3_deflate.tif"));
    for (std::size_t n = 0; n < full.size(); n += 7) {
        std::span<const std::uint8_t> part(full.data(), n);
        EXPECT_THROW(parse_geotiff_subset(part), Error) << n;
    }
}

#include "carbon_audit/error.hpp"
#include "carbon_audit/raster.hpp"
#include "carbon_audit/text.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <map>

namespace carbon_audit::raster {

namespace {

enum Tag : std::uint16_t {
    kImageWidth = 256,
    kImageLength = 257,
    kBitsPerSample = 258,
    kCompression = 259,
    kStripOffsets = 273,
    kSamplesPerPixel = 277,
    kRowsPerStrip = 278,
    kStripByteCounts = 279,
    kPredictor = 317,
    kTileWidth = 322,
    kTileLength = 323,
    kTileOffsets = 324,
    kTileByteCounts = 325,
    kSampleFormat = 339,
    kModelPixelScale = 33550,
    kModelTiepoint = 33922,
    kModelTransformation = 34264,
    kGeoKeyDirectory = 34735,
    kGdalNodata = 42113,
};

constexpr std::uint16_t kGTRasterTypeGeoKey = 1025;
constexpr std::uint16_t kRasterPixelIsPoint = 2;

[[noreturn]] void unsupported(const std::string& feature) {
    throw UnsupportedFormatError("unsupported GeoTIFF feature: " + feature);
}

[[noreturn]] void malformed(const std::string& what) { throw ParseError("malformed TIFF: " + what); }

class LeReader {
public:
    explicit LeReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    void need(std::uint64_t offset, std::uint64_t len) const {
        if (offset > bytes_.size() || len > bytes_.size() - offset) {
            malformed("offset " + std::to_string(offset) + " + " + std::to_string(len) + " runs past end of file (" +
                      std::to_string(bytes_.size()) + " bytes)");
        }
    }
    std::uint8_t u8(std::uint64_t off) const {
        need(off, 1);
        return bytes_[off];
    }
    std::uint16_t u16(std::uint64_t off) const {
        need(off, 2);
        return static_cast<std::uint16_t>(bytes_[off] | (bytes_[off + 1] << 8));
    }
    std::uint32_t u32(std::uint64_t off) const {
        need(off, 4);
        return static_cast<std::uint32_t>(bytes_[off]) | (static_cast<std::uint32_t>(bytes_[off + 1]) << 8) |
               (static_cast<std::uint32_t>(bytes_[off + 2]) << 16) | (static_cast<std::uint32_t>(bytes_[off + 3]) << 24);
    }
    std::uint64_t u64(std::uint64_t off) const {
        return static_cast<std::uint64_t>(u32(off)) | (static_cast<std::uint64_t>(u32(off + 4)) << 32);
    }
    float f32(std::uint64_t off) const { return std::bit_cast<float>(u32(off)); }
    double f64(std::uint64_t off) const { return std::bit_cast<double>(u64(off)); }
    std::span<const std::uint8_t> slice(std::uint64_t off, std::uint64_t len) const {
        need(off, len);
        return bytes_.subspan(off, len);
    }

private:
    std::span<const std::uint8_t> bytes_;
};

struct Entry {
    std::uint16_t type = 0;
    std::uint32_t count = 0;
    std::uint64_t data_offset = 0; // absolute offset of the payload
};

std::size_t type_size(std::uint16_t type) {
    switch (type) {
    case 1: case 2: case 6: case 7: return 1;
    case 3: case 8: return 2;
    case 4: case 9: case 11: return 4;
    case 5: case 10: case 12: return 8;
    default: return 0;
    }
}

class Ifd {
public:
    Ifd(const LeReader& r, std::uint32_t offset) : r_(r) {
        const std::uint16_t n = r.u16(offset);
        for (std::uint16_t i = 0; i < n; ++i) {
            const std::uint64_t e = offset + 2ULL + 12ULL * i;
            Entry entry;
            const std::uint16_t tag = r.u16(e);
            entry.type = r.u16(e + 2);
            entry.count = r.u32(e + 4);
            const std::size_t sz = type_size(entry.type);
            if (sz == 0) malformed("tag " + std::to_string(tag) + " has unknown field type " + std::to_string(entry.type));
            const std::uint64_t total = static_cast<std::uint64_t>(sz) * entry.count;
            entry.data_offset = total <= 4 ? e + 8 : r.u32(e + 8);
            r.need(entry.data_offset, total);
            entries_[tag] = entry;
        }
    }

    bool has(std::uint16_t tag) const { return entries_.count(tag) != 0; }

    std::vector<double> numbers(std::uint16_t tag) const {
        const auto& e = entries_.at(tag);
        std::vector<double> out;
        out.reserve(e.count);
        for (std::uint32_t i = 0; i < e.count; ++i) {
            const std::uint64_t off = e.data_offset + static_cast<std::uint64_t>(type_size(e.type)) * i;
            switch (e.type) {
            case 1: case 7: out.push_back(r_.u8(off)); break;
            case 3: out.push_back(r_.u16(off)); break;
            case 4: out.push_back(r_.u32(off)); break;
            case 5: out.push_back(static_cast<double>(r_.u32(off)) / static_cast<double>(r_.u32(off + 4))); break;
            case 11: out.push_back(r_.f32(off)); break;
            case 12: out.push_back(r_.f64(off)); break;
            default: malformed("tag " + std::to_string(tag) + " is not numeric");
            }
        }
        return out;
    }

    std::uint64_t scalar(std::uint16_t tag, std::uint64_t fallback) const {
        if (!has(tag)) return fallback;
        const auto v = numbers(tag);
        if (v.empty()) malformed("tag " + std::to_string(tag) + " is empty");
        return static_cast<std::uint64_t>(v[0]);
    }

    std::string ascii(std::uint16_t tag) const {
        const auto& e = entries_.at(tag);
        const auto raw = r_.slice(e.data_offset, e.count);
        std::string s(raw.begin(), raw.end());
        while (!s.empty() && s.back() == '\0') s.pop_back();
        return s;
    }

private:
    const LeReader& r_;
    std::map<std::uint16_t, Entry> entries_;
};

std::vector<std::uint8_t> inflate_strip(std::span<const std::uint8_t> compressed, std::size_t expected, std::size_t index) {
    std::vector<std::uint8_t> out(expected);
    uLongf out_len = static_cast<uLongf>(expected);
    const int rc = uncompress(out.data(), &out_len, compressed.data(), static_cast<uLong>(compressed.size()));
    if (rc != Z_OK || out_len != expected) {
        throw ParseError("malformed TIFF: Deflate strip " + std::to_string(index) + " did not inflate to " +
                         std::to_string(expected) + " bytes (zlib code " + std::to_string(rc) + ")");
    }
    return out;
}

} // namespace

GeoGrid parse_geotiff_subset(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8) malformed("file shorter than a TIFF header");
    if (bytes[0] == 'M' && bytes[1] == 'M') unsupported("big-endian byte order");
    if (bytes[0] != 'I' || bytes[1] != 'I') malformed("missing byte-order mark");
    const LeReader r(bytes);
    const std::uint16_t magic = r.u16(2);
    if (magic == 43) unsupported("BigTIFF");
    if (magic != 42) malformed("bad magic number " + std::to_string(magic));

    const Ifd ifd(r, r.u32(4));

    if (ifd.has(kTileWidth) || ifd.has(kTileLength) || ifd.has(kTileOffsets) || ifd.has(kTileByteCounts)) {
        unsupported("tiled layout (only strip-organized files are read)");
    }
    if (!ifd.has(kImageWidth) || !ifd.has(kImageLength)) malformed("missing ImageWidth/ImageLength");
    const std::uint64_t width = ifd.scalar(kImageWidth, 0);
    const std::uint64_t height = ifd.scalar(kImageLength, 0);
    if (width == 0 || height == 0) malformed("zero image dimension");

    const std::uint64_t spp = ifd.scalar(kSamplesPerPixel, 1);
    if (spp != 1) unsupported(std::to_string(spp) + " samples per pixel (single band only)");

    const std::uint64_t compression = ifd.scalar(kCompression, 1);
    if (compression != 1 && compression != 8) {
        unsupported("compression " + std::to_string(compression) + " (only none=1 and Deflate=8)");
    }
    const std::uint64_t predictor = ifd.scalar(kPredictor, 1);
    if (predictor != 1) unsupported("predictor " + std::to_string(predictor));

    const std::uint64_t bits = ifd.scalar(kBitsPerSample, 1);
    const std::uint64_t format = ifd.scalar(kSampleFormat, 1);
    const bool is_f32 = bits == 32 && format == 3;
    const bool is_u8 = bits == 8 && format == 1;
    const bool is_u16 = bits == 16 && format == 1;
    if (!is_f32 && !is_u8 && !is_u16) {
        static const char* const kFormats[] = {"?", "unsigned", "signed", "float", "void"};
        const char* name = format <= 4 ? kFormats[format] : "?";
        unsupported(std::to_string(bits) + "-bit " + name +
                    " samples (float32, uint8 and uint16 only)");
    }
    const std::size_t sample_bytes = bits / 8;

    if (!ifd.has(kModelPixelScale)) {
        if (ifd.has(kModelTransformation)) unsupported("ModelTransformationTag (34264) georeferencing");
        unsupported("missing ModelPixelScaleTag (33550)");
    }
    if (!ifd.has(kModelTiepoint)) unsupported("missing ModelTiepointTag (33922)");
    const auto scale = ifd.numbers(kModelPixelScale);
    const auto tie = ifd.numbers(kModelTiepoint);
    if (scale.size() < 2 || tie.size() < 6) malformed("short georeferencing tags");
    if (tie.size() > 6) unsupported("multiple tiepoints");
    if (tie[0] != 0.0 || tie[1] != 0.0) unsupported("tiepoint not anchored at raster (0,0)");
    if (!(scale[0] > 0.0) || !(scale[1] > 0.0)) unsupported("non-positive pixel scale (rotated or south-up raster)");

    double origin_lon = tie[3];
    double origin_lat = tie[4];
    if (ifd.has(kGeoKeyDirectory)) {
        const auto keys = ifd.numbers(kGeoKeyDirectory);
        if (keys.size() >= 4) {
            const auto nkeys = static_cast<std::size_t>(keys[3]);
            for (std::size_t k = 0; k < nkeys && 4 * (k + 1) + 3 < keys.size(); ++k) {
                const auto* key = &keys[4 * (k + 1)];
                if (key[0] == kGTRasterTypeGeoKey && key[1] == 0 && key[3] == kRasterPixelIsPoint) {
                    origin_lon -= scale[0] / 2.0;
                    origin_lat += scale[1] / 2.0;
                }
            }
        }
    }

    std::optional<double> nodata;
    if (ifd.has(kGdalNodata)) {
        const auto s = ifd.ascii(kGdalNodata);
        auto v = text::parse_double(text::trim(s));
        if (!v) malformed("GDAL_NODATA value '" + s + "' is not a number");
        nodata = is_f32 ? static_cast<double>(static_cast<float>(*v)) : *v;
    }

    if (!ifd.has(kStripOffsets) || !ifd.has(kStripByteCounts)) malformed("missing StripOffsets/StripByteCounts");
    const auto offsets = ifd.numbers(kStripOffsets);
    const auto counts = ifd.numbers(kStripByteCounts);
    const std::uint64_t rows_per_strip = std::min<std::uint64_t>(ifd.scalar(kRowsPerStrip, height), height);
    if (rows_per_strip == 0) malformed("RowsPerStrip is zero");
    const std::uint64_t nstrips = (height + rows_per_strip - 1) / rows_per_strip;
    if (offsets.size() != nstrips || counts.size() != nstrips) {
        malformed("expected " + std::to_string(nstrips) + " strips, found " + std::to_string(offsets.size()));
    }

    const std::size_t row_bytes = static_cast<std::size_t>(width) * sample_bytes;
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(width * height));
    for (std::uint64_t s = 0; s < nstrips; ++s) {
        const std::uint64_t rows = std::min(rows_per_strip, height - s * rows_per_strip);
        const std::size_t expected = static_cast<std::size_t>(rows) * row_bytes;
        const auto raw = r.slice(static_cast<std::uint64_t>(offsets[s]), static_cast<std::uint64_t>(counts[s]));
        std::vector<std::uint8_t> inflated;
        std::span<const std::uint8_t> strip;
        if (compression == 8) {
            inflated = inflate_strip(raw, expected, s);
            strip = inflated;
        } else {
            if (raw.size() < expected) malformed("strip " + std::to_string(s) + " is truncated");
            strip = raw.first(expected);
        }
        const LeReader sr(strip);
        for (std::size_t i = 0; i < expected; i += sample_bytes) {
            if (is_f32) values.push_back(sr.f32(i));
            else if (is_u16) values.push_back(sr.u16(i));
            else values.push_back(sr.u8(i));
        }
    }

    try {
        return GeoGrid(static_cast<std::size_t>(width), static_cast<std::size_t>(height), origin_lon, origin_lat,
                       scale[0], scale[1], nodata, std::move(values));
    } catch (const ValidationError& e) {
        throw ParseError(std::string("GeoTIFF: ") + e.what());
    }
}

} // namespace carbon_audit::raster

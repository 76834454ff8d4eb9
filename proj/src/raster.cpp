#include "carbon_audit/raster.hpp"

#include "carbon_audit/error.hpp"
#include "carbon_audit/io.hpp"
#include "carbon_audit/text.hpp"

#include <cmath>
#include <filesystem>
#include <map>

namespace carbon_audit::raster {

GeoGrid::GeoGrid(std::size_t ncols, std::size_t nrows, double origin_lon, double origin_lat, double pixel_width_deg,
                 double pixel_height_deg, std::optional<double> nodata, std::vector<double> values)
    : ncols_(ncols), nrows_(nrows), origin_lon_(origin_lon), origin_lat_(origin_lat), pixel_width_(pixel_width_deg),
      pixel_height_(pixel_height_deg), nodata_(nodata), values_(std::move(values)) {
    if (ncols_ == 0 || nrows_ == 0) throw ValidationError("grid dimensions must be positive");
    if (!(pixel_width_ > 0.0) || !(pixel_height_ > 0.0) || !std::isfinite(pixel_width_) ||
        !std::isfinite(pixel_height_)) {
        throw ValidationError("grid pixel sizes must be finite and positive");
    }
    if (!std::isfinite(origin_lon_) || !std::isfinite(origin_lat_)) {
        throw ValidationError("grid origin must be finite");
    }
    if (values_.size() != ncols_ * nrows_) {
        throw ValidationError("grid holds " + std::to_string(values_.size()) + " values, expected " +
                              std::to_string(ncols_ * nrows_));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i]) && !is_nodata(values_[i])) {
            throw ValidationError("grid value at index " + std::to_string(i) + " is not finite");
        }
    }
}

bool GeoGrid::is_nodata(double v) const {
    if (!nodata_) return false;
    if (std::isnan(*nodata_)) return std::isnan(v);
    return v == *nodata_;
}

geo::BBox GeoGrid::extent() const {
    return {origin_lon_, origin_lat_ - static_cast<double>(nrows_) * pixel_height_,
            origin_lon_ + static_cast<double>(ncols_) * pixel_width_, origin_lat_};
}

geo::LonLat GeoGrid::pixel_center(std::size_t row, std::size_t col) const {
    return pixel_to_world(*this, {static_cast<double>(col) + 0.5, static_cast<double>(row) + 0.5});
}

GeoGrid GeoGrid::scaled(double k) const {
    auto v = values_;
    for (auto& x : v) {
        if (!is_nodata(x)) x *= k;
    }
    return GeoGrid(ncols_, nrows_, origin_lon_, origin_lat_, pixel_width_, pixel_height_, nodata_, std::move(v));
}

bool operator==(const GeoGrid& a, const GeoGrid& b) {
    if (a.ncols_ != b.ncols_ || a.nrows_ != b.nrows_ || a.origin_lon_ != b.origin_lon_ ||
        a.origin_lat_ != b.origin_lat_ || a.pixel_width_ != b.pixel_width_ || a.pixel_height_ != b.pixel_height_) {
        return false;
    }
    if (a.nodata_.has_value() != b.nodata_.has_value()) return false;
    if (a.nodata_ && !(std::isnan(*a.nodata_) && std::isnan(*b.nodata_)) && *a.nodata_ != *b.nodata_) return false;
    for (std::size_t i = 0; i < a.values_.size(); ++i) {
        const bool both_nodata = a.is_nodata(a.values_[i]) && b.is_nodata(b.values_[i]);
        if (!both_nodata && a.values_[i] != b.values_[i]) return false;
    }
    return true;
}

PixelCoord world_to_pixel(const GeoGrid& grid, double lon, double lat) {
    return {(lon - grid.origin_lon()) / grid.pixel_width_deg(), (grid.origin_lat() - lat) / grid.pixel_height_deg()};
}

geo::LonLat pixel_to_world(const GeoGrid& grid, PixelCoord p) {
    return {grid.origin_lon() + p.col * grid.pixel_width_deg(), grid.origin_lat() - p.row * grid.pixel_height_deg()};
}

// ---------------------------------------------------------------------------
// ESRI ASCII grid

namespace {

struct Token {
    std::string_view text;
    std::size_t line;
};

std::string at_line(std::size_t line) { return "ESRI ASCII grid line " + std::to_string(line) + ": "; }

} // namespace

GeoGrid parse_esri_ascii(std::string_view content) {
    static const char* const kKeys[] = {"ncols",     "nrows",     "xllcorner",    "yllcorner",
                                        "xllcenter", "yllcenter", "cellsize", "nodata_value"};
    std::map<std::string, double> header;
    std::vector<Token> data;

    const auto all = text::lines(content);
    bool in_header = true;
    for (std::size_t i = 0; i < all.size(); ++i) {
        const auto tokens = text::split_ws(all[i]);
        if (tokens.empty()) continue;
        if (in_header) {
            auto key = text::to_lower(tokens[0]);
            bool known = false;
            for (const char* k : kKeys) known = known || key == k;
            if (known) {
                if (tokens.size() != 2) throw ParseError(at_line(i + 1) + "header '" + key + "' needs one value");
                auto v = text::parse_double(tokens[1]);
                if (!v) throw ParseError(at_line(i + 1) + "non-numeric value for '" + key + "'");
                if (header.count(key)) throw ParseError(at_line(i + 1) + "duplicate header '" + key + "'");
                header[key] = *v;
                continue;
            }
            in_header = false;
        }
        for (auto t : tokens) data.push_back({t, i + 1});
    }

    for (const char* k : {"ncols", "nrows", "cellsize"}) {
        if (!header.count(k)) throw ParseError("ESRI ASCII grid: missing header '" + std::string(k) + "'");
    }
    const double cellsize = header["cellsize"];
    double xll = 0.0;
    double yll = 0.0;
    if (header.count("xllcorner")) {
        xll = header["xllcorner"];
    } else if (header.count("xllcenter")) {
        xll = header["xllcenter"] - cellsize / 2.0;
    } else {
        throw ParseError("ESRI ASCII grid: missing header 'xllcorner'");
    }
    if (header.count("yllcorner")) {
        yll = header["yllcorner"];
    } else if (header.count("yllcenter")) {
        yll = header["yllcenter"] - cellsize / 2.0;
    } else {
        throw ParseError("ESRI ASCII grid: missing header 'yllcorner'");
    }

    const double ncols_d = header["ncols"];
    const double nrows_d = header["nrows"];
    if (ncols_d < 1 || nrows_d < 1 || ncols_d != std::floor(ncols_d) || nrows_d != std::floor(nrows_d)) {
        throw ParseError("ESRI ASCII grid: ncols and nrows must be positive integers");
    }
    if (!(cellsize > 0.0)) throw ParseError("ESRI ASCII grid: cellsize must be positive");
    const auto ncols = static_cast<std::size_t>(ncols_d);
    const auto nrows = static_cast<std::size_t>(nrows_d);

    if (data.size() != ncols * nrows) {
        throw ParseError("ESRI ASCII grid: header declares " + std::to_string(ncols * nrows) + " values but " +
                         std::to_string(data.size()) + " were found");
    }
    std::vector<double> values;
    values.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto v = text::parse_double(data[i].text);
        if (!v) {
            throw ParseError(at_line(data[i].line) + "non-numeric token '" + std::string(data[i].text) +
                             "' (value " + std::to_string(i + 1) + ")");
        }
        values.push_back(*v);
    }

    std::optional<double> nodata;
    if (header.count("nodata_value")) nodata = header["nodata_value"];
    const double origin_lat = yll + static_cast<double>(nrows) * cellsize;
    try {
        return GeoGrid(ncols, nrows, xll, origin_lat, cellsize, cellsize, nodata, std::move(values));
    } catch (const ValidationError& e) {
        throw ParseError(std::string("ESRI ASCII grid: ") + e.what());
    }
}

std::string write_esri_ascii(const GeoGrid& grid) {
    const double pw = grid.pixel_width_deg();
    const double ph = grid.pixel_height_deg();
    if (std::abs(pw - ph) > 1e-12 * pw) {
        throw UnsupportedFormatError("ESRI ASCII grid requires square pixels (width " + text::format_g17(pw) +
                                     ", height " + text::format_g17(ph) + ")");
    }
    const double span = static_cast<double>(grid.nrows()) * pw;
    double yll = grid.origin_lat() - span;
    if (yll + span != grid.origin_lat()) {
        // Walk neighbouring doubles for one that the parser maps back exactly.
        double up = yll;
        double down = yll;
        for (int step = 0; step < 64; ++step) {
            up = std::nextafter(up, INFINITY);
            down = std::nextafter(down, -INFINITY);
            if (up + span == grid.origin_lat()) {
                yll = up;
                break;
            }
            if (down + span == grid.origin_lat()) {
                yll = down;
                break;
            }
        }
    }

    std::string out;
    out.reserve(grid.size() * 20 + 200);
    out += "ncols " + std::to_string(grid.ncols()) + "\n";
    out += "nrows " + std::to_string(grid.nrows()) + "\n";
    out += "xllcorner " + text::format_g17(grid.origin_lon()) + "\n";
    out += "yllcorner " + text::format_g17(yll) + "\n";
    out += "cellsize " + text::format_g17(pw) + "\n";
    if (grid.nodata()) out += "NODATA_value " + text::format_g17(*grid.nodata()) + "\n";
    for (std::size_t r = 0; r < grid.nrows(); ++r) {
        for (std::size_t c = 0; c < grid.ncols(); ++c) {
            if (c) out += ' ';
            out += text::format_g17(grid.at(r, c));
        }
        out += '\n';
    }
    return out;
}

GeoGrid load_raster(const std::string& path) {
    const auto ext = text::to_lower(std::filesystem::path(path).extension().string());
    if (ext == ".asc") return parse_esri_ascii(io::read_text_file(path));
    if (ext == ".tif" || ext == ".tiff") {
        const auto bytes = io::read_binary_file(path);
        return parse_geotiff_subset(bytes);
    }
    throw UnsupportedFormatError("raster '" + path + "': unknown extension (expected .asc, .tif or .tiff)");
}

} // namespace carbon_audit::raster

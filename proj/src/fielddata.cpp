#include "carbon_audit/fielddata.hpp"

#include "carbon_audit/error.hpp"
#include "carbon_audit/text.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace carbon_audit::fielddata {

namespace {

constexpr const char* kRequired[] = {"tree_id", "lat", "lon", "species", "dbh_cm"};

std::string line_prefix(std::size_t line) { return "field CSV line " + std::to_string(line) + ": "; }

double parse_number(std::string_view cell, std::string_view column, std::size_t line) {
    auto v = text::parse_double(cell);
    if (!v || !std::isfinite(*v)) {
        throw ParseError(line_prefix(line) + "column '" + std::string(column) + "' value '" + std::string(cell) +
                         "' is not a finite number");
    }
    return *v;
}

struct Kahan {
    double sum = 0.0;
    double comp = 0.0;
    void add(double x) {
        const double y = x - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
};

} // namespace

std::vector<TreeRecord> parse_field_csv(std::string_view content) {
    if (content.size() >= 3 && static_cast<unsigned char>(content[0]) == 0xEF &&
        static_cast<unsigned char>(content[1]) == 0xBB && static_cast<unsigned char>(content[2]) == 0xBF) {
        content.remove_prefix(3);
    }
    const auto all = text::lines(content);
    std::size_t header_line = 0;
    while (header_line < all.size() && text::trim(all[header_line]).empty()) ++header_line;
    if (header_line == all.size()) throw SchemaError("field CSV: missing header row");

    std::unordered_map<std::string, std::size_t> column;
    const auto header = text::split(all[header_line], ',');
    for (std::size_t i = 0; i < header.size(); ++i) {
        column.emplace(text::to_lower(text::trim(header[i])), i);
    }
    for (const char* name : kRequired) {
        if (!column.count(name)) throw SchemaError("field CSV: missing required column '" + std::string(name) + "'");
    }
    const auto col = [&](const char* name) { return column.at(name); };
    const std::optional<std::size_t> family_col =
        column.count("family") ? std::optional<std::size_t>(column.at("family")) : std::nullopt;
    const std::optional<std::size_t> height_col =
        column.count("height_m") ? std::optional<std::size_t>(column.at("height_m")) : std::nullopt;

    std::vector<TreeRecord> records;
    std::unordered_map<std::string, std::size_t> seen; // tree_id -> line
    for (std::size_t i = header_line + 1; i < all.size(); ++i) {
        if (text::trim(all[i]).empty()) continue;
        const std::size_t line = i + 1;
        const auto cells = text::split(all[i], ',');
        if (cells.size() != header.size()) {
            throw ParseError(line_prefix(line) + "expected " + std::to_string(header.size()) + " fields, found " +
                             std::to_string(cells.size()));
        }
        const auto cell = [&](std::size_t idx) { return text::trim(cells[idx]); };

        TreeRecord rec;
        rec.tree_id = std::string(cell(col("tree_id")));
        if (rec.tree_id.empty()) throw ParseError(line_prefix(line) + "empty tree_id");
        rec.lat = parse_number(cell(col("lat")), "lat", line);
        rec.lon = parse_number(cell(col("lon")), "lon", line);
        rec.species = std::string(cell(col("species")));
        rec.dbh_cm = parse_number(cell(col("dbh_cm")), "dbh_cm", line);
        if (rec.lat < -90.0 || rec.lat > 90.0) throw ParseError(line_prefix(line) + "lat outside [-90, 90]");
        if (rec.lon < -180.0 || rec.lon > 180.0) throw ParseError(line_prefix(line) + "lon outside [-180, 180]");
        if (!(rec.dbh_cm > 0.0)) throw ParseError(line_prefix(line) + "dbh_cm must be positive");
        if (family_col) {
            const auto f = cell(*family_col);
            if (!f.empty()) {
                rec.family = allometry::parse_family_class(f);
                if (!rec.family) {
                    throw ParseError(line_prefix(line) + "unknown family '" + std::string(f) +
                                     "' (valid: Fruit, Musacea, Cacao, Timber)");
                }
            }
        }
        if (height_col) {
            const auto h = cell(*height_col);
            if (!h.empty()) {
                rec.height_m = parse_number(h, "height_m", line);
                if (!(*rec.height_m > 0.0)) throw ParseError(line_prefix(line) + "height_m must be positive");
            }
        }
        if (rec.species.empty() && !rec.family) {
            throw ParseError(line_prefix(line) + "species is empty and no family is given");
        }
        if (auto [it, inserted] = seen.emplace(rec.tree_id, line); !inserted) {
            throw ValidationError("field CSV: duplicate tree_id '" + rec.tree_id + "' on lines " +
                                  std::to_string(it->second) + " and " + std::to_string(line));
        }
        records.push_back(std::move(rec));
    }
    return records;
}

std::string write_field_csv(const std::vector<TreeRecord>& records) {
    const bool any_family = std::any_of(records.begin(), records.end(), [](const auto& r) { return r.family.has_value(); });
    const bool any_height =
        std::any_of(records.begin(), records.end(), [](const auto& r) { return r.height_m.has_value(); });
    std::string out = "tree_id,lat,lon,species,dbh_cm";
    if (any_family) out += ",family";
    if (any_height) out += ",height_m";
    out += '\n';
    for (const auto& r : records) {
        out += r.tree_id + ',' + text::format_double(r.lat) + ',' + text::format_double(r.lon) + ',' + r.species + ',' +
               text::format_double(r.dbh_cm);
        if (any_family) out += ',' + (r.family ? std::string(allometry::to_string(*r.family)) : std::string());
        if (any_height) out += ',' + (r.height_m ? text::format_double(*r.height_m) : std::string());
        out += '\n';
    }
    return out;
}

FamilyClass resolve_family(const TreeRecord& record, const allometry::FamilyMapping& mapping) {
    if (record.family) return *record.family;
    try {
        return mapping.classify(record.species);
    } catch (const ClassificationError& e) {
        throw ClassificationError("tree '" + record.tree_id + "': " + e.what());
    }
}

std::vector<allometry::TreeAgb> site_tree_agb(const SiteDefinition& site, const allometry::FamilyMapping& mapping) {
    if (site.records.empty()) throw ValidationError("site '" + site.site_id + "' has no tree records");

    std::vector<std::size_t> order(site.records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return site.records[a].tree_id < site.records[b].tree_id; });

    std::vector<allometry::TreeAgb> trees;
    trees.reserve(order.size());
    for (auto idx : order) {
        const auto& rec = site.records[idx];
        const auto family = resolve_family(rec, mapping);
        try {
            trees.push_back(allometry::tree_agb(family, rec.dbh_cm, rec.tree_id));
        } catch (const DomainError& e) {
            throw DomainError("tree '" + rec.tree_id + "': " + e.what());
        }
    }
    return trees;
}

SiteGroundTruth aggregate_tree_agb(std::string site_id, std::span<const allometry::TreeAgb> trees) {
    SiteGroundTruth gt;
    gt.site_id = std::move(site_id);
    Kahan total;
    std::map<FamilyClass, Kahan> per_family;
    for (const auto& agb : trees) {
        if (agb.warning) gt.warnings.push_back("tree '" + agb.record_id + "': " + *agb.warning);
        const double tonnes = agb.agb_kg / 1000.0;
        total.add(tonnes);
        per_family[agb.family].add(tonnes);
    }
    gt.total_agb_t = total.sum;
    for (const auto& [family, k] : per_family) gt.per_family_totals[family] = k.sum;
    return gt;
}

SiteGroundTruth site_total_agb(const SiteDefinition& site, const allometry::FamilyMapping& mapping) {
    const auto trees = site_tree_agb(site, mapping);
    auto gt = aggregate_tree_agb(site.site_id, trees);
    gt.declared_area_ha = site.declared_area_ha;
    return gt;
}

double ground_truth_density(double total_agb_t, double area_ha) {
    if (!(area_ha > 0.0) || !std::isfinite(area_ha)) {
        throw DomainError("site area must be positive, got " + text::format_double(area_ha) + " ha");
    }
    return total_agb_t / area_ha;
}

SiteGroundTruth compute_ground_truth(const SiteDefinition& site, const allometry::FamilyMapping& mapping) {
    auto gt = site_total_agb(site, mapping);
    const auto area = geo::polygon_area(site.boundary);
    if (area.degenerate) throw DomainError("site '" + site.site_id + "': boundary polygon has zero area");
    gt.area_ha = area.hectares;
    gt.density_t_per_ha = ground_truth_density(gt.total_agb_t, gt.area_ha);

    const geo::PreparedPolygon prepared(site.boundary);
    for (const auto& rec : site.records) {
        if (prepared.contains(rec.lon, rec.lat)) continue;
        const double d = geo::distance_outside_m(site.boundary, rec.lon, rec.lat);
        if (d > kBoundaryToleranceM) {
            gt.warnings.push_back("tree '" + rec.tree_id + "' lies " + text::format_double(std::round(d * 10.0) / 10.0) +
                                  " m outside the site boundary (still counted)");
        }
    }
    if (site.declared_area_ha) {
        const double rel = std::abs(*site.declared_area_ha - gt.area_ha) / gt.area_ha;
        if (rel > 0.10) {
            gt.warnings.push_back("declared area " + text::format_double(*site.declared_area_ha) +
                                  " ha differs from the polygon area " + text::format_double(gt.area_ha) +
                                  " ha by more than 10%; the polygon area is used");
        }
    }
    return gt;
}

} // namespace carbon_audit::fielddata

#include "carbon_audit/crownmatch.hpp"

#include "carbon_audit/error.hpp"
#include "carbon_audit/io.hpp"
#include "carbon_audit/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

namespace carbon_audit::crownmatch {

void validate(const CrownBox& crown) {
    if (crown.crown_id.empty()) throw ValidationError("crown with empty crown_id");
    if (!std::isfinite(crown.min_lon) || !std::isfinite(crown.min_lat) || !std::isfinite(crown.max_lon) ||
        !std::isfinite(crown.max_lat)) {
        throw ValidationError("crown '" + crown.crown_id + "': non-finite coordinates");
    }
    if (!(crown.min_lon < crown.max_lon) || !(crown.min_lat < crown.max_lat)) {
        throw ValidationError("crown '" + crown.crown_id + "': min must be below max on both axes");
    }
    if (crown.confidence && !(*crown.confidence >= 0.0 && *crown.confidence <= 1.0)) {
        throw ValidationError("crown '" + crown.crown_id + "': confidence outside [0, 1]");
    }
}

namespace detail {

std::vector<std::size_t> min_cost_assignment(std::span<const double> cost, std::size_t rows, std::size_t cols) {
    if (rows > cols) throw DomainError("assignment needs rows <= cols");
    if (cost.size() != rows * cols) throw DomainError("assignment cost matrix has the wrong size");
    if (rows == 0) return {};
    constexpr double kInf = std::numeric_limits<double>::infinity();
    // 1-based arrays; column 0 is the virtual source.
    std::vector<double> u(rows + 1, 0.0);
    std::vector<double> v(cols + 1, 0.0);
    std::vector<std::size_t> owner(cols + 1, 0); // row assigned to each column
    std::vector<std::size_t> way(cols + 1, 0);
    for (std::size_t i = 1; i <= rows; ++i) {
        owner[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(cols + 1, kInf);
        std::vector<char> used(cols + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = owner[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= cols; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * cols + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= cols; ++j) {
                if (used[j]) {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (owner[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> out(rows, 0);
    for (std::size_t j = 1; j <= cols; ++j) {
        if (owner[j] != 0) out[owner[j] - 1] = j - 1;
    }
    return out;
}

} // namespace detail

namespace {

struct Edge {
    std::size_t crown = 0;
    double distance = 0.0;
};

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

template <typename T, typename Key>
std::vector<std::size_t> sorted_order(std::span<const T> items, Key key) {
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(items[a]) < key(items[b]); });
    return order;
}

} // namespace

MatchResult match_records_to_crowns(std::span<const fielddata::TreeRecord> records, std::span<const CrownBox> crowns,
                                    double cap_m) {
    if (!(cap_m > 0.0) || !std::isfinite(cap_m)) throw DomainError("distance cap must be finite and positive");
    for (const auto& c : crowns) validate(c);

    const auto rec_order = sorted_order(records, [](const fielddata::TreeRecord& r) -> const std::string& { return r.tree_id; });
    const auto crown_order = sorted_order(crowns, [](const CrownBox& c) -> const std::string& { return c.crown_id; });
    for (std::size_t k = 1; k < rec_order.size(); ++k) {
        if (records[rec_order[k]].tree_id == records[rec_order[k - 1]].tree_id) {
            throw ValidationError("duplicate tree_id '" + records[rec_order[k]].tree_id + "'");
        }
    }
    for (std::size_t k = 1; k < crown_order.size(); ++k) {
        if (crowns[crown_order[k]].crown_id == crowns[crown_order[k - 1]].crown_id) {
            throw ValidationError("duplicate crown_id '" + crowns[crown_order[k]].crown_id + "'");
        }
    }

    MatchResult result;
    const std::size_t n = records.size();
    const std::size_t m = crowns.size();
    if (n == 0 || m == 0) {
        for (auto i : rec_order) result.unmatched_records.push_back(records[i].tree_id);
        for (auto j : crown_order) result.unmatched_crowns.push_back(crowns[j].crown_id);
        return result;
    }

    // Work in id order from here on: record r is records[rec_order[r]].
    double lon_sum = 0.0;
    double lat_sum = 0.0;
    for (auto i : rec_order) {
        lon_sum += records[i].lon;
        lat_sum += records[i].lat;
    }
    for (auto j : crown_order) {
        const auto c = crowns[j].center();
        lon_sum += c.lon;
        lat_sum += c.lat;
    }
    const double total = static_cast<double>(n + m);
    const geo::LocalProjection proj({lon_sum / total, lat_sum / total});
    std::vector<geo::PlaneXY> rec_xy(n);
    std::vector<geo::PlaneXY> crown_xy(m);
    for (std::size_t r = 0; r < n; ++r) rec_xy[r] = proj.forward({records[rec_order[r]].lon, records[rec_order[r]].lat});
    for (std::size_t c = 0; c < m; ++c) crown_xy[c] = proj.forward(crowns[crown_order[c]].center());

    std::vector<std::vector<Edge>> edges(n);
    const auto n_signed = static_cast<std::int64_t>(n);
    #pragma omp parallel for schedule(static)
    for (std::int64_t rs = 0; rs < n_signed; ++rs) {
        const auto r = static_cast<std::size_t>(rs);
        for (std::size_t c = 0; c < m; ++c) {
            const double d = std::hypot(rec_xy[r].x - crown_xy[c].x, rec_xy[r].y - crown_xy[c].y);
            if (d <= cap_m) edges[r].push_back({c, d});
        }
    }

    // Components over nodes [0, n) records and [n, n + m) crowns.
    DisjointSets sets(n + m);
    for (std::size_t r = 0; r < n; ++r) {
        for (const auto& e : edges[r]) sets.unite(r, n + e.crown);
    }
    std::map<std::size_t, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> components;
    for (std::size_t r = 0; r < n; ++r) {
        if (!edges[r].empty()) components[sets.find(r)].first.push_back(r);
    }
    for (std::size_t c = 0; c < m; ++c) {
        const auto root = sets.find(n + c);
        if (auto it = components.find(root); it != components.end()) it->second.second.push_back(c);
    }

    std::vector<std::optional<std::pair<std::size_t, double>>> rec_match(n);
    std::vector<char> crown_used(m, 0);
    for (const auto& [root, members] : components) {
        const auto& rs = members.first;
        const auto& cs = members.second;
        const bool transpose = rs.size() > cs.size();
        const std::size_t rows = transpose ? cs.size() : rs.size();
        const std::size_t cols = transpose ? rs.size() : cs.size();
        // Any forbidden pair costs more than every feasible matching combined,
        // so cardinality is maximised before distance is minimised.
        const double forbidden = (cap_m + 1.0) * static_cast<double>(rows + 1);
        std::vector<double> cost(rows * cols, forbidden);
        std::unordered_map<std::size_t, std::size_t> crown_pos;
        for (std::size_t k = 0; k < cs.size(); ++k) crown_pos[cs[k]] = k;
        for (std::size_t a = 0; a < rs.size(); ++a) {
            for (const auto& e : edges[rs[a]]) {
                const std::size_t b = crown_pos.at(e.crown);
                cost[transpose ? b * cols + a : a * cols + b] = e.distance;
            }
        }
        const auto assign = detail::min_cost_assignment(cost, rows, cols);
        for (std::size_t i = 0; i < rows; ++i) {
            const std::size_t a = transpose ? assign[i] : i;
            const std::size_t b = transpose ? i : assign[i];
            const double d = cost[i * cols + assign[i]];
            if (d <= cap_m) {
                rec_match[rs[a]] = std::make_pair(cs[b], d);
                crown_used[cs[b]] = 1;
            }
        }
    }

    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const auto& tree_id = records[rec_order[r]].tree_id;
        if (rec_match[r]) {
            result.pairs.push_back({tree_id, crowns[crown_order[rec_match[r]->first]].crown_id, rec_match[r]->second});
            sum += rec_match[r]->second;
        } else {
            result.unmatched_records.push_back(tree_id);
        }
    }
    for (std::size_t c = 0; c < m; ++c) {
        if (!crown_used[c]) result.unmatched_crowns.push_back(crowns[crown_order[c]].crown_id);
    }
    result.total_distance_m = sum;
    return result;
}

std::vector<CrownAgb> per_crown_agb(const MatchResult& match, std::span<const fielddata::TreeRecord> records,
                                    const allometry::FamilyMapping& mapping) {
    std::unordered_map<std::string, const fielddata::TreeRecord*> by_id;
    for (const auto& r : records) by_id[r.tree_id] = &r;
    std::vector<CrownAgb> out;
    for (const auto& p : match.pairs) {
        auto it = by_id.find(p.tree_id);
        if (it == by_id.end()) throw ValidationError("crown '" + p.crown_id + "': unknown tree '" + p.tree_id + "'");
        try {
            const auto family = fielddata::resolve_family(*it->second, mapping);
            const auto agb = allometry::tree_agb(family, it->second->dbh_cm, p.tree_id);
            out.push_back({p.crown_id, p.tree_id, family, agb.agb_kg});
        } catch (const ClassificationError& e) {
            throw ClassificationError("crown '" + p.crown_id + "': " + e.what());
        } catch (const DomainError& e) {
            throw DomainError("crown '" + p.crown_id + "': " + e.what());
        }
    }
    std::sort(out.begin(), out.end(), [](const CrownAgb& a, const CrownAgb& b) { return a.crown_id < b.crown_id; });
    return out;
}

std::vector<CrownBox> parse_crowns_csv(std::string_view content) {
    const auto all = text::lines(content);
    std::size_t h = 0;
    while (h < all.size() && text::trim(all[h]).empty()) ++h;
    if (h == all.size()) throw SchemaError("crown CSV: missing header row");
    std::unordered_map<std::string, std::size_t> column;
    const auto header = text::split(all[h], ',');
    for (std::size_t i = 0; i < header.size(); ++i) column.emplace(text::to_lower(text::trim(header[i])), i);
    for (const char* name : {"crown_id", "min_lon", "min_lat", "max_lon", "max_lat"}) {
        if (!column.count(name)) throw SchemaError("crown CSV: missing required column '" + std::string(name) + "'");
    }
    std::vector<CrownBox> out;
    for (std::size_t i = h + 1; i < all.size(); ++i) {
        if (text::trim(all[i]).empty()) continue;
        const auto where = "crown CSV line " + std::to_string(i + 1) + ": ";
        const auto cells = text::split(all[i], ',');
        if (cells.size() != header.size()) throw ParseError(where + "wrong number of fields");
        auto num = [&](const char* name) {
            const auto cell = text::trim(cells[column.at(name)]);
            auto v = text::parse_double(cell);
            if (!v) throw ParseError(where + "column '" + name + "' value '" + std::string(cell) + "' is not a number");
            return *v;
        };
        CrownBox c;
        c.crown_id = std::string(text::trim(cells[column.at("crown_id")]));
        c.min_lon = num("min_lon");
        c.min_lat = num("min_lat");
        c.max_lon = num("max_lon");
        c.max_lat = num("max_lat");
        if (column.count("confidence") && !text::trim(cells[column.at("confidence")]).empty()) {
            c.confidence = num("confidence");
        }
        try {
            validate(c);
        } catch (const ValidationError& e) {
            throw ParseError(where + e.what());
        }
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<CrownBox> parse_crowns_geojson(std::string_view content) {
    using nlohmann::json;
    json doc;
    try {
        doc = json::parse(content);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("crown GeoJSON: ") + e.what());
    }
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features")) {
        throw ParseError("crown GeoJSON: FeatureCollection expected");
    }
    std::vector<CrownBox> out;
    std::size_t index = 0;
    for (const auto& f : doc["features"]) {
        ++index;
        const auto where = "crown GeoJSON feature " + std::to_string(index) + ": ";
        try {
            CrownBox c;
            const auto& props = f.at("properties");
            const auto& id = props.at("crown_id");
            c.crown_id = id.is_string() ? id.get<std::string>() : id.dump();
            if (props.contains("confidence") && !props["confidence"].is_null()) {
                c.confidence = props["confidence"].get<double>();
            }
            const auto& geom = f.at("geometry");
            if (geom.at("type").get<std::string>() != "Polygon") throw ParseError("geometry must be a Polygon");
            const auto& ring = geom.at("coordinates").at(0);
            if (ring.empty()) throw ParseError("empty ring");
            c.min_lon = c.min_lat = std::numeric_limits<double>::infinity();
            c.max_lon = c.max_lat = -std::numeric_limits<double>::infinity();
            for (const auto& pos : ring) {
                const double lon = pos.at(0).get<double>();
                const double lat = pos.at(1).get<double>();
                c.min_lon = std::min(c.min_lon, lon);
                c.max_lon = std::max(c.max_lon, lon);
                c.min_lat = std::min(c.min_lat, lat);
                c.max_lat = std::max(c.max_lat, lat);
            }
            validate(c);
            out.push_back(std::move(c));
        } catch (const json::exception& e) {
            throw ParseError(where + e.what());
        } catch (const Error& e) {
            throw ParseError(where + e.what());
        }
    }
    return out;
}

std::vector<CrownBox> load_crowns(const std::string& path) {
    const auto ext = text::to_lower(std::filesystem::path(path).extension().string());
    const auto content = io::read_text_file(path);
    if (ext == ".csv") return parse_crowns_csv(content);
    if (ext == ".geojson" || ext == ".json") return parse_crowns_geojson(content);
    throw UnsupportedFormatError("crowns '" + path + "': unknown extension (expected .csv, .geojson or .json)");
}

} // namespace carbon_audit::crownmatch

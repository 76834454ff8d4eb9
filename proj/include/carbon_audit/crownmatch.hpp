#pragma once

#include "carbon_audit/allometry.hpp"
#include "carbon_audit/fielddata.hpp"
#include "carbon_audit/geometry.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace carbon_audit::crownmatch {

inline constexpr double kDefaultCapM = 3.0;

// One detected crown. Matching uses only its center.
struct CrownBox {
    std::string crown_id;
    double min_lon = 0.0;
    double min_lat = 0.0;
    double max_lon = 0.0;
    double max_lat = 0.0;
    std::optional<double> confidence;

    geo::LonLat center() const { return {(min_lon + max_lon) / 2.0, (min_lat + max_lat) / 2.0}; }
};

// Throws ValidationError unless min < max on both axes and confidence is in [0, 1].
void validate(const CrownBox& crown);

struct MatchPair {
    std::string tree_id;
    std::string crown_id;
    double distance_m = 0.0;
};

struct MatchResult {
    std::vector<MatchPair> pairs;              // sorted by tree_id
    std::vector<std::string> unmatched_records; // sorted
    std::vector<std::string> unmatched_crowns;  // sorted
    double total_distance_m = 0.0;
};

/// Optimal one-to-one assignment of field records to crown centers.
///
/// Only pairs within cap_m metres are eligible. Among all matchings of
/// eligible pairs the result has maximum cardinality and, among those, the
/// minimum total distance. Distances come from the local equirectangular
/// projection about the joint centroid of all records and crown centers.
///
/// The eligibility graph is split into connected components, each solved
/// with a rectangular Hungarian assignment. Records and crowns are ordered
/// by id before solving, so equal-cost alternatives resolve the same way on
/// every run. An empty crown list leaves every record unmatched.
MatchResult match_records_to_crowns(std::span<const fielddata::TreeRecord> records, std::span<const CrownBox> crowns,
                                    double cap_m = kDefaultCapM);

struct CrownAgb {
    std::string crown_id;
    std::string tree_id;
    allometry::FamilyClass family = allometry::FamilyClass::Fruit;
    double agb_kg = 0.0;
};

// AGB of each matched crown's record, ordered by crown_id. Unmatched crowns
// are absent. Allometry errors are rethrown with the crown id attached.
std::vector<CrownAgb> per_crown_agb(const MatchResult& match, std::span<const fielddata::TreeRecord> records,
                                    const allometry::FamilyMapping& mapping);

// `crown_id,min_lon,min_lat,max_lon,max_lat[,confidence]`
std::vector<CrownBox> parse_crowns_csv(std::string_view text);
// FeatureCollection of rectangles with a `crown_id` property; the exterior
// ring's bounding box becomes the crown box.
std::vector<CrownBox> parse_crowns_geojson(std::string_view text);
std::vector<CrownBox> load_crowns(const std::string& path);

namespace detail {

/// Minimum-cost assignment of every row to a distinct column of a
/// rows x cols matrix (row-major), rows <= cols. Returns the chosen column
/// per row. Shortest augmenting path with potentials, O(rows^2 * cols).
std::vector<std::size_t> min_cost_assignment(std::span<const double> cost, std::size_t rows, std::size_t cols);

} // namespace detail

} // namespace carbon_audit::crownmatch

#pragma once

#include "carbon_audit/allometry.hpp"
#include "carbon_audit/geometry.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace carbon_audit::fielddata {

using allometry::FamilyClass;

// Field GPS jitter allowance before a record is reported as outside its site.
inline constexpr double kBoundaryToleranceM = 10.0;

struct TreeRecord {
    std::string tree_id;
    double lat = 0.0;
    double lon = 0.0;
    std::string species;
    std::optional<FamilyClass> family;
    double dbh_cm = 0.0;
    std::optional<double> height_m; // stored, not used by any equation

    friend bool operator==(const TreeRecord&, const TreeRecord&) = default;
};

struct SiteDefinition {
    std::string site_id;
    geo::GeoPolygon boundary;
    std::vector<TreeRecord> records;
    std::optional<double> declared_area_ha;
};

struct SiteGroundTruth {
    std::string site_id;
    double total_agb_t = 0.0;
    double area_ha = 0.0;
    std::optional<double> declared_area_ha;
    double density_t_per_ha = 0.0;
    std::map<FamilyClass, double> per_family_totals; // tonnes
    std::vector<std::string> warnings;
};

/// Field measurement CSV: header `tree_id,lat,lon,species,dbh_cm` plus the
/// optional columns `family` and `height_m` (columns located by name).
/// Comma separated, '.' decimals, LF or CRLF, fields whitespace-trimmed.
///
/// Throws SchemaError naming a missing column, ParseError citing the 1-based
/// line of a malformed or out-of-range cell, ValidationError for duplicate
/// tree ids.
std::vector<TreeRecord> parse_field_csv(std::string_view text);

// Writes the canonical column order; optional columns appear only when some
// record carries them. Round-trips through parse_field_csv.
std::string write_field_csv(const std::vector<TreeRecord>& records);

// Family from the record's own column when present, else from the species text.
FamilyClass resolve_family(const TreeRecord& record, const allometry::FamilyMapping& mapping);

// Per-tree AGB of every record, in tree_id order. Errors as site_total_agb.
std::vector<allometry::TreeAgb> site_tree_agb(const SiteDefinition& site, const allometry::FamilyMapping& mapping);

// Compensated sum of agb_kg / 1000 in the order given, with per-family subtotals
// and the per-tree warnings. area_ha and density are left zero.
SiteGroundTruth aggregate_tree_agb(std::string site_id, std::span<const allometry::TreeAgb> trees);

/// Sums per-tree AGB over the site (tonnes) in tree_id order with compensated
/// summation, so the total does not depend on record order. area_ha and
/// density are left zero. Throws ValidationError for an empty site and
/// ClassificationError naming the record for unclassifiable trees.
SiteGroundTruth site_total_agb(const SiteDefinition& site, const allometry::FamilyMapping& mapping);

// total_agb_t / area_ha. Throws DomainError for non-positive or non-finite areas.
double ground_truth_density(double total_agb_t, double area_ha);

/// Full ground truth: totals, polygon area (authoritative), density, and
/// warnings for records more than kBoundaryToleranceM outside the boundary,
/// small-DBH timber trees, and declared areas that disagree with the polygon.
SiteGroundTruth compute_ground_truth(const SiteDefinition& site, const allometry::FamilyMapping& mapping);

} // namespace carbon_audit::fielddata

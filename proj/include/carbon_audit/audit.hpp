#pragma once

#include "carbon_audit/allometry.hpp"
#include "carbon_audit/crownmatch.hpp"
#include "carbon_audit/fielddata.hpp"
#include "carbon_audit/raster.hpp"
#include "carbon_audit/zonal.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace carbon_audit::audit {

inline constexpr std::string_view kToolVersion = "carbon-audit 1.0.0";
inline constexpr std::string_view kEdgePolicy = "clamp (edge replicate)";
inline constexpr std::string_view kNodataPolicy =
    "bicubic; bilinear fallback when the 4x4 support has nodata; excluded when the 2x2 has nodata";

struct AuditConfig {
    double target_pixel_m = zonal::kDefaultTargetPixelM;
    double cap_m = crownmatch::kDefaultCapM;
    // Upper bound on concurrently audited sites; 0 leaves it to the runtime.
    int max_threads = 0;
    // Wall-clock timestamp in the metadata. Off so reports are byte-stable.
    bool include_timestamp = false;
    // Input name -> SHA-256, embedded in the metadata verbatim.
    std::map<std::string, std::string> input_digests;
};

struct SiteResult {
    std::string site_id;
    double ground_truth_t_ha = 0.0;
    double filtered_t_ha = 0.0;
    double overestimation_factor = 0.0;
    double factor_rounded = 0.0;
    fielddata::SiteGroundTruth ground_truth;
    zonal::ZonalResult zonal;
    std::vector<std::string> warnings;
};

// One site slot in a batch: either a result or the reason it failed.
struct SiteOutcome {
    std::string site_id;
    std::optional<SiteResult> result;
    std::optional<std::string> error;
};

// A site as handed to the batch. `load_error` marks sites whose inputs could
// not be assembled (bad polygon, missing field file); they fail in place.
struct SiteInput {
    std::string site_id;
    std::optional<fielddata::SiteDefinition> site;
    std::optional<std::string> load_error;
    std::vector<std::string> warnings;
};

struct RunMetadata {
    std::string tool_version{kToolVersion};
    std::string kernel;
    std::string edge_policy;
    std::string nodata_policy;
    std::string inclusion_rule;
    double target_pixel_m = 0.0;
    double cap_m = 0.0;
    std::map<std::string, std::string> input_digests;
    std::optional<std::string> timestamp_utc;
};

struct AuditReport {
    std::vector<SiteOutcome> sites; // input order
    RunMetadata metadata;

    std::size_t success_count() const;
    std::size_t failure_count() const;
};

// filtered / ground_truth. Throws DomainError when ground_truth <= 0 or filtered < 0.
double overestimation_factor(double filtered_t_ha, double ground_truth_t_ha);

// Half-away-from-zero rounding to one decimal place.
double round_to_tenth(double x);

/// Ground truth, filtered estimate and their ratio for one site. Warnings
/// collect out-of-boundary records, small-DBH timber and nodata cells.
SiteResult run_site_audit(const fielddata::SiteDefinition& site, const raster::GeoGrid& grid,
                          const allometry::FamilyMapping& mapping, const AuditConfig& config);

/// Audits every site, isolating failures per site. Sites run concurrently up
/// to config.max_threads; outcomes keep input order. Throws Error when no
/// site succeeds (or the batch is empty).
AuditReport run_audit(std::span<const SiteInput> sites, const raster::GeoGrid& grid,
                      const allometry::FamilyMapping& mapping, const AuditConfig& config);
AuditReport run_audit(std::span<const fielddata::SiteDefinition> sites, const raster::GeoGrid& grid,
                      const allometry::FamilyMapping& mapping, const AuditConfig& config);

// Canonical JSON: sorted keys, two-space indent, shortest round-trip numbers.
std::string report_to_json(const AuditReport& report);

// `site_id,ground_truth_t_ha,filtered_t_ha,overestimation_factor,factor_rounded`,
// one row per successful site.
std::string report_to_csv(const AuditReport& report);

// `site_id,error`, one row per failed site.
std::string failures_to_csv(const AuditReport& report);

} // namespace carbon_audit::audit

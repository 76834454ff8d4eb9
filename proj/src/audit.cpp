#include "carbon_audit/audit.hpp"

#include "carbon_audit/error.hpp"
#include "carbon_audit/resample.hpp"
#include "carbon_audit/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace carbon_audit::audit {

std::size_t AuditReport::success_count() const {
    return static_cast<std::size_t>(std::count_if(sites.begin(), sites.end(), [](const auto& s) { return s.result.has_value(); }));
}

std::size_t AuditReport::failure_count() const { return sites.size() - success_count(); }

double overestimation_factor(double filtered_t_ha, double ground_truth_t_ha) {
    if (!(ground_truth_t_ha > 0.0) || !std::isfinite(ground_truth_t_ha)) {
        throw DomainError("ground truth density must be positive, got " + text::format_double(ground_truth_t_ha));
    }
    if (!(filtered_t_ha >= 0.0) || !std::isfinite(filtered_t_ha)) {
        throw DomainError("filtered density must be non-negative, got " + text::format_double(filtered_t_ha));
    }
    return filtered_t_ha / ground_truth_t_ha;
}

double round_to_tenth(double x) { return std::round(x * 10.0) / 10.0; }

SiteResult run_site_audit(const fielddata::SiteDefinition& site, const raster::GeoGrid& grid,
                          const allometry::FamilyMapping& mapping, const AuditConfig& config) {
    SiteResult out;
    out.site_id = site.site_id;
    out.ground_truth = fielddata::compute_ground_truth(site, mapping);
    out.zonal = zonal::zonal_filtered_mean(grid, site.boundary, config.target_pixel_m);
    out.ground_truth_t_ha = out.ground_truth.density_t_per_ha;
    out.filtered_t_ha = out.zonal.mean_t_per_ha;
    out.overestimation_factor = overestimation_factor(out.filtered_t_ha, out.ground_truth_t_ha);
    out.factor_rounded = round_to_tenth(out.overestimation_factor);
    out.warnings = out.ground_truth.warnings;
    if (out.zonal.nodata_count > 0) {
        out.warnings.push_back(std::to_string(out.zonal.nodata_count) + " of " +
                               std::to_string(out.zonal.nodata_count + out.zonal.cell_count) +
                               " cells inside the polygon are nodata and were excluded");
    }
    return out;
}

namespace {

RunMetadata make_metadata(const AuditConfig& config) {
    RunMetadata m;
    m.kernel = std::string(raster::kKernelName);
    m.edge_policy = std::string(kEdgePolicy);
    m.nodata_policy = std::string(kNodataPolicy);
    m.inclusion_rule = std::string(zonal::kInclusionRule);
    m.target_pixel_m = config.target_pixel_m;
    m.cap_m = config.cap_m;
    m.input_digests = config.input_digests;
    if (config.include_timestamp) {
        const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        std::array<char, 32> buf{};
        std::strftime(buf.data(), buf.size(), "%Y-%m-%dT%H:%M:%SZ", &tm);
        m.timestamp_utc = buf.data();
    }
    return m;
}

SiteOutcome audit_one(const SiteInput& input, const raster::GeoGrid& grid, const allometry::FamilyMapping& mapping,
                      const AuditConfig& config) {
    SiteOutcome outcome;
    outcome.site_id = input.site_id;
    if (input.load_error) {
        outcome.error = *input.load_error;
        return outcome;
    }
    if (!input.site) {
        outcome.error = "no site definition";
        return outcome;
    }
    try {
        auto result = run_site_audit(*input.site, grid, mapping, config);
        result.warnings.insert(result.warnings.begin(), input.warnings.begin(), input.warnings.end());
        outcome.result = std::move(result);
    } catch (const std::exception& e) {
        outcome.error = e.what();
    }
    return outcome;
}

} // namespace

AuditReport run_audit(std::span<const SiteInput> sites, const raster::GeoGrid& grid,
                      const allometry::FamilyMapping& mapping, const AuditConfig& config) {
    if (sites.empty()) throw Error("audit batch has no sites");
    if (!(config.target_pixel_m > 0.0)) throw DomainError("target pixel size must be positive");
    if (!(config.cap_m > 0.0)) throw DomainError("distance cap must be positive");

    AuditReport report;
    report.metadata = make_metadata(config);
    report.sites.resize(sites.size());

    const auto n = static_cast<std::int64_t>(sites.size());
#ifdef _OPENMP
    const int threads = config.max_threads > 0 ? config.max_threads : omp_get_max_threads();
    #pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
#endif
    for (std::int64_t i = 0; i < n; ++i) {
        report.sites[static_cast<std::size_t>(i)] = audit_one(sites[static_cast<std::size_t>(i)], grid, mapping, config);
    }

    if (report.success_count() == 0) {
        std::string msg = "every site failed:";
        for (const auto& s : report.sites) msg += " [" + s.site_id + ": " + s.error.value_or("?") + "]";
        throw Error(msg);
    }
    return report;
}

AuditReport run_audit(std::span<const fielddata::SiteDefinition> sites, const raster::GeoGrid& grid,
                      const allometry::FamilyMapping& mapping, const AuditConfig& config) {
    std::vector<SiteInput> inputs;
    inputs.reserve(sites.size());
    for (const auto& s : sites) inputs.push_back({s.site_id, s, std::nullopt, {}});
    return run_audit(std::span<const SiteInput>(inputs), grid, mapping, config);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

using nlohmann::json;

json zonal_json(const zonal::ZonalResult& z) {
    return {{"mean_t_per_ha", z.mean_t_per_ha},   {"cell_count", z.cell_count},
            {"nodata_count", z.nodata_count},     {"grid_cell_count", z.grid_cell_count},
            {"target_pixel_m", z.target_pixel_m}, {"polygon_area_ha", z.polygon_area_ha}};
}

json site_json(const SiteOutcome& s) {
    json j;
    j["site_id"] = s.site_id;
    if (!s.result) {
        j["status"] = "failed";
        j["error"] = s.error.value_or("");
        return j;
    }
    const auto& r = *s.result;
    j["status"] = "ok";
    j["ground_truth_t_ha"] = r.ground_truth_t_ha;
    j["filtered_t_ha"] = r.filtered_t_ha;
    j["overestimation_factor"] = r.overestimation_factor;
    j["factor_rounded"] = r.factor_rounded;
    j["total_agb_t"] = r.ground_truth.total_agb_t;
    j["area_ha"] = r.ground_truth.area_ha;
    j["declared_area_ha"] = r.ground_truth.declared_area_ha ? json(*r.ground_truth.declared_area_ha) : json(nullptr);
    json families = json::object();
    for (const auto& [family, tonnes] : r.ground_truth.per_family_totals) {
        families[std::string(allometry::to_string(family))] = tonnes;
    }
    j["per_family_totals_t"] = families;
    j["zonal"] = zonal_json(r.zonal);
    j["warnings"] = r.warnings;
    return j;
}

std::string csv_cell(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

} // namespace

std::string report_to_json(const AuditReport& report) {
    json doc;
    const auto& m = report.metadata;
    json meta = {{"tool_version", m.tool_version},       {"kernel", m.kernel},
                 {"edge_policy", m.edge_policy},         {"nodata_policy", m.nodata_policy},
                 {"inclusion_rule", m.inclusion_rule},   {"target_pixel_m", m.target_pixel_m},
                 {"cap_m", m.cap_m},                     {"input_digests", m.input_digests}};
    if (m.timestamp_utc) meta["timestamp_utc"] = *m.timestamp_utc;
    doc["metadata"] = meta;
    json sites = json::array();
    for (const auto& s : report.sites) sites.push_back(site_json(s));
    doc["sites"] = sites;
    doc["summary"] = {{"sites", report.sites.size()},
                      {"succeeded", report.success_count()},
                      {"failed", report.failure_count()}};
    return doc.dump(2) + "\n";
}

std::string report_to_csv(const AuditReport& report) {
    std::string out = "site_id,ground_truth_t_ha,filtered_t_ha,overestimation_factor,factor_rounded\n";
    for (const auto& s : report.sites) {
        if (!s.result) continue;
        const auto& r = *s.result;
        std::array<char, 32> rounded{};
        std::snprintf(rounded.data(), rounded.size(), "%.1f", r.factor_rounded);
        out += csv_cell(r.site_id) + ',' + text::format_double(r.ground_truth_t_ha) + ',' +
               text::format_double(r.filtered_t_ha) + ',' + text::format_double(r.overestimation_factor) + ',' +
               rounded.data() + '\n';
    }
    return out;
}

std::string failures_to_csv(const AuditReport& report) {
    std::string out = "site_id,error\n";
    for (const auto& s : report.sites) {
        if (s.result) continue;
        out += csv_cell(s.site_id) + ',' + csv_cell(s.error.value_or("")) + '\n';
    }
    return out;
}

} // namespace carbon_audit::audit

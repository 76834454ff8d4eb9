#include "carbon_audit/audit.hpp"
#include "carbon_audit/error.hpp"
#include "carbon_audit/text.hpp"
#include "support/synthetic.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <sstream>

using namespace carbon_audit;
using namespace carbon_audit::audit;
using allometry::FamilyMapping;

namespace {

const geo::LonLat kCenter{synth::kOriginLon + 20 * synth::kPixelDeg, synth::kOriginLat - 20 * synth::kPixelDeg};

fielddata::SiteDefinition cacao_site(std::string id, int n, double dbh, double area_ha, geo::LonLat center = kCenter) {
    fielddata::SiteDefinition s;
    s.site_id = std::move(id);
    s.boundary = synth::square_ha(center, area_ha);
    for (int i = 0; i < n; ++i) {
        fielddata::TreeRecord r;
        r.tree_id = "t" + std::to_string(i);
        r.lat = center.lat;
        r.lon = center.lon;
        r.species = "cacao";
        r.dbh_cm = dbh;
        s.records.push_back(r);
    }
    return s;
}

} // namespace

TEST(Factor, Examples) {
    EXPECT_NEAR(overestimation_factor(160, 27), 5.925925925925926, 1e-15);
    EXPECT_EQ(round_to_tenth(overestimation_factor(160, 27)), 5.9);
    EXPECT_NEAR(overestimation_factor(19, 17), 1.1176470588235294, 1e-15);
    EXPECT_EQ(round_to_tenth(overestimation_factor(19, 17)), 1.1);
    for (double x : {0.001, 1.0, 19.0, 1e6}) EXPECT_EQ(overestimation_factor(x, x), 1.0);
    EXPECT_THROW(overestimation_factor(1.0, 0.0), DomainError);
    EXPECT_THROW(overestimation_factor(1.0, -3.0), DomainError);
    EXPECT_THROW(overestimation_factor(-1.0, 3.0), DomainError);
    EXPECT_EQ(overestimation_factor(0.0, 3.0), 0.0);
}

TEST(Factor, RoundHalfAwayFromZero) {
    EXPECT_EQ(round_to_tenth(0.25), 0.3);
    EXPECT_EQ(round_to_tenth(-0.25), -0.3);
    EXPECT_EQ(round_to_tenth(2.0), 2.0);
    EXPECT_EQ(round_to_tenth(1.9583333), 2.0);
    EXPECT_EQ(round_to_tenth(9.263157894736842), 9.3);
}

TEST(Factor, SixSiteRatios) {
    for (const auto& row : synth::kAuditPairs) {
        const double f = overestimation_factor(row.filtered, row.ground_truth);
        EXPECT_LE(std::abs(f - row.reported_factor), 0.1) << "site " << row.site;
    }
    // site 1 reports 9.2 though 176/19 rounds to 9.3; every other row rounds to its reported value
    const double expected_rounded[] = {9.3, 5.9, 2.0, 2.6, 1.1, 4.9};
    for (std::size_t i = 0; i < synth::kAuditPairs.size(); ++i) {
        const auto& row = synth::kAuditPairs[i];
        EXPECT_EQ(round_to_tenth(overestimation_factor(row.filtered, row.ground_truth)), expected_rounded[i]);
    }
}

TEST(SiteAudit, HundredCacaoTreesOnConstantGrid) {
    const auto g = synth::constant_grid(40, 50.0);
    const auto r = run_site_audit(cacao_site("syn", 100, 10.0, 0.5), g, FamilyMapping(), AuditConfig{});
    // 100 * 0.1208 * 10^1.98 / 1000 over the polygon area (0.5 ha up to projection round-off)
    EXPECT_NEAR(r.ground_truth_t_ha, 2.3072620878277892545, 1e-8);
    EXPECT_EQ(r.filtered_t_ha, 50.0);
    EXPECT_NEAR(r.overestimation_factor, 21.670706706351397630, 1e-6);
    EXPECT_EQ(r.factor_rounded, 21.7);
    EXPECT_EQ(r.overestimation_factor, r.filtered_t_ha / r.ground_truth_t_ha);
}

TEST(SiteAudit, GridAtGroundTruthGivesFactorOne) {
    const auto site = cacao_site("s", 37, 12.0, 0.48);
    const double gt = fielddata::compute_ground_truth(site, FamilyMapping()).density_t_per_ha;
    const auto r = run_site_audit(site, synth::constant_grid(40, gt), FamilyMapping(), AuditConfig{});
    EXPECT_EQ(r.overestimation_factor, 1.0);
}

TEST(SiteAudit, PolygonOutsideGrid) {
    const auto site = cacao_site("far", 3, 10.0, 0.5, {10.0, 10.0});
    EXPECT_THROW(run_site_audit(site, synth::constant_grid(40, 1.0), FamilyMapping(), AuditConfig{}), EmptyZoneError);
}

TEST(BatchAudit, SixSitesForced) {
    // each site's grid region is constant at the filtered value and the trees
    // are sized so the ground truth lands near the reference value
    std::vector<fielddata::SiteDefinition> sites;
    for (std::size_t i = 0; i < synth::kAuditPairs.size(); ++i) {
        const auto& row = synth::kAuditPairs[i];
        const auto& t1 = synth::kSurveySites[i];
        const geo::LonLat c{synth::kOriginLon + (10.0 + 15.0 * static_cast<double>(i)) * synth::kPixelDeg,
                            synth::kOriginLat - 10.0 * synth::kPixelDeg};
        sites.push_back(cacao_site(synth::site_name(row.site), t1.trees,
                                   synth::cacao_dbh_for(row.ground_truth, t1.area_ha, t1.trees), t1.area_ha, c));
    }
    const auto g = synth::grid_from(100, 20, synth::kOriginLon, synth::kOriginLat, synth::kPixelDeg,
                                    [](double col, double) {
                                        const auto i = static_cast<std::size_t>(std::clamp((col - 2.5) / 15.0, 0.0, 5.0));
                                        return synth::kAuditPairs[i].filtered;
                                    });
    const auto report = run_audit(std::span<const fielddata::SiteDefinition>(sites), g, FamilyMapping(), AuditConfig{});
    ASSERT_EQ(report.success_count(), 6u);
    const double expected_rounded[] = {9.3, 5.9, 2.0, 2.6, 1.1, 4.9};
    for (std::size_t i = 0; i < 6; ++i) {
        const auto& r = *report.sites[i].result;
        EXPECT_EQ(r.site_id, synth::site_name(synth::kAuditPairs[i].site));
        EXPECT_NEAR(r.ground_truth_t_ha, synth::kAuditPairs[i].ground_truth, 1e-4);
        EXPECT_EQ(r.filtered_t_ha, synth::kAuditPairs[i].filtered);
        EXPECT_EQ(r.factor_rounded, expected_rounded[i]);
        EXPECT_LE(std::abs(r.overestimation_factor - synth::kAuditPairs[i].reported_factor), 0.1);
    }
}

TEST(BatchAudit, FailureIsolation) {
    auto sites = synth::six_sites(200);
    std::vector<SiteInput> inputs;
    for (const auto& s : sites) inputs.push_back({s.site_id, s, std::nullopt, {}});
    inputs[2].site->boundary = synth::square_ha({50.0, 50.0}, 0.5); // off the raster
    inputs[4].site.reset();
    inputs[4].load_error = "invalid polygon: self-intersection";
    const auto g = synth::smooth_grid(200);
    const auto report = run_audit(std::span<const SiteInput>(inputs), g, FamilyMapping(), AuditConfig{});
    ASSERT_EQ(report.sites.size(), 6u);
    EXPECT_EQ(report.success_count(), 4u);
    EXPECT_EQ(report.failure_count(), 2u);
    EXPECT_FALSE(report.sites[2].result);
    EXPECT_TRUE(report.sites[2].error.has_value());
    EXPECT_EQ(report.sites[4].error, "invalid polygon: self-intersection");
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(report.sites[i].site_id, sites[i].site_id);

    const auto csv = report_to_csv(report);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
    const auto failures = failures_to_csv(report);
    EXPECT_EQ(std::count(failures.begin(), failures.end(), '\n'), 3);
    EXPECT_NE(failures.find("site5,invalid polygon: self-intersection"), std::string::npos);
}

TEST(BatchAudit, AllFailedIsBatchError) {
    std::vector<SiteInput> inputs = {{"a", std::nullopt, "bad", {}}, {"b", std::nullopt, "bad", {}}};
    EXPECT_THROW(run_audit(std::span<const SiteInput>(inputs), synth::constant_grid(4, 1.0), FamilyMapping(), {}),
                 Error);
    EXPECT_THROW(run_audit(std::span<const SiteInput>(), synth::constant_grid(4, 1.0), FamilyMapping(), {}), Error);
}

TEST(BatchAudit, SingleSite) {
    const std::vector sites = {cacao_site("only", 10, 10.0, 0.5)};
    const auto report = run_audit(std::span<const fielddata::SiteDefinition>(sites), synth::constant_grid(40, 7.0),
                                  FamilyMapping(), AuditConfig{});
    ASSERT_EQ(report.sites.size(), 1u);
    EXPECT_TRUE(report.sites[0].result);
}

TEST(AuditProperty, ScaleCovariance) {
    const auto sites = synth::six_sites(200);
    const auto g = synth::smooth_grid(200, 3);
    const auto base = run_audit(std::span<const fielddata::SiteDefinition>(sites), g, FamilyMapping(), AuditConfig{});
    for (double k : {2.0, 0.5, 4.0}) {
        const auto scaled =
            run_audit(std::span<const fielddata::SiteDefinition>(sites), g.scaled(k), FamilyMapping(), AuditConfig{});
        for (std::size_t i = 0; i < sites.size(); ++i) {
            const auto& a = *base.sites[i].result;
            const auto& b = *scaled.sites[i].result;
            EXPECT_EQ(b.ground_truth_t_ha, a.ground_truth_t_ha);
            EXPECT_EQ(b.filtered_t_ha, k * a.filtered_t_ha);
            EXPECT_EQ(b.overestimation_factor, k * a.overestimation_factor);
        }
    }
    // non-dyadic k: exact up to rounding
    const auto scaled = run_audit(std::span<const fielddata::SiteDefinition>(sites), g.scaled(1.37), FamilyMapping(),
                                  AuditConfig{});
    for (std::size_t i = 0; i < sites.size(); ++i) {
        const auto& a = *base.sites[i].result;
        const auto& b = *scaled.sites[i].result;
        EXPECT_NEAR(b.filtered_t_ha, 1.37 * a.filtered_t_ha, 1e-12 * b.filtered_t_ha);
        EXPECT_NEAR(b.overestimation_factor, 1.37 * a.overestimation_factor, 1e-12 * b.overestimation_factor);
    }
}

TEST(AuditProperty, ReportsAreByteIdenticalAcrossRunsAndThreadCounts) {
    const auto sites = synth::six_sites(200);
    const auto g = synth::smooth_grid(200, 4);
    AuditConfig cfg;
    cfg.input_digests = {{"raster", "abc"}, {"sites", "def"}};
    std::string json_ref, csv_ref;
    for (int threads : {1, 2, 4, 1}) {
        cfg.max_threads = threads;
        const auto report = run_audit(std::span<const fielddata::SiteDefinition>(sites), g, FamilyMapping(), cfg);
        const auto j = report_to_json(report);
        const auto c = report_to_csv(report);
        if (json_ref.empty()) {
            json_ref = j;
            csv_ref = c;
        }
        EXPECT_EQ(j, json_ref);
        EXPECT_EQ(c, csv_ref);
    }
}

TEST(AuditProperty, FactorConsistencyFromSerializedReport) {
    const auto sites = synth::six_sites(200);
    const auto report =
        run_audit(std::span<const fielddata::SiteDefinition>(sites), synth::smooth_grid(200, 5), FamilyMapping(), {});
    const auto doc = nlohmann::json::parse(report_to_json(report));
    ASSERT_EQ(doc["sites"].size(), 6u);
    for (const auto& s : doc["sites"]) {
        const double gt = s["ground_truth_t_ha"].get<double>();
        const double f = s["filtered_t_ha"].get<double>();
        EXPECT_NEAR(f / gt, s["overestimation_factor"].get<double>(), 1e-12);
        EXPECT_EQ(s["factor_rounded"].get<double>(), round_to_tenth(s["overestimation_factor"].get<double>()));
    }
    // and from the CSV columns
    std::istringstream in(report_to_csv(report));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "site_id,ground_truth_t_ha,filtered_t_ha,overestimation_factor,factor_rounded");
    int rows = 0;
    while (std::getline(in, line)) {
        const auto cells = text::split(line, ',');
        ASSERT_EQ(cells.size(), 5u);
        const double gt = *text::parse_double(cells[1]);
        const double f = *text::parse_double(cells[2]);
        EXPECT_NEAR(f / gt, *text::parse_double(cells[3]), 1e-12);
        ++rows;
    }
    EXPECT_EQ(rows, 6);
}

TEST(Report, MetadataDescribesTheRun) {
    const std::vector sites = {cacao_site("only", 10, 10.0, 0.5)};
    AuditConfig cfg;
    cfg.target_pixel_m = 0.5;
    cfg.cap_m = 2.0;
    cfg.input_digests = {{"raster", "00ff"}};
    const auto report =
        run_audit(std::span<const fielddata::SiteDefinition>(sites), synth::constant_grid(40, 7.0), FamilyMapping(), cfg);
    const auto doc = nlohmann::json::parse(report_to_json(report));
    const auto& m = doc["metadata"];
    EXPECT_EQ(m["kernel"], "keys-cubic-convolution(a=-0.5)");
    EXPECT_EQ(m["inclusion_rule"], "pixel-center-in-polygon");
    EXPECT_EQ(m["target_pixel_m"], 0.5);
    EXPECT_EQ(m["cap_m"], 2.0);
    EXPECT_EQ(m["input_digests"]["raster"], "00ff");
    EXPECT_EQ(m["tool_version"], std::string(kToolVersion));
    EXPECT_FALSE(m.contains("timestamp_utc"));
    EXPECT_EQ(doc["sites"][0]["status"], "ok");

    cfg.include_timestamp = true;
    const auto stamped = nlohmann::json::parse(report_to_json(
        run_audit(std::span<const fielddata::SiteDefinition>(sites), synth::constant_grid(40, 7.0), FamilyMapping(), cfg)));
    EXPECT_TRUE(stamped["metadata"].contains("timestamp_utc"));
}

#include "carbon_audit/crownmatch.hpp"
#include "carbon_audit/error.hpp"
#include "support/matching.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace carbon_audit;
using namespace carbon_audit::crownmatch;
using matching::crown_at;
using matching::record_at;

namespace {

void expect_invariants(const matching::Instance& inst, const MatchResult& m, double cap) {
    std::set<std::string> trees, crowns;
    double sum = 0.0;
    for (const auto& p : m.pairs) {
        EXPECT_TRUE(trees.insert(p.tree_id).second) << "tree twice: " << p.tree_id;
        EXPECT_TRUE(crowns.insert(p.crown_id).second) << "crown twice: " << p.crown_id;
        EXPECT_LE(p.distance_m, cap);
        EXPECT_GE(p.distance_m, 0.0);
        sum += p.distance_m;
    }
    EXPECT_NEAR(m.total_distance_m, sum, 1e-9);
    EXPECT_EQ(m.pairs.size() + m.unmatched_records.size(), inst.records.size());
    EXPECT_EQ(m.pairs.size() + m.unmatched_crowns.size(), inst.crowns.size());
    for (const auto& id : m.unmatched_records) EXPECT_FALSE(trees.count(id));
    for (const auto& id : m.unmatched_crowns) EXPECT_FALSE(crowns.count(id));
    EXPECT_TRUE(std::is_sorted(m.pairs.begin(), m.pairs.end(),
                               [](const MatchPair& a, const MatchPair& b) { return a.tree_id < b.tree_id; }));
}

} // namespace

TEST(Match, SinglePair) {
    const std::vector records = {record_at("t1", 0.0, 0.0)};
    const std::vector crowns = {crown_at("c1", 0.3, 0.4)};
    const auto m = match_records_to_crowns(records, crowns, 3.0);
    ASSERT_EQ(m.pairs.size(), 1u);
    EXPECT_EQ(m.pairs[0].tree_id, "t1");
    EXPECT_EQ(m.pairs[0].crown_id, "c1");
    EXPECT_NEAR(m.pairs[0].distance_m, 0.5, 1e-9);
    EXPECT_TRUE(m.unmatched_records.empty());
    EXPECT_TRUE(m.unmatched_crowns.empty());
}

TEST(Match, CrossingLayoutBeatsGreedy) {
    // Greedy takes the 1 m pair (a-x) and is left with b-y at 4 m: total 5 m.
    // The optimum pairs a-y and b-x at 2 m each: total 4 m.
    const std::vector records = {record_at("a", 0.0, 0.0), record_at("b", 3.0, 0.0)};
    const std::vector crowns = {crown_at("x", 1.0, 0.0), crown_at("y", -0.5, std::sqrt(3.75))};
    const auto m = match_records_to_crowns(records, crowns, 5.0);
    ASSERT_EQ(m.pairs.size(), 2u);
    EXPECT_EQ(m.pairs[0].tree_id, "a");
    EXPECT_EQ(m.pairs[0].crown_id, "y");
    EXPECT_EQ(m.pairs[1].tree_id, "b");
    EXPECT_EQ(m.pairs[1].crown_id, "x");
    EXPECT_NEAR(m.total_distance_m, 4.0, 1e-6);
}

TEST(Match, CapExclusion) {
    const std::vector records = {record_at("t1", 0.0, 0.0)};
    const std::vector crowns = {crown_at("c1", 10.0, 0.0)};
    const auto m = match_records_to_crowns(records, crowns, 3.0);
    EXPECT_TRUE(m.pairs.empty());
    EXPECT_EQ(m.unmatched_records, std::vector<std::string>{"t1"});
    EXPECT_EQ(m.unmatched_crowns, std::vector<std::string>{"c1"});
}

TEST(Match, CardinalityBeforeDistance) {
    // a-x is the single shortest edge, but taking it leaves b unmatched.
    const std::vector records = {record_at("a", 0.0, 0.0), record_at("b", 2.8, 0.0)};
    const std::vector crowns = {crown_at("x", 0.1, 0.0), crown_at("y", -2.5, 0.0)};
    const auto m = match_records_to_crowns(records, crowns, 3.0);
    ASSERT_EQ(m.pairs.size(), 2u);
    EXPECT_EQ(m.pairs[0].crown_id, "y");
    EXPECT_EQ(m.pairs[1].crown_id, "x");
}

TEST(Match, EmptyCrownsLeaveEveryRecordUnmatched) {
    const std::vector records = {record_at("b", 0, 0), record_at("a", 1, 1)};
    const auto m = match_records_to_crowns(records, std::span<const CrownBox>{}, 3.0);
    EXPECT_TRUE(m.pairs.empty());
    EXPECT_EQ(m.unmatched_records, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(m.total_distance_m, 0.0);
}

TEST(Match, RejectsBadInput) {
    const std::vector records = {record_at("a", 0, 0), record_at("a", 1, 1)};
    const std::vector crowns = {crown_at("x", 0, 0)};
    EXPECT_THROW(match_records_to_crowns(records, crowns), ValidationError);
    const std::vector one = {record_at("a", 0, 0)};
    EXPECT_THROW(match_records_to_crowns(one, crowns, 0.0), DomainError);
    auto bad = crowns;
    std::swap(bad[0].min_lon, bad[0].max_lon);
    EXPECT_THROW(match_records_to_crowns(one, bad), ValidationError);
}

TEST(MatchProperty, OptimalAgainstBruteForce) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const auto inst = matching::random_instance(rng, 8, 12.0);
        const auto m = match_records_to_crowns(inst.records, inst.crowns, 3.0);
        const auto best = oracle::brute_force_matching(matching::distance_table(inst), 3.0);
        EXPECT_EQ(m.pairs.size(), best.cardinality) << "trial " << trial;
        EXPECT_NEAR(m.total_distance_m, best.total, 1e-9) << "trial " << trial;
        expect_invariants(inst, m, 3.0);
    }
}

TEST(MatchProperty, FuzzedInvariants) {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> cap(0.5, 6.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto inst = matching::random_instance(rng, 30, 25.0);
        const double c = cap(rng);
        expect_invariants(inst, match_records_to_crowns(inst.records, inst.crowns, c), c);
    }
}

TEST(MatchProperty, InputOrderDoesNotMatter) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        auto inst = matching::random_instance(rng, 20, 15.0);
        const auto a = match_records_to_crowns(inst.records, inst.crowns);
        std::shuffle(inst.records.begin(), inst.records.end(), rng);
        std::shuffle(inst.crowns.begin(), inst.crowns.end(), rng);
        const auto b = match_records_to_crowns(inst.records, inst.crowns);
        ASSERT_EQ(a.pairs.size(), b.pairs.size());
        for (std::size_t i = 0; i < a.pairs.size(); ++i) {
            EXPECT_EQ(a.pairs[i].tree_id, b.pairs[i].tree_id);
            EXPECT_EQ(a.pairs[i].crown_id, b.pairs[i].crown_id);
        }
        EXPECT_EQ(a.total_distance_m, b.total_distance_m);
    }
}

TEST(MatchProperty, RigidTranslationKeepsPairing) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> shift(-0.01, 0.01);
    for (int trial = 0; trial < 50; ++trial) {
        auto inst = matching::random_instance(rng, 15, 15.0);
        const auto a = match_records_to_crowns(inst.records, inst.crowns);
        const double dlon = shift(rng), dlat = shift(rng);
        for (auto& r : inst.records) r.lon += dlon, r.lat += dlat;
        for (auto& c : inst.crowns) c.min_lon += dlon, c.max_lon += dlon, c.min_lat += dlat, c.max_lat += dlat;
        const auto b = match_records_to_crowns(inst.records, inst.crowns);
        ASSERT_EQ(a.pairs.size(), b.pairs.size()) << trial;
        for (std::size_t i = 0; i < a.pairs.size(); ++i) {
            EXPECT_EQ(a.pairs[i].tree_id, b.pairs[i].tree_id);
            EXPECT_EQ(a.pairs[i].crown_id, b.pairs[i].crown_id);
        }
    }
}

TEST(Assignment, SmallSquareAndRectangular) {
    const std::vector<double> sq = {4, 1, 3, 2, 0, 5, 3, 2, 2};
    const auto a = detail::min_cost_assignment(sq, 3, 3);
    EXPECT_EQ(a, (std::vector<std::size_t>{1, 0, 2}));
    const std::vector<double> rect = {7, 3, 9, 1, 6, 2, 8, 5};
    const auto b = detail::min_cost_assignment(rect, 2, 4);
    EXPECT_EQ(b, (std::vector<std::size_t>{3, 1}));
    EXPECT_THROW(detail::min_cost_assignment(rect, 4, 2), DomainError);
}

TEST(PerCrownAgb, MatchedCrownsCarryRecordAgb) {
    auto r1 = record_at("t1", 0, 0);
    r1.species = "Musaceae";
    auto r2 = record_at("t2", 10, 0);
    auto r3 = record_at("t3", 20, 0); // same tree as t2
    const std::vector records = {r1, r2, r3};
    const std::vector crowns = {crown_at("c-b", 0.2, 0), crown_at("c-a", 10.1, 0), crown_at("c-c", 20.1, 0),
                                crown_at("lonely", 50, 50)};
    const auto m = match_records_to_crowns(records, crowns);
    const auto agb = per_crown_agb(m, records, allometry::FamilyMapping());
    ASSERT_EQ(agb.size(), 3u);
    EXPECT_EQ(agb[0].crown_id, "c-a");
    EXPECT_EQ(agb[1].crown_id, "c-b");
    EXPECT_EQ(agb[1].family, allometry::FamilyClass::Musacea);
    EXPECT_NEAR(agb[1].agb_kg, 4.0468886477749608277, 1e-12);
    EXPECT_EQ(agb[0].agb_kg, agb[2].agb_kg);
    for (const auto& a : agb) EXPECT_NE(a.crown_id, "lonely");
}

TEST(PerCrownAgb, ErrorsNameTheCrown) {
    auto r = record_at("t1", 0, 0);
    r.species = "Quercus";
    const std::vector records = {r};
    const std::vector crowns = {crown_at("crown-9", 0, 0)};
    try {
        per_crown_agb(match_records_to_crowns(records, crowns), records, allometry::FamilyMapping());
        FAIL();
    } catch (const ClassificationError& e) {
        EXPECT_NE(std::string(e.what()).find("crown-9"), std::string::npos);
    }
}

TEST(CrownIo, Csv) {
    const auto c = parse_crowns_csv("crown_id,min_lon,min_lat,max_lon,max_lat,confidence\n"
                                    "c1,-80.41,-1.2,-80.409,-1.199,0.9\n"
                                    "c2,-80.41,-1.2,-80.409,-1.199,\n");
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c[0].crown_id, "c1");
    EXPECT_EQ(c[0].confidence, 0.9);
    EXPECT_FALSE(c[1].confidence);
    EXPECT_DOUBLE_EQ(c[0].center().lon, -80.4095);
    EXPECT_THROW(parse_crowns_csv("crown_id,min_lon,min_lat,max_lon\n"), SchemaError);
    EXPECT_THROW(parse_crowns_csv("crown_id,min_lon,min_lat,max_lon,max_lat\nc,1,1,0,2\n"), ParseError);
    EXPECT_THROW(parse_crowns_csv("crown_id,min_lon,min_lat,max_lon,max_lat,confidence\nc,0,0,1,1,1.5\n"),
                 ParseError);
}

TEST(CrownIo, GeoJson) {
    const auto c = parse_crowns_geojson(R"({"type":"FeatureCollection","features":[
      {"type":"Feature","properties":{"crown_id":"k1","confidence":0.5},
       "geometry":{"type":"Polygon","coordinates":[[[1,2],[3,2],[3,5],[1,5],[1,2]]]}}]})");
    ASSERT_EQ(c.size(), 1u);
    EXPECT_EQ(c[0].crown_id, "k1");
    EXPECT_EQ(c[0].min_lon, 1.0);
    EXPECT_EQ(c[0].max_lat, 5.0);
    EXPECT_EQ(c[0].confidence, 0.5);
    EXPECT_THROW(parse_crowns_geojson(R"({"type":"FeatureCollection","features":[{"properties":{}}]})"), ParseError);
}

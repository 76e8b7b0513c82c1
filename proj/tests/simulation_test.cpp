#include <cmath>

#include <gtest/gtest.h>

#include "erank/error.hpp"
#include "erank/random.hpp"
#include "erank/simulation.hpp"

namespace erank::sim {
namespace {

WorldConfig world_of(std::vector<std::vector<double>> affinity, std::size_t reviews, std::uint64_t seed = 1) {
    WorldConfig w;
    w.destinations = affinity.size();
    w.activities = affinity.front().size();
    w.affinity = std::move(affinity);
    w.reviews_per_destination = reviews;
    w.seed = seed;
    return w;
}

ExperimentConfig two_arms(RankerKind control, RankerKind treatment) {
    return ExperimentConfig{"sim", "sim-salt", {{"control", control, 1.0}, {"treatment", treatment, 1.0}}};
}

TEST(World, Validation) {
    EXPECT_THROW(world_of({{0.0, 0.0}}, 5).validate(), ValidationError);
    EXPECT_THROW(world_of({{1.5, 0.0}}, 5).validate(), ValidationError);
    EXPECT_NO_THROW(world_of({{0.1, 0.0}}, 5).validate());
    auto planted = make_planted_world({}, 3);
    EXPECT_NO_THROW(planted.validate());
    EXPECT_EQ(planted.affinity, make_planted_world({}, 3).affinity);
}

TEST(GenerateCorpus, DegenerateAffinity) {
    auto reviews = generate_corpus(world_of({{1.0, 0.0, 0.0}}, 500));
    ASSERT_EQ(reviews.size(), 500u);
    for (const auto& r : reviews) EXPECT_EQ(r.endorsed, (std::vector<ActivityId>{0}));
}

TEST(GenerateCorpus, BinomialConcentration) {
    auto w = world_of({{0.5, 0.5, 0.0}}, 10000, 42);
    auto idx = build_index(generate_corpus(w), 1, 3, 0.0);
    double share = double(idx.count(0, 0)) / double(idx.destination_total(0));
    EXPECT_GE(share, 0.47);
    EXPECT_LE(share, 0.53);
    EXPECT_EQ(idx.count(0, 2), 0u);
}

TEST(GenerateCorpus, SeedDeterministic) {
    auto w = make_planted_world({}, 9);
    EXPECT_EQ(generate_corpus(w), generate_corpus(w));
    auto other = w;
    other.seed = 10;
    EXPECT_NE(generate_corpus(w), generate_corpus(other));
}

TEST(ClickModelTest, DiscountShape) {
    ClickModel m;
    EXPECT_NEAR(m.discount(1), 1.0 / std::log2(3.0), 1e-15);
    EXPECT_NEAR(m.discount(1), 0.631, 5e-4);
    for (std::size_t r = 1; r < 50; ++r) {
        EXPECT_GE(m.discount(r), m.discount(r + 1));
        EXPECT_LE(m.discount(r), 1.0);
        EXPECT_GT(m.discount(r), 0.0);
    }
    EXPECT_THROW(m.discount(0), ValidationError);
}

TEST(Session, PerfectMatchClicksAtFirstPositionDiscount) {
    auto w = world_of({{1.0}}, 10);
    auto idx = build_index(generate_corpus(w), 1, 1, 1.0);
    SimUser user{{{0, 1.0}}};
    EXPECT_EQ(relevance(user, w, 0), 1.0);
    int clicks = 0;
    const int n = 20000;
    for (int s = 0; s < n; ++s) {
        auto rec = simulate_user_session(user, idx, w, RankerKind::naive_bayes, {}, {}, derive_seed(77, s));
        ASSERT_EQ(rec.shown, (std::vector<DestinationId>{0}));
        clicks += !rec.clicked.empty();
    }
    double p = 1.0 / std::log2(3.0);
    EXPECT_NEAR(double(clicks) / n, p, 4 * std::sqrt(p * (1 - p) / n));
}

TEST(Session, ZeroRelevanceNeverClicks) {
    auto w = world_of({{0.9, 0.2}, {0.5, 0.5}}, 50);
    w.appeal = {0.0, 0.0};
    auto idx = build_index(generate_corpus(w), 2, 2, 1.0);
    SimUser user{{{0, 0.5}, {1, 0.5}}};
    for (int s = 0; s < 2000; ++s) {
        auto rec = simulate_user_session(user, idx, w, RankerKind::random, {}, {}, s);
        EXPECT_FALSE(rec.shown.empty());
        EXPECT_TRUE(rec.clicked.empty());
    }
}

TEST(Session, EmptyCandidateSet) {
    auto w = world_of({{0.9, 0.0}, {0.5, 0.0}}, 20);
    auto idx = build_index(generate_corpus(w), 2, 2, 1.0);
    SimUser user{{{1, 1.0}}};
    auto rec = simulate_user_session(user, idx, w, RankerKind::naive_bayes, {}, {}, 5);
    EXPECT_EQ(rec.query, (std::vector<ActivityId>{1}));
    EXPECT_TRUE(rec.shown.empty());
    EXPECT_TRUE(rec.clicked.empty());
}

TEST(Session, DeterministicAndPageLimited) {
    auto w = make_planted_world({}, 4);
    auto idx = build_index(generate_corpus(w), w.destinations, w.activities, 1.0);
    auto user = make_user(w, {}, 8);
    ClickModel clicks;
    clicks.page_size = 4;
    auto a = simulate_user_session(user, idx, w, RankerKind::random, clicks, {}, 99);
    auto b = simulate_user_session(user, idx, w, RankerKind::random, clicks, {}, 99);
    EXPECT_EQ(a, b);
    EXPECT_LE(a.shown.size(), 4u);
    EXPECT_GE(a.query.size(), 1u);
    EXPECT_LE(a.query.size(), 3u);
    for (auto c : a.clicked) EXPECT_NE(std::find(a.shown.begin(), a.shown.end(), c), a.shown.end());
}

TEST(AbSimulation, NoUsersMeansNoControlData) {
    auto w = make_planted_world({}, 1);
    EXPECT_THROW(run_ab_simulation(w, two_arms(RankerKind::random, RankerKind::naive_bayes), 0, 1), ValidationError);
}

TEST(AbSimulation, ExternalArmCannotBeSimulated) {
    auto w = make_planted_world({}, 1);
    ExperimentConfig cfg{"x", "s", {{"baseline", std::nullopt, 1.0}, {"nb", RankerKind::naive_bayes, 1.0}}};
    EXPECT_THROW(run_ab_simulation(w, cfg, 100, 1), ValidationError);
}

TEST(AbSimulation, FullyDeterministic) {
    auto w = make_planted_world({}, 5);
    auto cfg = two_arms(RankerKind::random, RankerKind::popularity);
    auto a = run_ab_simulation(w, cfg, 3000, 17);
    auto b = run_ab_simulation(w, cfg, 3000, 17);
    EXPECT_EQ(a.log, b.log);
    EXPECT_EQ(report_to_json(a.report).dump(), report_to_json(b.report).dump());
}

TEST(AbSimulation, SessionsDependOnlyOnSeedAndOrdinal) {
    auto w = make_planted_world({}, 5);
    auto idx = build_index(generate_corpus(w), w.destinations, w.activities, 1.0, "simulated");
    auto cfg = two_arms(RankerKind::naive_bayes, RankerKind::popularity);
    auto run = run_ab_simulation(w, idx, cfg, 500, 23);
    // Recompute a few sessions out of order, independently of the loop.
    for (std::size_t i : {499u, 0u, 250u, 17u}) {
        const auto& rec = run.log[i];
        auto variant = cfg.variants[assign_variant_index(rec.user_id, cfg)];
        auto user = make_user(w, {}, derive_seed(23, 2 * i));
        auto again = simulate_user_session(user, idx, w, *variant.ranker, {}, {}, derive_seed(23, 2 * i + 1));
        EXPECT_EQ(again.shown, rec.shown);
        EXPECT_EQ(again.clicked, rec.clicked);
        EXPECT_EQ(variant.name, rec.variant);
    }
}

TEST(AbSimulation, AAFalsePositiveRateMatchesLevel) {
    auto w = make_planted_world({.destinations = 60, .activities = 15}, 2);
    auto idx = build_index(generate_corpus(w), w.destinations, w.activities, 1.0, "simulated");
    auto cfg = two_arms(RankerKind::random, RankerKind::random);
    int significant = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed)
        significant += run_ab_simulation(w, idx, cfg, 20000, 1000 + seed).report.comparisons.at(0).result.confidence >= 0.90;
    // P(confidence >= 0.90) is 0.10 under the null; P(Binomial(100, 0.1) >= 20) < 0.002.
    EXPECT_LT(significant, 20);
}

TEST(AbSimulation, PlantedEffectAgreesWithExpectedRates) {
    auto w = make_planted_world({}, 7);
    auto idx = build_index(generate_corpus(w), w.destinations, w.activities, 1.0, "simulated");
    auto cfg = two_arms(RankerKind::random, RankerKind::naive_bayes);
    auto run = run_ab_simulation(w, idx, cfg, 40000, 3);
    const auto& report = run.report;
    ASSERT_EQ(report.comparisons.size(), 1u);
    EXPECT_GT(*report.variants[1].conversion_rate, *report.variants[0].conversion_rate);
    EXPECT_GT(report.comparisons[0].result.confidence, 0.99);

    // Direct computation from the world model: the same users and queries, with
    // clicks integrated out instead of sampled.
    double expected[2] = {0, 0};
    std::size_t n[2] = {0, 0};
    for (std::size_t i = 0; i < run.log.size(); ++i) {
        const auto& rec = run.log[i];
        std::size_t arm = rec.variant == "control" ? 0 : 1;
        auto user = make_user(w, {}, derive_seed(3, 2 * i));
        RankedList page;
        for (auto d : rec.shown) page.entries.push_back({d, 0.0});
        expected[arm] += expected_conversion(user, w, {}, page);
        ++n[arm];
    }
    for (std::size_t arm = 0; arm < 2; ++arm) {
        double e = expected[arm] / double(n[arm]);
        double se = std::sqrt(e * (1 - e) / double(n[arm]));
        EXPECT_NEAR(*report.variants[arm].conversion_rate, e, 4 * se) << "arm " << arm;
    }
    EXPECT_GT(expected[1] / double(n[1]), expected[0] / double(n[0]));
}

TEST(SimulationDocumentTest, ParsesExplicitAndPlantedWorlds) {
    auto explicit_doc = nlohmann::json::parse(R"({"world":{"affinity":[[1,0],[0.5,0.5]],"reviews_per_destination":7},
        "click_model":{"page_size":4},"users":{"interests":2,"max_query":1},"alpha":0.5})");
    auto d = simulation_from_json(explicit_doc, 11);
    EXPECT_EQ(d.world.destinations, 2u);
    EXPECT_EQ(d.world.activities, 2u);
    EXPECT_EQ(d.world.seed, 11u);
    EXPECT_EQ(d.settings.clicks.page_size, 4u);
    EXPECT_EQ(d.settings.users.max_query, 1u);
    EXPECT_EQ(d.settings.alpha, 0.5);

    auto planted = simulation_from_json(nlohmann::json::parse(R"({"planted":{"destinations":20,"activities":6}})"), 3);
    EXPECT_EQ(planted.world.destinations, 20u);
    auto round = simulation_from_json(nlohmann::json{{"world", world_to_json(planted.world)}});
    EXPECT_EQ(round.world.affinity, planted.world.affinity);
    EXPECT_EQ(round.world.appeal, planted.world.appeal);

    EXPECT_THROW(simulation_from_json(nlohmann::json::parse(R"({"world":{"affinity":[[0,0]]}})")), ValidationError);
}

}  // namespace
}  // namespace erank::sim

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "erank/error.hpp"
#include "erank/service.hpp"
#include "erank/simulation.hpp"
#include "support/fixtures.hpp"

namespace erank::service {
namespace {

namespace fs = std::filesystem;
using erank::testing::toy_snapshot;
using nlohmann::json;

class TempDir {
public:
    TempDir() {
        path_ = fs::temp_directory_path() / ("erank-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter_++));
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    fs::path path_;
    static inline int counter_ = 0;
};

ExperimentConfig nb_only() {
    return ExperimentConfig{"df", "salt", {{"nb", RankerKind::naive_bayes, 1.0}, {"random", RankerKind::random, 0.0}}};
}

struct Harness {
    TempDir dir;
    std::unique_ptr<DestinationFinder> finder;

    explicit Harness(std::optional<ExperimentConfig> exp = nb_only(), bool strict = true) { open(std::move(exp), strict); }

    void open(std::optional<ExperimentConfig> exp = nb_only(), bool strict = true) {
        ServiceConfig cfg;
        cfg.index_snapshot_path = "unused";
        cfg.log_path = dir.file("clicks.csv");
        cfg.strict = strict;
        finder = std::make_unique<DestinationFinder>(toy_snapshot(), std::move(exp), cfg);
    }

    Response search(const std::string& activities, std::optional<std::string> user = "alice",
                    std::optional<std::string> limit = std::nullopt) {
        return finder->search(SearchRequest{activities, std::move(user), std::nullopt, std::move(limit)});
    }

    std::size_t log_rows() const {
        std::ifstream in(dir.file("clicks.csv"));
        std::size_t n = 0;
        std::string line;
        while (std::getline(in, line)) n += !line.empty();
        return n - 1;
    }
};

std::vector<std::string> keys(const Response& r) {
    std::vector<std::string> out;
    for (const auto& e : r.body["results"]) out.push_back(e["key"]);
    return out;
}

TEST(Activities, ListsVocabularyInIdOrder) {
    Harness h;
    auto r = h.finder->activities();
    ASSERT_EQ(r.status, 200);
    ASSERT_EQ(r.body["activities"].size(), 3u);
    EXPECT_EQ(r.body["activities"][2], (json{{"id", 2}, {"name", "Nightlife"}}));
}

TEST(Activities, ProductionSizedVocabulary) {
    TempDir dir;
    std::vector<std::string> names;
    for (int i = 0; i < 256; ++i) names.push_back("activity-" + std::to_string(i));
    std::vector<std::uint64_t> counts(256, 1);
    IndexSnapshot snap{ActivityVocabulary(names), DestinationTable({{0, "x", "X", ""}}),
                       EndorsementIndex(1, 256, counts, 1.0, "", "")};
    ServiceConfig cfg;
    cfg.log_path = dir.file("log.csv");
    DestinationFinder f(std::move(snap), std::nullopt, cfg);
    EXPECT_EQ(f.activities().body["activities"].size(), 256u);
}

TEST(Search, NaiveBayesVariantRanksToyFixture) {
    Harness h;
    auto r = h.search("beach");
    ASSERT_EQ(r.status, 200);
    EXPECT_EQ(r.body["variant"], "nb");
    EXPECT_EQ(r.body["ranker"], "naive_bayes");
    EXPECT_EQ(keys(r), (std::vector<std::string>{"A", "B"}));
    EXPECT_NEAR(std::exp(r.body["results"][0]["score"].get<double>()), 0.40, 1e-15);
    EXPECT_EQ(r.body["results"][0]["profile"][0]["name"], "Beach");
    EXPECT_DOUBLE_EQ(r.body["results"][0]["profile"][0]["share"].get<double>(), 0.8);
    EXPECT_EQ(keys(h.search("nightlife")), (std::vector<std::string>{"B"}));
}

TEST(Search, NamesAndIdsCaseInsensitive) {
    Harness h;
    EXPECT_EQ(keys(h.search(" BEACH ,food")), (std::vector<std::string>{"A", "B"}));
    EXPECT_EQ(keys(h.search("2")), (std::vector<std::string>{"B"}));
    EXPECT_EQ(h.search("beach|food").body["query"].size(), 2u);
}

TEST(Search, LimitTruncates) {
    Harness h;
    EXPECT_EQ(h.search("beach", "alice", "1").body["results"].size(), 1u);
    EXPECT_LE(h.search("beach", "alice", "4").body["results"].size(), 4u);
    EXPECT_EQ(h.search("beach", "alice", "0").status, 400);
    EXPECT_EQ(h.search("beach", "alice", "x").status, 400);
}

TEST(Search, ErrorStatuses) {
    Harness h;
    EXPECT_EQ(h.search("").status, 400);
    EXPECT_EQ(h.search(" , ").status, 400);
    EXPECT_EQ(h.search("skiing").status, 404);
    EXPECT_EQ(h.search("beach,skiing").status, 404);
    EXPECT_EQ(h.search("99").status, 404);

    Harness lenient(nb_only(), false);
    auto r = lenient.search("beach,skiing");
    EXPECT_EQ(r.status, 200);
    EXPECT_EQ(r.body["ignored"], json::array({"skiing"}));
    EXPECT_EQ(lenient.search("skiing").status, 400);
}

TEST(Search, AppendsImpressionAndAssignsAnonymousUsers) {
    Harness h;
    auto r = h.search("beach", std::nullopt);
    ASSERT_EQ(r.status, 200);
    ASSERT_TRUE(r.set_user_cookie);
    EXPECT_EQ(r.body["user"], *r.set_user_cookie);
    EXPECT_EQ(h.log_rows(), 1u);

    auto again = h.finder->search(SearchRequest{"beach", std::nullopt, *r.set_user_cookie, std::nullopt});
    EXPECT_FALSE(again.set_user_cookie);
    EXPECT_EQ(again.body["user"], r.body["user"]);
    EXPECT_NE(again.body["session"], r.body["session"]);
}

TEST(Click, HappyPathIdempotentAndConflicts) {
    Harness h;
    auto s = h.search("beach");
    std::string session = s.body["session"];
    auto before = h.log_rows();

    auto ok = h.finder->click(json{{"user", "alice"}, {"session", session}, {"destination", 1}}.dump());
    EXPECT_EQ(ok.status, 200);
    EXPECT_EQ(ok.body["logged"], true);
    EXPECT_EQ(h.log_rows(), before + 1);

    auto dup = h.finder->click(json{{"user", "alice"}, {"session", session}, {"destination", "B"}}.dump());
    EXPECT_EQ(dup.status, 200);
    EXPECT_EQ(dup.body["logged"], false);
    EXPECT_EQ(h.log_rows(), before + 1);

    auto narrow = h.search("nightlife");
    auto unshown = h.finder->click(json{{"session", narrow.body["session"]}, {"destination", 0}}.dump());
    EXPECT_EQ(unshown.status, 409);
    EXPECT_EQ(h.finder->click(json{{"session", "nope"}, {"destination", 0}}.dump()).status, 404);
    EXPECT_EQ(h.finder->click(json{{"user", "mallory"}, {"session", session}, {"destination", 0}}.dump()).status, 404);
    EXPECT_EQ(h.finder->click("not json").status, 400);
}

TEST(Report, EmptyUnknownAndFromTraffic) {
    Harness h;
    auto empty = h.finder->report("df");
    ASSERT_EQ(empty.status, 200);
    EXPECT_EQ(empty.body["variants"][0]["users"], 0);
    EXPECT_TRUE(empty.body["comparisons"].empty());
    EXPECT_EQ(h.finder->report("missing").status, 404);

    auto s = h.search("beach", "bob");
    h.finder->click(json{{"session", s.body["session"]}, {"destination", 0}}.dump());
    h.search("food", "carol");
    auto r = h.finder->report("df");
    EXPECT_EQ(r.body["variants"][0]["users"], 2);
    EXPECT_EQ(r.body["variants"][0]["clickers"], 1);

    Harness no_experiment(std::nullopt);
    EXPECT_EQ(no_experiment.finder->report("df").status, 404);
    EXPECT_EQ(no_experiment.search("beach").body["variant"], "default");
}

TEST(Report, EqualsOfflineEvaluationOfTheSameLog) {
    Harness h;
    auto world = sim::make_planted_world({.destinations = 2, .activities = 3}, 1);
    ExperimentConfig cfg{"df", "salt", {{"nb", RankerKind::naive_bayes, 1.0}, {"random", RankerKind::random, 1.0}}};
    auto idx = toy_snapshot().index;
    auto run = sim::run_ab_simulation(world, idx, cfg, 2000, 5);
    {
        std::ofstream out(h.dir.file("clicks.csv"), std::ios::trunc);
        write_click_log(out, run.log);
    }
    h.open(cfg);
    auto served = h.finder->report("df");
    auto offline = evaluate(read_click_log_file(h.dir.file("clicks.csv")), cfg);
    EXPECT_EQ(served.body.dump(), report_to_json(offline).dump());
    EXPECT_EQ(served.body.dump(), report_to_json(run.report).dump());
}

TEST(Report, ReplayAfterRestartReproducesState) {
    Harness h;
    auto s1 = h.search("beach", "dave");
    h.finder->click(json{{"session", s1.body["session"]}, {"destination", 0}}.dump());
    auto s2 = h.search("food", "erin");
    auto before = h.finder->report("df").body;

    h.open();  // a fresh process over the same log
    EXPECT_EQ(h.finder->report("df").body, before);
    auto dup = h.finder->click(json{{"session", s1.body["session"]}, {"destination", 0}}.dump());
    EXPECT_EQ(dup.body["logged"], false);
    auto fresh = h.finder->click(json{{"session", s2.body["session"]}, {"destination", 1}}.dump());
    EXPECT_EQ(fresh.body["logged"], true);
    auto s3 = h.search("beach", "frank");
    EXPECT_GT(std::stoll(s3.body["session"].get<std::string>()), std::stoll(s2.body["session"].get<std::string>()));
}

TEST(Config, EnvironmentOverridesLogPath) {
    TempDir dir;
    auto path = dir.file("env.csv");
    ::setenv(kLogEnvVar, path.c_str(), 1);
    EXPECT_EQ(resolve_log_path("configured.csv"), path);
    ServiceConfig cfg;
    cfg.log_path = dir.file("ignored.csv");
    DestinationFinder f(toy_snapshot(), nb_only(), cfg);
    EXPECT_EQ(f.log().path(), path);
    ::unsetenv(kLogEnvVar);
    EXPECT_EQ(resolve_log_path("configured.csv"), "configured.csv");
    EXPECT_FALSE(fs::exists(dir.file("ignored.csv")));
}

TEST(Config, ParsesJsonAndListen) {
    auto cfg = service_config_from_json(json::parse(R"({"index_snapshot_path":"i.json","page_size":4,
        "default_ranker":"popularity","listen":"0.0.0.0:9000","strict":false})"));
    EXPECT_EQ(cfg.page_size, 4u);
    EXPECT_EQ(cfg.default_ranker, RankerKind::popularity);
    EXPECT_FALSE(cfg.strict);
    EXPECT_EQ(parse_listen("0.0.0.0:9000"), (std::pair<std::string, int>{"0.0.0.0", 9000}));
    EXPECT_EQ(parse_listen("8080").first, "127.0.0.1");
    EXPECT_THROW(parse_listen("host:port"), ValidationError);
    EXPECT_THROW(service_config_from_json(json::parse(R"({"index_snapshot_path":"i","page_size":0})")), ValidationError);
}

TEST(Http, EndToEnd) {
    Harness h;
    ApiServer server(*h.finder);
    int port = server.bind("127.0.0.1", 0);
    ASSERT_GT(port, 0);
    std::thread loop([&] { server.listen(); });

    httplib::Client cli("127.0.0.1", port);
    cli.set_connection_timeout(5);
    auto acts = cli.Get("/api/activities");
    ASSERT_TRUE(acts);
    EXPECT_EQ(acts->status, 200);
    EXPECT_EQ(json::parse(acts->body)["activities"].size(), 3u);

    auto search = cli.Get("/api/search?activities=Beach&limit=4");
    ASSERT_TRUE(search);
    EXPECT_EQ(search->status, 200);
    EXPECT_NE(search->get_header_value("Set-Cookie").find(kUserCookie), std::string::npos);
    auto body = json::parse(search->body);
    EXPECT_EQ(keys(Response{200, body, {}}), (std::vector<std::string>{"A", "B"}));

    httplib::Headers cookie{{"Cookie", std::string("theme=dark; ") + kUserCookie + "=" + body["user"].get<std::string>()}};
    auto again = cli.Get("/api/search?activities=food", cookie);
    EXPECT_EQ(json::parse(again->body)["user"], body["user"]);

    auto click = cli.Post("/api/click", json{{"user", body["user"]}, {"session", body["session"]}, {"destination", 0}}.dump(),
                          "application/json");
    ASSERT_TRUE(click);
    EXPECT_EQ(click->status, 200);
    auto conflict = cli.Post("/api/click", json{{"session", body["session"]}, {"destination", 7}}.dump(), "application/json");
    EXPECT_EQ(conflict->status, 409);

    EXPECT_EQ(cli.Get("/api/search?activities=")->status, 400);
    EXPECT_EQ(cli.Get("/api/search?activities=surfing")->status, 404);
    EXPECT_EQ(cli.Get("/api/experiments/nope/report")->status, 404);
    auto report = cli.Get("/api/experiments/df/report");
    ASSERT_EQ(report->status, 200);
    EXPECT_EQ(json::parse(report->body)["variants"][0]["clickers"], 1);

    server.stop();
    loop.join();
}

}  // namespace
}  // namespace erank::service

// Command-line front end: offline index builds, the HTTP service, simulation and
// experiment statistics.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "erank/corpus.hpp"
#include "erank/error.hpp"
#include "erank/experiment.hpp"
#include "erank/index.hpp"
#include "erank/service.hpp"
#include "erank/simulation.hpp"
#include "erank/snapshot.hpp"
#include "erank/stats.hpp"
#include "erank/text.hpp"

namespace {

using namespace erank;

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open " + path);
    return in;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out << content;
}

struct BuildIndexArgs {
    std::string vocab, dests, reviews, out;
    double alpha = 1.0;
    bool lenient = false;
    std::string built_at;
};

int run_build_index(const BuildIndexArgs& a) {
    auto vin = open_input(a.vocab);
    auto vocab = load_vocabulary(vin);
    auto din = open_input(a.dests);
    auto dests = load_destinations(din);
    auto rin = open_input(a.reviews);
    auto loaded = load_reviews(rin, vocab, dests, ReviewLoadOptions{a.lenient});
    auto index = build_index(loaded.reviews, dests.size(), vocab.size(), a.alpha,
                             a.built_at.empty() ? utc_timestamp_now() : a.built_at);
    std::cerr << "reviews=" << loaded.reviews.size() << " destinations=" << dests.size()
              << " activities=" << vocab.size() << " endorsements=" << index.grand_total();
    if (a.lenient)
        std::cerr << " skipped_endorsements=" << loaded.skipped_endorsements << " rejected_rows=" << loaded.rejected_rows;
    std::cerr << '\n';
    IndexSnapshot snap{std::move(vocab), std::move(dests), std::move(index)};
    write_text(a.out, write_snapshot(snap));
    std::cout << snap.index.source_digest() << '\n';
    return 0;
}

struct ServeArgs {
    std::string config, index, experiment, listen, ranker, log;
    std::size_t page_size = 0;
    bool lenient = false;
};

service::ApiServer* g_server_for_signal = nullptr;

int run_serve(const ServeArgs& a) {
    service::ServiceConfig cfg;
    if (!a.config.empty()) cfg = service::load_service_config(a.config);
    if (!a.index.empty()) cfg.index_snapshot_path = a.index;
    if (!a.experiment.empty()) cfg.experiment_config_path = a.experiment;
    if (!a.listen.empty()) cfg.listen = a.listen;
    if (a.page_size) cfg.page_size = a.page_size;
    if (!a.ranker.empty()) cfg.default_ranker = parse_ranker(a.ranker);
    if (!a.log.empty()) cfg.log_path = a.log;
    if (a.lenient) cfg.strict = false;
    cfg.validate();

    auto finder = service::DestinationFinder::from_config(cfg);
    service::ApiServer server(*finder);
    auto [host, port] = service::parse_listen(cfg.listen);
    int bound = server.bind(host, port);
    if (bound < 0) throw Error("cannot bind " + cfg.listen);
    g_server_for_signal = &server;
    std::signal(SIGINT, [](int) {
        if (g_server_for_signal) g_server_for_signal->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (g_server_for_signal) g_server_for_signal->stop();
    });
    std::cerr << "listening on " << host << ':' << bound << " (log " << finder->log().path() << ")\n";
    server.listen();
    g_server_for_signal = nullptr;
    return 0;
}

struct SimulateArgs {
    std::string world, experiment, log, json_out;
    std::size_t users = 20000;
    std::uint64_t seed = 1;
};

int run_simulate(const SimulateArgs& a) {
    auto win = open_input(a.world);
    auto doc = sim::simulation_from_json(nlohmann::json::parse(win), a.seed);
    auto config = load_experiment_file(a.experiment);
    auto result = sim::run_ab_simulation(doc.world, config, a.users, a.seed, doc.settings);
    if (!a.log.empty()) {
        std::ofstream out(a.log, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + a.log);
        write_click_log(out, result.log);
    }
    if (!a.json_out.empty()) write_text(a.json_out, report_to_json(result.report).dump(2) + "\n");
    std::cout << render_table(result.report);
    return 0;
}

struct GTestArgs {
    std::vector<std::uint64_t> counts;
    bool json = false;
};

int run_gtest(const GTestArgs& a) {
    auto r = stats::g_test_2x2(a.counts[0], a.counts[1], a.counts[2], a.counts[3]);
    if (a.json) {
        nlohmann::json j = {{"g_statistic", r.g_statistic},
                            {"degrees_of_freedom", r.degrees_of_freedom},
                            {"p_value", r.p_value},
                            {"confidence", r.confidence},
                            {"significant_at_90", r.significant_at_90}};
        std::cout << j.dump(2) << '\n';
        return 0;
    }
    std::printf("G = %.6f  df = %d  p = %.6f  confidence = %.2f%%  %s\n", r.g_statistic, r.degrees_of_freedom,
                r.p_value, r.confidence * 100.0, r.significant_at_90 ? "significant at 90%" : "not significant");
    return 0;
}

struct ReportArgs {
    std::string log, experiment;
    double level = 0.90;
    bool json = false, sessions = false;
};

int run_report(const ReportArgs& a) {
    auto config = load_experiment_file(a.experiment);
    auto records = read_click_log_file(a.log);
    auto report = evaluate(records, config, a.level, a.sessions ? ConversionUnit::sessions : ConversionUnit::users);
    if (a.json)
        std::cout << report_to_json(report).dump(2) << '\n';
    else
        std::cout << render_table(report);
    return 0;
}

struct RankArgs {
    std::string index, activities, ranker = "naive_bayes";
    std::uint64_t seed = 0;
    std::size_t limit = 10;
};

int run_rank(const RankArgs& a) {
    auto snap = read_snapshot_file(a.index);
    std::vector<ActivityId> ids;
    for (const auto& name : text::split_list(a.activities, ',')) {
        auto id = snap.vocabulary.find_folded(name);
        if (!id) throw ValidationError("unknown activity '" + name + "'");
        ids.push_back(*id);
    }
    auto list = rank(snap.index, Query::make(std::move(ids), snap.vocabulary.size()), parse_ranker(a.ranker), a.seed);
    for (std::size_t i = 0; i < list.entries.size() && i < a.limit; ++i) {
        const auto& e = list.entries[i];
        std::printf("%3zu  %-24s %.6f\n", i + 1, snap.destinations.at(e.destination).name.c_str(), e.score);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Destination ranking from endorsement data, with A/B experiment tooling"};
    app.require_subcommand(1);

    BuildIndexArgs build;
    auto* b = app.add_subcommand("build-index", "Build an index snapshot from vocabulary, destinations and reviews");
    b->add_option("--vocab", build.vocab, "Activity vocabulary, one name per line")->required();
    b->add_option("--destinations", build.dests, "Destinations CSV")->required();
    b->add_option("--reviews", build.reviews, "Reviews CSV")->required();
    b->add_option("--index,-o", build.out, "Output snapshot path")->required();
    b->add_option("--alpha", build.alpha, "Additive smoothing constant")->check(CLI::NonNegativeNumber);
    b->add_option("--built-at", build.built_at, "Override the build timestamp");
    b->add_flag("--lenient", build.lenient, "Skip unknown activity names instead of failing");

    ServeArgs serve;
    auto* s = app.add_subcommand("serve", "Run the HTTP API");
    s->add_option("--config", serve.config, "Service config JSON");
    s->add_option("--index", serve.index, "Index snapshot");
    s->add_option("--experiment", serve.experiment, "Experiment config JSON");
    s->add_option("--listen", serve.listen, "host:port");
    s->add_option("--page-size", serve.page_size, "Default result count")->check(CLI::PositiveNumber);
    s->add_option("--ranker", serve.ranker, "Ranker when no experiment variant applies");
    s->add_option("--log", serve.log, "Click log path (ENDORSEMENT_RANK_LOG overrides)");
    s->add_flag("--lenient", serve.lenient, "Ignore unknown activity names in searches");

    SimulateArgs simulate;
    auto* m = app.add_subcommand("simulate", "Simulate an A/B test against a synthetic world");
    m->add_option("--world", simulate.world, "Simulation config JSON")->required();
    m->add_option("--experiment", simulate.experiment, "Experiment config JSON")->required();
    m->add_option("--users", simulate.users, "Number of simulated users");
    m->add_option("--seed", simulate.seed, "Simulation seed");
    m->add_option("--log", simulate.log, "Write the click log here");
    m->add_option("--json", simulate.json_out, "Write the JSON report here");

    GTestArgs gtest;
    auto* g = app.add_subcommand("gtest", "G-test of two conversion arms");
    g->add_option("counts", gtest.counts, "users_a clickers_a users_b clickers_b")->required()->expected(4);
    g->add_flag("--json", gtest.json, "Print JSON");

    ReportArgs report;
    auto* r = app.add_subcommand("report", "Experiment report from a click log");
    r->add_option("--log", report.log, "Click log CSV")->required();
    r->add_option("--experiment", report.experiment, "Experiment config JSON")->required();
    r->add_option("--level", report.level, "Interval level")->check(CLI::Range(0.5, 0.9999));
    r->add_flag("--json", report.json, "Print JSON");
    r->add_flag("--sessions", report.sessions, "Count sessions instead of users");

    RankArgs rank_args;
    auto* k = app.add_subcommand("rank", "Rank destinations for a query");
    k->add_option("--index", rank_args.index, "Index snapshot")->required();
    k->add_option("--activities", rank_args.activities, "Comma-separated activity names")->required();
    k->add_option("--ranker", rank_args.ranker, "random | popularity | naive_bayes");
    k->add_option("--seed", rank_args.seed, "Seed for the random ranker");
    k->add_option("--limit", rank_args.limit, "Rows to print");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*b) return run_build_index(build);
        if (*s) return run_serve(serve);
        if (*m) return run_simulate(simulate);
        if (*g) return run_gtest(gtest);
        if (*r) return run_report(report);
        if (*k) return run_rank(rank_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}

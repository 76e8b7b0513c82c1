#include <fstream>
#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "erank/corpus.hpp"
#include "erank/error.hpp"
#include "erank/experiment.hpp"
#include "erank/index.hpp"
#include "erank/ranking.hpp"
#include "erank/simulation.hpp"
#include "erank/snapshot.hpp"
#include "erank/stats.hpp"

namespace py = pybind11;
using namespace erank;
using nlohmann::json;

namespace {

IndexSnapshot snapshot_from_files(const std::string& vocab, const std::string& dests, const std::string& reviews,
                                  double alpha, bool lenient) {
    auto open = [](const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IngestError("cannot open " + path);
        return in;
    };
    auto vin = open(vocab);
    auto din = open(dests);
    auto rin = open(reviews);
    auto v = load_vocabulary(vin);
    auto d = load_destinations(din);
    auto loaded = load_reviews(rin, v, d, ReviewLoadOptions{lenient});
    auto idx = build_index(loaded.reviews, d.size(), v.size(), alpha);
    return IndexSnapshot{std::move(v), std::move(d), std::move(idx)};
}

std::vector<ActivityId> resolve(const IndexSnapshot& s, const std::vector<std::string>& names) {
    std::vector<ActivityId> ids;
    for (const auto& n : names) {
        auto id = s.vocabulary.find_folded(n);
        if (!id) throw py::key_error("unknown activity: " + n);
        ids.push_back(*id);
    }
    return ids;
}

py::list ranked_rows(const RankedList& list, const DestinationTable* dests) {
    py::list out;
    for (const auto& e : list.entries) {
        if (dests)
            out.append(py::make_tuple(dests->at(e.destination).key, e.score));
        else
            out.append(py::make_tuple(e.destination, e.score));
    }
    return out;
}

std::string report_json(const ExperimentReport& r) { return report_to_json(r).dump(); }

}  // namespace

PYBIND11_MODULE(_erank, m) {
    py::register_exception<IngestError>(m, "IngestError", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

    py::class_<EndorsementIndex>(m, "EndorsementIndex")
        .def(py::init<std::size_t, std::size_t, std::vector<std::uint64_t>, double, std::string, std::string>(),
             py::arg("destinations"), py::arg("activities"), py::arg("counts"), py::arg("alpha") = 1.0,
             py::arg("built_at") = "", py::arg("source_digest") = "")
        .def_property_readonly("num_destinations", &EndorsementIndex::num_destinations)
        .def_property_readonly("num_activities", &EndorsementIndex::num_activities)
        .def_property_readonly("alpha", &EndorsementIndex::alpha)
        .def_property_readonly("grand_total", &EndorsementIndex::grand_total)
        .def("count", &EndorsementIndex::count)
        .def("destination_total", &EndorsementIndex::destination_total)
        .def("conditional", &EndorsementIndex::conditional)
        .def("prior", &EndorsementIndex::prior)
        .def(
            "rank",
            [](const EndorsementIndex& idx, const std::vector<ActivityId>& activities, const std::string& ranker,
               std::uint64_t seed) {
                auto list = rank(idx, Query::make(activities, idx.num_activities()), parse_ranker(ranker), seed);
                return ranked_rows(list, nullptr);
            },
            py::arg("activities"), py::arg("ranker") = "naive_bayes", py::arg("seed") = 0);

    py::class_<IndexSnapshot>(m, "Snapshot")
        .def_property_readonly("activities", [](const IndexSnapshot& s) { return s.vocabulary.names(); })
        .def_property_readonly("destinations",
                               [](const IndexSnapshot& s) {
                                   std::vector<std::string> keys;
                                   for (const auto& d : s.destinations.rows()) keys.push_back(d.key);
                                   return keys;
                               })
        .def_property_readonly("index", [](const IndexSnapshot& s) { return s.index; })
        .def_property_readonly("source_digest", [](const IndexSnapshot& s) { return s.index.source_digest(); })
        .def(
            "rank",
            [](const IndexSnapshot& s, const std::vector<std::string>& activities, const std::string& ranker,
               std::uint64_t seed) {
                auto q = Query::make(resolve(s, activities), s.vocabulary.size());
                return ranked_rows(rank(s.index, q, parse_ranker(ranker), seed), &s.destinations);
            },
            py::arg("activities"), py::arg("ranker") = "naive_bayes", py::arg("seed") = 0)
        .def("to_json", [](const IndexSnapshot& s) { return write_snapshot(s); })
        .def("save", [](const IndexSnapshot& s, const std::string& path) {
            std::ofstream out(path);
            if (!out) throw IngestError("cannot write " + path);
            write_snapshot(s, out);
        });

    m.def("build_snapshot", &snapshot_from_files, py::arg("vocab"), py::arg("destinations"), py::arg("reviews"),
          py::arg("alpha") = 1.0, py::arg("lenient") = false);
    m.def("load_snapshot", &read_snapshot_file, py::arg("path"));

    m.def(
        "g_test",
        [](std::uint64_t ua, std::uint64_t ca, std::uint64_t ub, std::uint64_t cb) {
            auto r = stats::g_test_2x2(ua, ca, ub, cb);
            py::dict d;
            d["g_statistic"] = r.g_statistic;
            d["degrees_of_freedom"] = r.degrees_of_freedom;
            d["p_value"] = r.p_value;
            d["confidence"] = r.confidence;
            d["significant_at_90"] = r.significant_at_90;
            return d;
        },
        py::arg("users_a"), py::arg("clickers_a"), py::arg("users_b"), py::arg("clickers_b"));
    m.def("proportion_halfwidth", &stats::proportion_halfwidth, py::arg("rate"), py::arg("n"),
          py::arg("level") = 0.90);
    m.def("normal_critical_value", &stats::normal_critical_value, py::arg("level"));

    m.def(
        "assign_variant",
        [](const std::string& user, const std::string& experiment) {
            return assign_variant(user, experiment_from_json(json::parse(experiment)));
        },
        py::arg("user_id"), py::arg("experiment_json"));
    m.def(
        "evaluate_log",
        [](const std::string& csv, const std::string& experiment, double level, bool sessions) {
            std::istringstream in(csv);
            return report_json(evaluate(read_click_log(in), experiment_from_json(json::parse(experiment)), level,
                                        sessions ? ConversionUnit::sessions : ConversionUnit::users));
        },
        py::arg("log_csv"), py::arg("experiment_json"), py::arg("level") = 0.90, py::arg("sessions") = false);
    m.def(
        "simulate",
        [](const std::string& world, const std::string& experiment, std::size_t users, std::uint64_t seed) {
            auto doc = sim::simulation_from_json(json::parse(world), seed);
            auto result =
                sim::run_ab_simulation(doc.world, experiment_from_json(json::parse(experiment)), users, seed, doc.settings);
            std::ostringstream log;
            write_click_log(log, result.log);
            return py::make_tuple(log.str(), report_json(result.report), render_table(result.report));
        },
        py::arg("world_json"), py::arg("experiment_json"), py::arg("users"), py::arg("seed") = 0);
}

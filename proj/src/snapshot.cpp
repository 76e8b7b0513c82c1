#include "erank/snapshot.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "erank/error.hpp"

namespace erank {

namespace {

constexpr const char* kFormat = "endorsement-index/1";

}  // namespace

std::string write_snapshot(const IndexSnapshot& s) {
    using nlohmann::json;
    json doc;
    doc["format"] = kFormat;
    doc["alpha"] = s.index.alpha();
    doc["built_at"] = s.index.built_at();
    doc["source_digest"] = s.index.source_digest();
    doc["vocabulary"] = s.vocabulary.names();
    json dests = json::array();
    for (const auto& d : s.destinations.rows())
        dests.push_back({{"key", d.key}, {"name", d.name}, {"country_code", d.country_code}});
    doc["destinations"] = std::move(dests);
    json counts = json::array();
    for (const auto& c : s.index.sparse_counts()) counts.push_back({c.destination, c.activity, c.count});
    doc["counts"] = std::move(counts);
    return doc.dump(1) + "\n";
}

void write_snapshot(const IndexSnapshot& snapshot, std::ostream& out) { out << write_snapshot(snapshot); }

IndexSnapshot read_snapshot(std::istream& in) {
    using nlohmann::json;
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw IngestError(std::string("snapshot is not valid JSON: ") + e.what());
    }
    try {
        if (doc.at("format").get<std::string>() != kFormat) throw IngestError("unsupported snapshot format");
        ActivityVocabulary vocab(doc.at("vocabulary").get<std::vector<std::string>>());
        std::vector<Destination> rows;
        for (const auto& d : doc.at("destinations"))
            rows.push_back({0, d.at("key").get<std::string>(), d.at("name").get<std::string>(),
                            d.at("country_code").get<std::string>()});
        DestinationTable dests(std::move(rows));
        const auto D = dests.size(), V = vocab.size();
        std::vector<std::uint64_t> counts(D * V, 0);
        for (const auto& t : doc.at("counts")) {
            auto d = t.at(0).get<std::size_t>(), e = t.at(1).get<std::size_t>();
            auto c = t.at(2).get<std::uint64_t>();
            if (d >= D || e >= V) throw IngestError("count triple out of range");
            if (c == 0 || counts[d * V + e] != 0) throw IngestError("zero or repeated count triple");
            counts[d * V + e] = c;
        }
        EndorsementIndex index(D, V, std::move(counts), doc.at("alpha").get<double>(),
                               doc.at("built_at").get<std::string>(), doc.at("source_digest").get<std::string>());
        return IndexSnapshot{std::move(vocab), std::move(dests), std::move(index)};
    } catch (const json::exception& e) {
        throw IngestError(std::string("malformed snapshot: ") + e.what());
    } catch (const ValidationError& e) {
        throw IngestError(std::string("inconsistent snapshot: ") + e.what());
    }
}

IndexSnapshot read_snapshot_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open snapshot " + path);
    return read_snapshot(in);
}

}  // namespace erank

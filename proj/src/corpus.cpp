#include "erank/corpus.hpp"

#include <algorithm>

#include "erank/error.hpp"
#include "erank/text.hpp"

namespace erank {

ActivityVocabulary::ActivityVocabulary(std::vector<std::string> names) {
    if (names.empty()) throw ValidationError("vocabulary is empty");
    names_.reserve(names.size());
    for (auto& raw : names) {
        std::string n(text::trim(raw));
        if (n.empty()) throw ValidationError("blank activity name");
        auto id = static_cast<ActivityId>(names_.size());
        if (!by_name_.emplace(n, id).second)
            throw ValidationError("duplicate activity name '" + n + "'");
        by_folded_.emplace(text::to_lower(n), id);
        names_.push_back(std::move(n));
    }
}

std::optional<ActivityId> ActivityVocabulary::find(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
}

std::optional<ActivityId> ActivityVocabulary::find_folded(std::string_view name) const {
    auto it = by_folded_.find(text::to_lower(text::trim(name)));
    if (it == by_folded_.end()) return std::nullopt;
    return it->second;
}

DestinationTable::DestinationTable(std::vector<Destination> rows) : rows_(std::move(rows)) {
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        auto& d = rows_[i];
        d.id = static_cast<DestinationId>(i);
        if (d.key.empty()) throw ValidationError("destination with empty key");
        if (!by_key_.emplace(d.key, d.id).second)
            throw ValidationError("duplicate destination key '" + d.key + "'");
    }
}

std::optional<DestinationId> DestinationTable::find(std::string_view key) const {
    auto it = by_key_.find(std::string(key));
    if (it == by_key_.end()) return std::nullopt;
    return it->second;
}

Review make_review(std::string user_id, DestinationId destination, std::vector<ActivityId> endorsed) {
    std::sort(endorsed.begin(), endorsed.end());
    endorsed.erase(std::unique(endorsed.begin(), endorsed.end()), endorsed.end());
    if (endorsed.empty()) throw ValidationError("review has no endorsements");
    return Review{std::move(user_id), destination, std::move(endorsed)};
}

ActivityVocabulary load_vocabulary(std::istream& in) {
    std::vector<std::string> names;
    std::unordered_map<std::string, std::size_t> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto name = text::trim(line);
        if (name.empty()) continue;
        auto [it, fresh] = seen.emplace(std::string(name), lineno);
        if (!fresh)
            throw IngestError("duplicate activity '" + it->first + "' (first seen on line " +
                                  std::to_string(it->second) + ")",
                              lineno);
        names.emplace_back(name);
    }
    if (names.empty()) throw IngestError("vocabulary file has no activities");
    return ActivityVocabulary(std::move(names));
}

namespace {

bool is_header(const std::vector<std::string>& fields, std::string_view first) {
    return !fields.empty() && text::trim(fields[0]) == first;
}

}  // namespace

DestinationTable load_destinations(std::istream& in) {
    std::vector<Destination> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        auto f = text::split_csv(line);
        if (lineno == 1 && is_header(f, "destination_id")) continue;
        if (f.size() < 2 || f.size() > 3)
            throw IngestError("expected destination_id,name,country_code", lineno);
        Destination d;
        d.key = std::string(text::trim(f[0]));
        d.name = std::string(text::trim(f[1]));
        if (f.size() == 3) d.country_code = std::string(text::trim(f[2]));
        if (d.key.empty()) throw IngestError("empty destination_id", lineno);
        if (!d.country_code.empty() && d.country_code.size() != 2)
            throw IngestError("country_code must have 2 letters", lineno);
        rows.push_back(std::move(d));
    }
    if (rows.empty()) throw IngestError("destinations file is empty");
    try {
        return DestinationTable(std::move(rows));
    } catch (const ValidationError& e) {
        throw IngestError(e.what());
    }
}

ReviewLoadResult load_reviews(std::istream& in, const ActivityVocabulary& vocab,
                              const DestinationTable& dests, ReviewLoadOptions options) {
    ReviewLoadResult result;
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        auto f = text::split_csv(line);
        if (!header_seen) {
            header_seen = true;
            if (f.size() != 3 || text::trim(f[0]) != "user_id" || text::trim(f[1]) != "destination_id" ||
                text::trim(f[2]) != "endorsements")
                throw IngestError("expected header user_id,destination_id,endorsements", lineno);
            continue;
        }
        if (f.size() != 3) throw IngestError("expected 3 fields", lineno);
        std::string user(text::trim(f[0]));
        if (user.empty()) throw IngestError("empty user_id", lineno);
        auto dest = dests.find(text::trim(f[1]));
        if (!dest) throw IngestError("unknown destination '" + std::string(text::trim(f[1])) + "'", lineno);

        std::vector<ActivityId> endorsed;
        for (const auto& name : text::split_list(f[2], '|')) {
            if (auto id = vocab.find(name)) {
                endorsed.push_back(*id);
            } else if (options.lenient) {
                ++result.skipped_endorsements;
            } else {
                throw IngestError("unknown activity '" + name + "'", lineno);
            }
        }
        if (endorsed.empty()) {
            if (!options.lenient) throw IngestError("row has no endorsements", lineno);
            ++result.rejected_rows;
            continue;
        }
        result.reviews.push_back(make_review(std::move(user), *dest, std::move(endorsed)));
    }
    if (!header_seen) throw IngestError("reviews file is empty");
    return result;
}

}  // namespace erank

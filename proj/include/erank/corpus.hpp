#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace erank {

using ActivityId = std::uint32_t;
using DestinationId = std::uint32_t;

/// Ordered list of activity names; an activity's id is its position.
class ActivityVocabulary {
public:
    ActivityVocabulary() = default;
    /// Throws ValidationError on empty, blank, or duplicate names.
    explicit ActivityVocabulary(std::vector<std::string> names);

    std::size_t size() const noexcept { return names_.size(); }
    const std::string& name(ActivityId id) const { return names_.at(id); }
    const std::vector<std::string>& names() const noexcept { return names_; }

    std::optional<ActivityId> find(std::string_view name) const;
    /// Case-insensitive lookup after trimming.
    std::optional<ActivityId> find_folded(std::string_view name) const;

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, ActivityId> by_name_;
    std::unordered_map<std::string, ActivityId> by_folded_;
};

struct Destination {
    DestinationId id = 0;
    std::string key;           // stable name key referenced by review files
    std::string name;          // display name
    std::string country_code;  // informational, may be empty

    bool operator==(const Destination&) const = default;
};

class DestinationTable {
public:
    DestinationTable() = default;
    /// Ids are reassigned to match list order. Keys must be unique and non-empty.
    explicit DestinationTable(std::vector<Destination> rows);

    std::size_t size() const noexcept { return rows_.size(); }
    const Destination& at(DestinationId id) const { return rows_.at(id); }
    const std::vector<Destination>& rows() const noexcept { return rows_; }
    std::optional<DestinationId> find(std::string_view key) const;

private:
    std::vector<Destination> rows_;
    std::unordered_map<std::string, DestinationId> by_key_;
};

/// One visitor's endorsement set for one destination. Membership is a positive
/// endorsement; absence carries no information.
struct Review {
    std::string user_id;
    DestinationId destination = 0;
    std::vector<ActivityId> endorsed;  // sorted, unique, non-empty

    bool operator==(const Review&) const = default;
};

/// Sorts and deduplicates `endorsed`. Throws ValidationError when it ends up empty.
Review make_review(std::string user_id, DestinationId destination, std::vector<ActivityId> endorsed);

ActivityVocabulary load_vocabulary(std::istream& in);
DestinationTable load_destinations(std::istream& in);

struct ReviewLoadOptions {
    /// Unknown activity names are skipped and counted instead of failing the load.
    bool lenient = false;
};

struct ReviewLoadResult {
    std::vector<Review> reviews;
    std::size_t skipped_endorsements = 0;
    std::size_t rejected_rows = 0;
};

ReviewLoadResult load_reviews(std::istream& in, const ActivityVocabulary& vocab,
                              const DestinationTable& dests, ReviewLoadOptions options = {});

}  // namespace erank

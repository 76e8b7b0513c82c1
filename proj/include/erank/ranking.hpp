#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "erank/corpus.hpp"
#include "erank/index.hpp"

namespace erank {

/// Deduplicated, non-empty set of activity ids, kept ascending.
class Query {
public:
    /// Throws ValidationError if empty after deduplication or any id >= vocabulary_size.
    static Query make(std::vector<ActivityId> activities, std::size_t vocabulary_size);

    std::span<const ActivityId> activities() const noexcept { return activities_; }
    std::size_t size() const noexcept { return activities_.size(); }

    bool operator==(const Query&) const = default;

private:
    std::vector<ActivityId> activities_;
};

enum class RankerKind { random, popularity, naive_bayes };

std::string_view to_string(RankerKind kind);
/// Throws ValidationError on an unknown tag.
RankerKind parse_ranker(std::string_view tag);

struct RankedEntry {
    DestinationId destination;
    double score;

    bool operator==(const RankedEntry&) const = default;
};

struct RankedList {
    std::vector<RankedEntry> entries;
    RankerKind ranker = RankerKind::random;
    std::optional<std::uint64_t> seed;
};

/// Destinations with a positive raw count for at least one queried activity, ascending.
std::vector<DestinationId> candidates(const EndorsementIndex& index, const Query& query);

/// Seeded forward Fisher-Yates over the ascending candidate list. Scores are 0.
RankedList rank_random(const EndorsementIndex& index, const Query& query, std::uint64_t seed);

/// Sum of log P(e|d) over the query.
RankedList rank_popularity(const EndorsementIndex& index, const Query& query);

/// log P(d) + sum of log P(e|d) over the query.
RankedList rank_naive_bayes(const EndorsementIndex& index, const Query& query);

RankedList rank(const EndorsementIndex& index, const Query& query, RankerKind kind, std::uint64_t seed = 0);

/// Relative width under which two log scores are treated as tied and ordered by
/// destination id instead. Covers rounding in the log-space sums.
inline constexpr double kScoreTieTolerance = 1e-11;

}  // namespace erank

#include "erank/ranking.hpp"

#include <algorithm>
#include <cmath>

#include "erank/error.hpp"
#include "erank/random.hpp"

namespace erank {

Query Query::make(std::vector<ActivityId> activities, std::size_t vocabulary_size) {
    std::sort(activities.begin(), activities.end());
    activities.erase(std::unique(activities.begin(), activities.end()), activities.end());
    if (activities.empty()) throw ValidationError("query has no activities");
    if (activities.back() >= vocabulary_size) throw ValidationError("query activity out of range");
    Query q;
    q.activities_ = std::move(activities);
    return q;
}

std::string_view to_string(RankerKind kind) {
    switch (kind) {
        case RankerKind::random: return "random";
        case RankerKind::popularity: return "popularity";
        case RankerKind::naive_bayes: return "naive_bayes";
    }
    return "?";
}

RankerKind parse_ranker(std::string_view tag) {
    if (tag == "random") return RankerKind::random;
    if (tag == "popularity") return RankerKind::popularity;
    if (tag == "naive_bayes") return RankerKind::naive_bayes;
    throw ValidationError("unknown ranker '" + std::string(tag) + "'");
}

std::vector<DestinationId> candidates(const EndorsementIndex& index, const Query& query) {
    if (query.activities().back() >= index.num_activities()) throw ValidationError("query activity out of range");
    std::vector<DestinationId> out;
    for (auto e : query.activities()) {
        auto p = index.postings(e);
        out.insert(out.end(), p.begin(), p.end());
    }
    if (query.size() > 1) {
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
    }
    return out;
}

RankedList rank_random(const EndorsementIndex& index, const Query& query, std::uint64_t seed) {
    auto ids = candidates(index, query);
    Rng rng(seed);
    for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
        auto j = i + rng.below(ids.size() - i);
        std::swap(ids[i], ids[j]);
    }
    RankedList list{{}, RankerKind::random, seed};
    list.entries.reserve(ids.size());
    for (auto d : ids) list.entries.push_back({d, 0.0});
    return list;
}

namespace {

bool near_tie(double a, double b) {
    if (a == b) return true;
    if (!std::isfinite(a) || !std::isfinite(b)) return false;
    return std::abs(a - b) <= kScoreTieTolerance * std::max({1.0, std::abs(a), std::abs(b)});
}

// Sorts by score descending; runs of near-equal scores (relative to the first
// entry of the run) are reordered by destination id.
void order_by_score(std::vector<RankedEntry>& entries) {
    std::sort(entries.begin(), entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
        return a.score != b.score ? a.score > b.score : a.destination < b.destination;
    });
    for (std::size_t i = 0; i < entries.size();) {
        std::size_t j = i + 1;
        while (j < entries.size() && near_tie(entries[i].score, entries[j].score)) ++j;
        if (j - i > 1)
            std::sort(entries.begin() + static_cast<std::ptrdiff_t>(i), entries.begin() + static_cast<std::ptrdiff_t>(j),
                      [](const RankedEntry& a, const RankedEntry& b) { return a.destination < b.destination; });
        i = j;
    }
}

RankedList rank_scored(const EndorsementIndex& index, const Query& query, bool with_prior, RankerKind kind) {
    auto ids = candidates(index, query);
    RankedList list{{}, kind, std::nullopt};
    list.entries.reserve(ids.size());
    for (auto d : ids) {
        double s = with_prior ? index.log_prior(d) : 0.0;
        for (auto e : query.activities()) s += index.log_conditional(d, e);
        list.entries.push_back({d, s});
    }
    order_by_score(list.entries);
    return list;
}

}  // namespace

RankedList rank_popularity(const EndorsementIndex& index, const Query& query) {
    return rank_scored(index, query, false, RankerKind::popularity);
}

RankedList rank_naive_bayes(const EndorsementIndex& index, const Query& query) {
    return rank_scored(index, query, true, RankerKind::naive_bayes);
}

RankedList rank(const EndorsementIndex& index, const Query& query, RankerKind kind, std::uint64_t seed) {
    switch (kind) {
        case RankerKind::random: return rank_random(index, query, seed);
        case RankerKind::popularity: return rank_popularity(index, query);
        case RankerKind::naive_bayes: return rank_naive_bayes(index, query);
    }
    throw ValidationError("unknown ranker");
}

}  // namespace erank

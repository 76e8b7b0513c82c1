#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "erank/corpus.hpp"
#include "erank/index.hpp"
#include "erank/ranking.hpp"
#include "erank/snapshot.hpp"

namespace erank::testing {

inline constexpr ActivityId kBeach = 0, kFood = 1, kNightlife = 2;
inline constexpr DestinationId kA = 0, kB = 1;

/// V=3 {beach, food, nightlife}; D=2 {A, B}; c(A,.)=(8,2,0), c(B,.)=(3,3,4).
inline EndorsementIndex toy_index(double alpha = 0.0) {
    return EndorsementIndex(2, 3, {8, 2, 0, 3, 3, 4}, alpha, "test", "toy");
}

inline IndexSnapshot toy_snapshot(double alpha = 0.0) {
    return IndexSnapshot{ActivityVocabulary({"Beach", "Food", "Nightlife"}),
                         DestinationTable({{0, "A", "Alpha Bay", "es"}, {0, "B", "Bravo City", "th"}}),
                         toy_index(alpha)};
}

inline Query q(std::vector<ActivityId> ids, std::size_t V = 3) { return Query::make(std::move(ids), V); }

inline std::vector<DestinationId> order_of(const RankedList& list) {
    std::vector<DestinationId> out;
    for (const auto& e : list.entries) out.push_back(e.destination);
    return out;
}

}  // namespace erank::testing

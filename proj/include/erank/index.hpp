#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "erank/corpus.hpp"

namespace erank {

struct CountEntry {
    DestinationId destination;
    ActivityId activity;
    std::uint64_t count;

    bool operator==(const CountEntry&) const = default;
};

/// Immutable endorsement statistics over a D x V count matrix.
///
/// Conditionals are additively smoothed, P(e|d) = (c(d,e) + alpha) / (N_d + alpha V);
/// the prior is not, P(d) = N_d / N. Log values are materialized at construction
/// so that online scoring is a lookup-and-sum.
class EndorsementIndex {
public:
    /// `counts` is row-major, destination by activity. Throws ValidationError if
    /// the shape is wrong, alpha is negative, or the grand total is zero.
    EndorsementIndex(std::size_t destinations, std::size_t activities, std::vector<std::uint64_t> counts,
                     double alpha, std::string built_at, std::string source_digest);

    std::size_t num_destinations() const noexcept { return destinations_; }
    std::size_t num_activities() const noexcept { return activities_; }
    double alpha() const noexcept { return alpha_; }
    const std::string& built_at() const noexcept { return built_at_; }
    const std::string& source_digest() const noexcept { return source_digest_; }

    std::uint64_t count(DestinationId d, ActivityId e) const { return counts_[offset(d, e)]; }
    std::uint64_t destination_total(DestinationId d) const { return dest_totals_.at(d); }
    std::uint64_t grand_total() const noexcept { return grand_total_; }

    double conditional(DestinationId d, ActivityId e) const;
    double log_conditional(DestinationId d, ActivityId e) const { return log_conditionals_[offset(d, e)]; }
    double prior(DestinationId d) const;
    double log_prior(DestinationId d) const { return log_priors_.at(d); }

    /// Destinations with a positive raw count for `e`, ascending.
    std::span<const DestinationId> postings(ActivityId e) const { return postings_.at(e); }

    /// Nonzero cells ordered by (destination, activity).
    std::vector<CountEntry> sparse_counts() const;

    bool same_statistics(const EndorsementIndex& other) const;

private:
    std::size_t offset(DestinationId d, ActivityId e) const;

    std::size_t destinations_;
    std::size_t activities_;
    std::vector<std::uint64_t> counts_;
    std::vector<std::uint64_t> dest_totals_;
    std::uint64_t grand_total_ = 0;
    double alpha_;
    std::string built_at_;
    std::string source_digest_;
    std::vector<double> log_conditionals_;
    std::vector<double> log_priors_;
    std::vector<std::vector<DestinationId>> postings_;
};

/// Order-insensitive checksum over the canonical form of each review.
std::string corpus_digest(std::span<const Review> reviews);

/// ISO-8601 UTC timestamp for `now`.
std::string utc_timestamp_now();

/// c(d,e) counts reviews of d whose endorsed set contains e. Repeat reviews by the
/// same visitor count independently. Throws ValidationError on an empty review
/// list or out-of-range ids.
EndorsementIndex build_index(std::span<const Review> reviews, std::size_t destinations, std::size_t activities,
                             double alpha, std::string built_at = utc_timestamp_now());

struct ProfileEntry {
    ActivityId activity;
    double share;  // c(d,e) / N_d
};

/// Top-k activities of a destination by raw count, ties by activity id.
/// Zero-count activities are never listed.
std::vector<ProfileEntry> endorsement_profile(const EndorsementIndex& index, DestinationId d, std::size_t top_k);

}  // namespace erank

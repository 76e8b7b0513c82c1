#include "erank/index.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <limits>
#include <numeric>

#include "erank/error.hpp"
#include "erank/text.hpp"

namespace erank {

EndorsementIndex::EndorsementIndex(std::size_t destinations, std::size_t activities,
                                   std::vector<std::uint64_t> counts, double alpha, std::string built_at,
                                   std::string source_digest)
    : destinations_(destinations),
      activities_(activities),
      counts_(std::move(counts)),
      alpha_(alpha),
      built_at_(std::move(built_at)),
      source_digest_(std::move(source_digest)) {
    if (activities_ == 0) throw ValidationError("index needs at least one activity");
    if (counts_.size() != destinations_ * activities_) throw ValidationError("count matrix has the wrong shape");
    if (!(alpha_ >= 0.0) || !std::isfinite(alpha_)) throw ValidationError("alpha must be finite and >= 0");

    dest_totals_.assign(destinations_, 0);
    postings_.assign(activities_, {});
    for (std::size_t d = 0; d < destinations_; ++d) {
        for (std::size_t e = 0; e < activities_; ++e) {
            auto c = counts_[d * activities_ + e];
            dest_totals_[d] += c;
            if (c > 0) postings_[e].push_back(static_cast<DestinationId>(d));
        }
        grand_total_ += dest_totals_[d];
    }
    if (grand_total_ == 0) throw ValidationError("index has no endorsements");

    log_conditionals_.resize(counts_.size());
    for (std::size_t d = 0; d < destinations_; ++d)
        for (std::size_t e = 0; e < activities_; ++e)
            log_conditionals_[d * activities_ + e] =
                std::log(conditional(static_cast<DestinationId>(d), static_cast<ActivityId>(e)));

    log_priors_.resize(destinations_);
    for (std::size_t d = 0; d < destinations_; ++d) log_priors_[d] = std::log(prior(static_cast<DestinationId>(d)));
}

std::size_t EndorsementIndex::offset(DestinationId d, ActivityId e) const {
    if (d >= destinations_ || e >= activities_) throw ValidationError("index lookup out of range");
    return static_cast<std::size_t>(d) * activities_ + e;
}

double EndorsementIndex::conditional(DestinationId d, ActivityId e) const {
    auto c = static_cast<double>(count(d, e));
    auto n = static_cast<double>(dest_totals_[d]);
    double denom = n + alpha_ * static_cast<double>(activities_);
    if (denom == 0.0) return 0.0;
    return (c + alpha_) / denom;
}

double EndorsementIndex::prior(DestinationId d) const {
    return static_cast<double>(dest_totals_.at(d)) / static_cast<double>(grand_total_);
}

std::vector<CountEntry> EndorsementIndex::sparse_counts() const {
    std::vector<CountEntry> out;
    for (std::size_t d = 0; d < destinations_; ++d)
        for (std::size_t e = 0; e < activities_; ++e)
            if (auto c = counts_[d * activities_ + e])
                out.push_back({static_cast<DestinationId>(d), static_cast<ActivityId>(e), c});
    return out;
}

bool EndorsementIndex::same_statistics(const EndorsementIndex& other) const {
    return destinations_ == other.destinations_ && activities_ == other.activities_ && counts_ == other.counts_ &&
           alpha_ == other.alpha_ && source_digest_ == other.source_digest_;
}

std::string corpus_digest(std::span<const Review> reviews) {
    std::vector<std::uint64_t> hashes;
    hashes.reserve(reviews.size());
    for (const auto& r : reviews) {
        std::string canon = r.user_id;
        canon.push_back('\x1f');
        canon += std::to_string(r.destination);
        canon.push_back('\x1f');
        for (auto e : r.endorsed) {
            canon += std::to_string(e);
            canon.push_back(',');
        }
        hashes.push_back(text::fnv1a64(canon));
    }
    std::sort(hashes.begin(), hashes.end());
    std::string buf;
    buf.reserve(hashes.size() * 8);
    for (auto h : hashes)
        for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((h >> (8 * i)) & 0xff));
    return text::hex64(text::fnv1a64(buf));
}

std::string utc_timestamp_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

EndorsementIndex build_index(std::span<const Review> reviews, std::size_t destinations, std::size_t activities,
                             double alpha, std::string built_at) {
    if (reviews.empty()) throw ValidationError("cannot build an index from zero reviews");
    std::vector<std::uint64_t> counts(destinations * activities, 0);
    for (const auto& r : reviews) {
        if (r.destination >= destinations) throw ValidationError("review references unknown destination");
        if (r.endorsed.empty()) throw ValidationError("review has no endorsements");
        for (auto e : r.endorsed) {
            if (e >= activities) throw ValidationError("review references unknown activity");
            ++counts[static_cast<std::size_t>(r.destination) * activities + e];
        }
    }
    return EndorsementIndex(destinations, activities, std::move(counts), alpha, std::move(built_at),
                            corpus_digest(reviews));
}

std::vector<ProfileEntry> endorsement_profile(const EndorsementIndex& index, DestinationId d, std::size_t top_k) {
    if (top_k == 0) throw ValidationError("top_k must be >= 1");
    auto total = index.destination_total(d);
    if (total == 0) return {};
    std::vector<ActivityId> ids;
    for (ActivityId e = 0; e < index.num_activities(); ++e)
        if (index.count(d, e) > 0) ids.push_back(e);
    auto by_count = [&](ActivityId a, ActivityId b) {
        auto ca = index.count(d, a), cb = index.count(d, b);
        return ca != cb ? ca > cb : a < b;
    };
    auto k = std::min(top_k, ids.size());
    std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(), by_count);
    std::vector<ProfileEntry> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i)
        out.push_back({ids[i], static_cast<double>(index.count(d, ids[i])) / static_cast<double>(total)});
    return out;
}

}  // namespace erank

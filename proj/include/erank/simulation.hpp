#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "erank/corpus.hpp"
#include "erank/experiment.hpp"
#include "erank/index.hpp"
#include "erank/ranking.hpp"

namespace erank::sim {

/// Latent ground truth for a synthetic destination catalogue.
struct WorldConfig {
    std::size_t destinations = 0;
    std::size_t activities = 0;
    /// destinations x activities, each in [0, 1]: probability that a visitor
    /// endorses activity e at destination d.
    std::vector<std::vector<double>> affinity;
    std::size_t reviews_per_destination = 100;
    /// Optional per-destination multiplier on the review volume (default 1).
    std::vector<double> popularity;
    /// Optional per-destination click appeal in [0, 1] (default 1).
    std::vector<double> appeal;
    std::uint64_t seed = 0;

    void validate() const;
    double popularity_of(DestinationId d) const { return popularity.empty() ? 1.0 : popularity[d]; }
    double appeal_of(DestinationId d) const { return appeal.empty() ? 1.0 : appeal[d]; }
};

/// Parameters of the structured generator used for desk-scale A/B reproductions:
/// each destination has a few strongly endorsed signature activities over a
/// weak background, and review volume is lognormal and tracks click appeal.
struct PlantedWorldParams {
    std::size_t destinations = 150;
    std::size_t activities = 30;
    std::size_t signatures_per_destination = 2;
    double signature_low = 0.5;
    double signature_high = 0.9;
    double background = 0.04;
    std::size_t reviews_per_destination = 60;
    double popularity_sigma = 1.0;
    double appeal_floor = 0.2;
};

WorldConfig make_planted_world(const PlantedWorldParams& params, std::uint64_t seed);

/// Position-biased Bernoulli clicks: P(click at rank r) = relevance * discount(r),
/// discount(r) = 1 / log2(r + discount_offset) with ranks starting at 1.
struct ClickModel {
    std::size_t page_size = 10;
    double discount_offset = 2.0;

    void validate() const;
    double discount(std::size_t rank) const;
};

struct UserModel {
    std::size_t interests = 3;    // latent interests per user
    std::size_t max_query = 3;    // query length is uniform in 1..min(max_query, interests)

    void validate(std::size_t activities) const;
};

struct SimUser {
    std::vector<std::pair<ActivityId, double>> interests;  // weights sum to 1
};

SimUser make_user(const WorldConfig& world, const UserModel& model, std::uint64_t seed);

/// Interest-weighted affinity overlap scaled by the destination's appeal, in [0, 1].
double relevance(const SimUser& user, const WorldConfig& world, DestinationId d);

/// reviews_per_destination x popularity synthetic visitors per destination; each
/// endorses e independently with probability affinity[d][e], redrawing empty sets.
std::vector<Review> generate_corpus(const WorldConfig& world);

/// One session: the query is sampled from the user's interests, the ranked list
/// is truncated to the page size and each position is clicked independently.
SessionRecord simulate_user_session(const SimUser& user, const EndorsementIndex& index, const WorldConfig& world,
                                    RankerKind ranker, const ClickModel& clicks, const UserModel& users,
                                    std::uint64_t seed);

/// Expected number-of-units-converting rate for a fixed query and ranked page:
/// 1 - prod(1 - relevance * discount).
double expected_conversion(const SimUser& user, const WorldConfig& world, const ClickModel& clicks,
                           const RankedList& ranked);

struct SimulationSettings {
    ClickModel clicks;
    UserModel users;
    double alpha = 1.0;
};

struct SimulationResult {
    std::vector<SessionRecord> log;
    ExperimentReport report;
};

/// n_users synthetic users, bucketed by assign_variant, one session each. Every
/// user's randomness derives from (seed, ordinal) so the log is order-independent.
SimulationResult run_ab_simulation(const WorldConfig& world, const ExperimentConfig& config, std::size_t n_users,
                                   std::uint64_t seed, const SimulationSettings& settings = {});

/// Same, reusing a prebuilt index for `world`.
SimulationResult run_ab_simulation(const WorldConfig& world, const EndorsementIndex& index,
                                   const ExperimentConfig& config, std::size_t n_users, std::uint64_t seed,
                                   const SimulationSettings& settings = {});

/// Simulation document: {"world": {...} | "planted": {...}, "click_model": {...},
/// "users": {...}, "alpha": 1.0}. The world's seed defaults to `seed`.
struct SimulationDocument {
    WorldConfig world;
    SimulationSettings settings;
};

SimulationDocument simulation_from_json(const nlohmann::json& doc, std::uint64_t default_seed = 0);
nlohmann::json world_to_json(const WorldConfig& world);

}  // namespace erank::sim

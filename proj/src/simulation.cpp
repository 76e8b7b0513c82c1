#include "erank/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "erank/error.hpp"
#include "erank/random.hpp"
#include "erank/text.hpp"

namespace erank::sim {

void WorldConfig::validate() const {
    if (destinations == 0 || activities == 0) throw ValidationError("world needs destinations and activities");
    if (affinity.size() != destinations) throw ValidationError("affinity needs one row per destination");
    for (const auto& row : affinity) {
        if (row.size() != activities) throw ValidationError("affinity row has the wrong length");
        bool any = false;
        for (double a : row) {
            if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("affinity must lie in [0, 1]");
            any = any || a > 0.0;
        }
        if (!any) throw ValidationError("destination has no activity with positive affinity");
    }
    if (reviews_per_destination == 0) throw ValidationError("reviews_per_destination must be >= 1");
    if (!popularity.empty()) {
        if (popularity.size() != destinations) throw ValidationError("popularity needs one entry per destination");
        for (double p : popularity)
            if (!(p > 0.0) || !std::isfinite(p)) throw ValidationError("popularity must be positive");
    }
    if (!appeal.empty()) {
        if (appeal.size() != destinations) throw ValidationError("appeal needs one entry per destination");
        for (double a : appeal)
            if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("appeal must lie in [0, 1]");
    }
}

WorldConfig make_planted_world(const PlantedWorldParams& p, std::uint64_t seed) {
    if (p.signatures_per_destination == 0 || p.signatures_per_destination > p.activities)
        throw ValidationError("signatures_per_destination must be in 1..activities");
    WorldConfig w;
    w.destinations = p.destinations;
    w.activities = p.activities;
    w.reviews_per_destination = p.reviews_per_destination;
    w.seed = seed;
    Rng rng(derive_seed(seed, 0x776f726c64ULL));

    std::vector<ActivityId> ids(p.activities);
    w.affinity.assign(p.destinations, std::vector<double>(p.activities, p.background));
    for (auto& row : w.affinity) {
        std::iota(ids.begin(), ids.end(), 0);
        for (std::size_t i = 0; i < p.signatures_per_destination; ++i) {
            auto j = i + rng.below(ids.size() - i);
            std::swap(ids[i], ids[j]);
            row[ids[i]] = p.signature_low + (p.signature_high - p.signature_low) * rng.uniform();
        }
    }

    w.popularity.resize(p.destinations);
    for (auto& pop : w.popularity) {
        // Box-Muller; 1 - uniform() lies in (0, 1].
        double z = std::sqrt(-2.0 * std::log(1.0 - rng.uniform())) * std::cos(2.0 * M_PI * rng.uniform());
        pop = std::exp(p.popularity_sigma * z);
    }
    std::vector<std::size_t> order(p.destinations);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return w.popularity[a] < w.popularity[b]; });
    w.appeal.resize(p.destinations);
    for (std::size_t r = 0; r < order.size(); ++r) {
        double frac = order.size() > 1 ? static_cast<double>(r) / static_cast<double>(order.size() - 1) : 1.0;
        w.appeal[order[r]] = p.appeal_floor + (1.0 - p.appeal_floor) * frac;
    }
    w.validate();
    return w;
}

void ClickModel::validate() const {
    if (page_size == 0) throw ValidationError("page_size must be >= 1");
    if (!(discount_offset >= 1.0)) throw ValidationError("discount_offset must be >= 1");
}

double ClickModel::discount(std::size_t rank) const {
    if (rank == 0) throw ValidationError("ranks start at 1");
    return 1.0 / std::log2(static_cast<double>(rank) + discount_offset);
}

void UserModel::validate(std::size_t activities) const {
    if (interests == 0 || interests > activities) throw ValidationError("user interests must be in 1..activities");
    if (max_query == 0) throw ValidationError("max_query must be >= 1");
}

SimUser make_user(const WorldConfig& world, const UserModel& model, std::uint64_t seed) {
    model.validate(world.activities);
    Rng rng(seed);
    std::vector<ActivityId> ids(world.activities);
    std::iota(ids.begin(), ids.end(), 0);
    SimUser user;
    double total = 0.0;
    for (std::size_t i = 0; i < model.interests; ++i) {
        auto j = i + rng.below(ids.size() - i);
        std::swap(ids[i], ids[j]);
        double w = -std::log(1.0 - rng.uniform()) + 1e-12;
        user.interests.emplace_back(ids[i], w);
        total += w;
    }
    for (auto& [e, w] : user.interests) w /= total;
    return user;
}

double relevance(const SimUser& user, const WorldConfig& world, DestinationId d) {
    double overlap = 0.0;
    for (const auto& [e, w] : user.interests) overlap += w * world.affinity[d][e];
    return std::clamp(world.appeal_of(d) * overlap, 0.0, 1.0);
}

std::vector<Review> generate_corpus(const WorldConfig& world) {
    world.validate();
    std::vector<Review> reviews;
    for (DestinationId d = 0; d < world.destinations; ++d) {
        Rng rng(derive_seed(world.seed, d));
        auto n = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(static_cast<double>(world.reviews_per_destination) *
                                                     world.popularity_of(d))));
        const auto& row = world.affinity[d];
        for (std::size_t k = 0; k < n; ++k) {
            std::vector<ActivityId> endorsed;
            while (endorsed.empty())
                for (ActivityId e = 0; e < world.activities; ++e)
                    if (rng.bernoulli(row[e])) endorsed.push_back(e);
            reviews.push_back(make_review("visitor-" + std::to_string(d) + "-" + std::to_string(k), d,
                                          std::move(endorsed)));
        }
    }
    return reviews;
}

namespace {

std::vector<ActivityId> sample_query(const SimUser& user, const UserModel& model, Rng& rng) {
    auto pool = user.interests;
    auto len = 1 + rng.below(std::min(model.max_query, pool.size()));
    std::vector<ActivityId> out;
    for (std::size_t k = 0; k < len; ++k) {
        double total = 0.0;
        for (const auto& [e, w] : pool) total += w;
        double u = rng.uniform() * total;
        std::size_t pick = pool.size() - 1;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            u -= pool[i].second;
            if (u < 0.0) {
                pick = i;
                break;
            }
        }
        out.push_back(pool[pick].first);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return out;
}

}  // namespace

SessionRecord simulate_user_session(const SimUser& user, const EndorsementIndex& index, const WorldConfig& world,
                                    RankerKind ranker, const ClickModel& clicks, const UserModel& users,
                                    std::uint64_t seed) {
    if (user.interests.empty()) throw ValidationError("user has no interests");
    clicks.validate();
    Rng rng(seed);
    auto query = Query::make(sample_query(user, users, rng), index.num_activities());
    auto ranked = rank(index, query, ranker, rng.next());

    SessionRecord s;
    s.query.assign(query.activities().begin(), query.activities().end());
    auto page = std::min(clicks.page_size, ranked.entries.size());
    for (std::size_t i = 0; i < page; ++i) {
        auto d = ranked.entries[i].destination;
        s.shown.push_back(d);
        if (rng.bernoulli(relevance(user, world, d) * clicks.discount(i + 1))) s.clicked.push_back(d);
    }
    return s;
}

double expected_conversion(const SimUser& user, const WorldConfig& world, const ClickModel& clicks,
                           const RankedList& ranked) {
    double none = 1.0;
    auto page = std::min(clicks.page_size, ranked.entries.size());
    for (std::size_t i = 0; i < page; ++i)
        none *= 1.0 - relevance(user, world, ranked.entries[i].destination) * clicks.discount(i + 1);
    return 1.0 - none;
}

SimulationResult run_ab_simulation(const WorldConfig& world, const ExperimentConfig& config, std::size_t n_users,
                                   std::uint64_t seed, const SimulationSettings& settings) {
    auto corpus = generate_corpus(world);
    auto index = build_index(corpus, world.destinations, world.activities, settings.alpha, "simulated");
    return run_ab_simulation(world, index, config, n_users, seed, settings);
}

SimulationResult run_ab_simulation(const WorldConfig& world, const EndorsementIndex& index,
                                   const ExperimentConfig& config, std::size_t n_users, std::uint64_t seed,
                                   const SimulationSettings& settings) {
    config.validate();
    for (const auto& v : config.variants)
        if (!v.ranker && v.weight > 0.0)
            throw ValidationError("variant '" + v.name + "' has no ranker and cannot be simulated");
    settings.clicks.validate();
    settings.users.validate(world.activities);

    SimulationResult result;
    result.log.reserve(n_users);
    const std::string prefix = "sim-" + text::hex64(seed) + "-";
    for (std::size_t i = 0; i < n_users; ++i) {
        std::string user_id = prefix + std::to_string(i);
        const auto& variant = config.variants[assign_variant_index(user_id, config)];
        auto user = make_user(world, settings.users, derive_seed(seed, 2 * i));
        auto session = simulate_user_session(user, index, world, *variant.ranker, settings.clicks, settings.users,
                                             derive_seed(seed, 2 * i + 1));
        session.timestamp = static_cast<std::int64_t>(i);
        session.user_id = std::move(user_id);
        session.variant = variant.name;
        result.log.push_back(std::move(session));
    }
    result.report = evaluate(result.log, config);
    return result;
}

SimulationDocument simulation_from_json(const nlohmann::json& doc, std::uint64_t default_seed) {
    SimulationDocument out;
    try {
        if (doc.contains("planted")) {
            const auto& j = doc.at("planted");
            PlantedWorldParams p;
            p.destinations = j.value("destinations", p.destinations);
            p.activities = j.value("activities", p.activities);
            p.signatures_per_destination = j.value("signatures_per_destination", p.signatures_per_destination);
            p.signature_low = j.value("signature_low", p.signature_low);
            p.signature_high = j.value("signature_high", p.signature_high);
            p.background = j.value("background", p.background);
            p.reviews_per_destination = j.value("reviews_per_destination", p.reviews_per_destination);
            p.popularity_sigma = j.value("popularity_sigma", p.popularity_sigma);
            p.appeal_floor = j.value("appeal_floor", p.appeal_floor);
            out.world = make_planted_world(p, j.value("seed", default_seed));
        } else {
            const auto& j = doc.at("world");
            auto& w = out.world;
            w.affinity = j.at("affinity").get<std::vector<std::vector<double>>>();
            w.destinations = j.value("destinations", w.affinity.size());
            w.activities = j.value("activities", w.affinity.empty() ? std::size_t{0} : w.affinity.front().size());
            w.reviews_per_destination = j.value("reviews_per_destination", w.reviews_per_destination);
            w.popularity = j.value("popularity", std::vector<double>{});
            w.appeal = j.value("appeal", std::vector<double>{});
            w.seed = j.value("seed", default_seed);
            w.validate();
        }
        if (doc.contains("click_model")) {
            const auto& j = doc.at("click_model");
            out.settings.clicks.page_size = j.value("page_size", out.settings.clicks.page_size);
            out.settings.clicks.discount_offset = j.value("discount_offset", out.settings.clicks.discount_offset);
        }
        if (doc.contains("users")) {
            const auto& j = doc.at("users");
            out.settings.users.interests = j.value("interests", out.settings.users.interests);
            out.settings.users.max_query = j.value("max_query", out.settings.users.max_query);
        }
        out.settings.alpha = doc.value("alpha", out.settings.alpha);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed simulation config: ") + e.what());
    }
    out.settings.clicks.validate();
    out.settings.users.validate(out.world.activities);
    return out;
}

nlohmann::json world_to_json(const WorldConfig& w) {
    nlohmann::json j = {{"destinations", w.destinations},
                        {"activities", w.activities},
                        {"reviews_per_destination", w.reviews_per_destination},
                        {"seed", w.seed},
                        {"affinity", w.affinity}};
    if (!w.popularity.empty()) j["popularity"] = w.popularity;
    if (!w.appeal.empty()) j["appeal"] = w.appeal;
    return j;
}

}  // namespace erank::sim

#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "erank/experiment.hpp"
#include "erank/ranking.hpp"
#include "erank/snapshot.hpp"

namespace erank::service {

inline constexpr const char* kLogEnvVar = "ENDORSEMENT_RANK_LOG";
inline constexpr const char* kUserCookie = "erank_uid";

struct ServiceConfig {
    std::string index_snapshot_path;
    std::string experiment_config_path;  // optional
    std::string listen = "127.0.0.1:8080";
    std::size_t page_size = 10;
    RankerKind default_ranker = RankerKind::naive_bayes;
    std::string log_path = "clicks.csv";
    bool strict = true;  // unknown activity names are 404 rather than ignored

    void validate() const;
};

ServiceConfig service_config_from_json(const nlohmann::json& doc);
ServiceConfig load_service_config(const std::string& path);

/// ENDORSEMENT_RANK_LOG when set, otherwise `configured`.
std::string resolve_log_path(const std::string& configured);

/// Append-only click log. A single writer serializes appends; readers parse the
/// prefix that was complete when they started.
class ClickLog {
public:
    explicit ClickLog(std::string path);

    void append(const SessionRecord& record);
    std::vector<SessionRecord> read() const;
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
    mutable std::mutex mutex_;
    std::uint64_t committed_ = 0;  // bytes of complete rows
};

struct Response {
    int status = 200;
    nlohmann::json body;
    std::optional<std::string> set_user_cookie;
};

struct SearchRequest {
    std::string activities;            // comma- or '|'-separated names or ids
    std::optional<std::string> user;   // explicit ?user=
    std::optional<std::string> cookie_user;
    std::optional<std::string> limit;
};

/// The online half of the destination finder: ranking over a preloaded index,
/// impression and click capture, experiment reporting.
class DestinationFinder {
public:
    DestinationFinder(IndexSnapshot snapshot, std::optional<ExperimentConfig> experiment, ServiceConfig config);

    static std::unique_ptr<DestinationFinder> from_config(const ServiceConfig& config);

    Response activities() const;
    Response search(const SearchRequest& request);
    Response click(std::string_view body);
    Response report(std::string_view experiment) const;

    const IndexSnapshot& snapshot() const noexcept { return snapshot_; }
    const ClickLog& log() const noexcept { return log_; }
    const ServiceConfig& config() const noexcept { return config_; }

private:
    struct Session {
        SessionRecord record;  // clicked holds every recorded click
    };

    std::int64_t next_timestamp();
    void replay_log();

    IndexSnapshot snapshot_;
    std::optional<ExperimentConfig> experiment_;
    ServiceConfig config_;
    ClickLog log_;

    std::mutex sessions_mutex_;
    std::map<std::string, Session> sessions_;
    std::int64_t last_timestamp_ = 0;
    std::atomic<std::uint64_t> anon_counter_{0};
};

/// Report over a click log: all-zero when empty, otherwise per-variant stats
/// with a G-test for each variant that has data.
ExperimentReport report_for_log(std::span<const SessionRecord> records, const ExperimentConfig& config);

/// HTTP binding of DestinationFinder.
class ApiServer {
public:
    explicit ApiServer(DestinationFinder& finder);
    ~ApiServer();
    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Binds to host:port (port 0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    bool listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Splits "host:port"; a missing host means 127.0.0.1.
std::pair<std::string, int> parse_listen(const std::string& listen);

}  // namespace erank::service

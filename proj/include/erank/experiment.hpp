#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "erank/corpus.hpp"
#include "erank/ranking.hpp"
#include "erank/stats.hpp"

namespace erank {

struct Variant {
    std::string name;
    std::optional<RankerKind> ranker;  // empty for an external arm that is reported but never served
    double weight = 1.0;
};

/// Variant 0 is the control.
struct ExperimentConfig {
    std::string name;
    std::string salt;
    std::vector<Variant> variants;

    /// Throws ValidationError unless there are >= 2 uniquely named variants with
    /// non-negative weights summing to a positive value.
    void validate() const;
    const Variant& control() const { return variants.at(0); }
    std::optional<std::size_t> find(std::string_view variant) const;
};

ExperimentConfig experiment_from_json(const nlohmann::json& doc);
nlohmann::json experiment_to_json(const ExperimentConfig& config);
ExperimentConfig load_experiment_file(const std::string& path);

inline constexpr std::uint64_t kBucketCount = 10000;

/// FNV-1a of salt + ":" + user_id, modulo kBucketCount.
std::uint64_t user_bucket(std::string_view salt, std::string_view user_id);

/// Deterministic in (salt, user_id); buckets are split into weight-proportional ranges.
std::size_t assign_variant_index(std::string_view user_id, const ExperimentConfig& config);
const std::string& assign_variant(std::string_view user_id, const ExperimentConfig& config);

/// One search session: what was shown and which of those were clicked.
struct SessionRecord {
    std::int64_t timestamp = 0;  // milliseconds since epoch; also the session key within a user
    std::string user_id;
    std::string variant;
    std::vector<ActivityId> query;
    std::vector<DestinationId> shown;
    std::vector<DestinationId> clicked;  // subset of shown

    bool operator==(const SessionRecord&) const = default;
};

inline constexpr std::string_view kClickLogHeader = "timestamp,user_id,variant,query,shown,clicked";

std::string format_click_log_row(const SessionRecord& record);
void write_click_log(std::ostream& out, std::span<const SessionRecord> records, bool header = true);

/// Parses the click-log CSV. Rows sharing (timestamp, user_id, variant) belong to
/// one session and are merged, their clicked lists unioned in first-seen order.
/// Throws IngestError on malformed rows or clicks outside the shown list.
std::vector<SessionRecord> read_click_log(std::istream& in);
std::vector<SessionRecord> read_click_log_file(const std::string& path);
std::vector<SessionRecord> merge_sessions(std::span<const SessionRecord> rows);

enum class ConversionUnit { users, sessions };

struct VariantStats {
    std::string name;
    std::uint64_t users = 0;    // units: distinct users, or sessions
    std::uint64_t clickers = 0; // units with at least one click
    std::optional<double> conversion_rate;
    std::optional<double> ci_halfwidth;
};

/// Per-variant tallies that merge associatively, so partial logs can be
/// aggregated independently and combined.
class ConversionAccumulator {
public:
    explicit ConversionAccumulator(ConversionUnit unit = ConversionUnit::users) : unit_(unit) {}

    void add(const SessionRecord& record);
    void merge(const ConversionAccumulator& other);

    /// Stats for the named variants, in the given order.
    std::vector<VariantStats> stats(std::span<const std::string> variants, double level = 0.90) const;

private:
    ConversionUnit unit_;
    // variant -> unit key -> clicked at least once
    std::map<std::string, std::map<std::string, bool>> units_;
};

std::vector<VariantStats> conversion(std::span<const SessionRecord> records, std::span<const std::string> variants,
                                     double level = 0.90, ConversionUnit unit = ConversionUnit::users);

struct Comparison {
    std::string variant;
    std::string control;
    stats::GTestResult result;
};

struct ExperimentReport {
    std::string experiment;
    double level = 0.90;
    ConversionUnit unit = ConversionUnit::users;
    std::vector<VariantStats> variants;  // control first
    std::vector<Comparison> comparisons;
};

/// Stats plus a G-test of every non-control variant with data against the control.
ExperimentReport build_report(std::string experiment, std::vector<VariantStats> variants, double level = 0.90,
                              ConversionUnit unit = ConversionUnit::users);

/// Throws ValidationError when a record names an unknown variant, the control
/// has no data, or no other variant has data.
ExperimentReport evaluate(std::span<const SessionRecord> records, const ExperimentConfig& config,
                          double level = 0.90, ConversionUnit unit = ConversionUnit::users);

/// Empty-traffic report: zero stats for every variant and no comparisons.
ExperimentReport empty_report(const ExperimentConfig& config, double level = 0.90,
                              ConversionUnit unit = ConversionUnit::users);

nlohmann::json report_to_json(const ExperimentReport& report);
std::string render_table(const ExperimentReport& report);

}  // namespace erank

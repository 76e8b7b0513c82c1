#include "erank/experiment.hpp"

#include <algorithm>
#include <array>
#include <tuple>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "erank/error.hpp"
#include "erank/text.hpp"

namespace erank {

void ExperimentConfig::validate() const {
    if (variants.size() < 2) throw ValidationError("experiment needs at least 2 variants");
    double total = 0.0;
    std::set<std::string> names;
    for (const auto& v : variants) {
        if (v.name.empty()) throw ValidationError("variant with empty name");
        if (!names.insert(v.name).second) throw ValidationError("duplicate variant '" + v.name + "'");
        if (!(v.weight >= 0.0) || !std::isfinite(v.weight)) throw ValidationError("variant weight must be >= 0");
        total += v.weight;
    }
    if (!(total > 0.0)) throw ValidationError("variant weights sum to zero");
}

std::optional<std::size_t> ExperimentConfig::find(std::string_view variant) const {
    for (std::size_t i = 0; i < variants.size(); ++i)
        if (variants[i].name == variant) return i;
    return std::nullopt;
}

ExperimentConfig experiment_from_json(const nlohmann::json& doc) {
    ExperimentConfig cfg;
    try {
        cfg.name = doc.at("name").get<std::string>();
        cfg.salt = doc.value("salt", cfg.name);
        for (const auto& v : doc.at("variants")) {
            Variant var;
            var.name = v.at("name").get<std::string>();
            auto tag = v.value("ranker", std::string("external"));
            if (tag != "external") var.ranker = parse_ranker(tag);
            var.weight = v.value("weight", 1.0);
            cfg.variants.push_back(std::move(var));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed experiment config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

nlohmann::json experiment_to_json(const ExperimentConfig& config) {
    nlohmann::json variants = nlohmann::json::array();
    for (const auto& v : config.variants)
        variants.push_back({{"name", v.name},
                            {"ranker", v.ranker ? std::string(to_string(*v.ranker)) : std::string("external")},
                            {"weight", v.weight}});
    return {{"name", config.name}, {"salt", config.salt}, {"variants", std::move(variants)}};
}

ExperimentConfig load_experiment_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open experiment config " + path);
    try {
        return experiment_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw IngestError("experiment config is not valid JSON: " + std::string(e.what()));
    }
}

std::uint64_t user_bucket(std::string_view salt, std::string_view user_id) {
    std::string key;
    key.reserve(salt.size() + 1 + user_id.size());
    key.append(salt).push_back(':');
    key.append(user_id);
    return text::fnv1a64(key) % kBucketCount;
}

std::size_t assign_variant_index(std::string_view user_id, const ExperimentConfig& config) {
    const auto bucket = user_bucket(config.salt, user_id);
    double total = 0.0;
    for (const auto& v : config.variants) total += v.weight;
    double cum = 0.0;
    for (std::size_t i = 0; i + 1 < config.variants.size(); ++i) {
        cum += config.variants[i].weight;
        auto bound = static_cast<std::uint64_t>(std::llround(static_cast<double>(kBucketCount) * cum / total));
        if (bucket < bound) return i;
    }
    // Zero-weight trailing variants must never receive traffic.
    std::size_t last = config.variants.size() - 1;
    while (last > 0 && config.variants[last].weight == 0.0) --last;
    return last;
}

const std::string& assign_variant(std::string_view user_id, const ExperimentConfig& config) {
    return config.variants[assign_variant_index(user_id, config)].name;
}

namespace {

template <typename T>
std::string join_ids(const std::vector<T>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out.push_back('|');
        out += std::to_string(ids[i]);
    }
    return out;
}

std::vector<std::uint32_t> parse_ids(std::string_view field, std::size_t lineno) {
    std::vector<std::uint32_t> out;
    for (const auto& piece : text::split_list(field, '|')) {
        std::size_t used = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(piece, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != piece.size() || v > 0xffffffffUL) throw IngestError("bad id '" + piece + "'", lineno);
        out.push_back(static_cast<std::uint32_t>(v));
    }
    return out;
}

}  // namespace

std::string format_click_log_row(const SessionRecord& r) {
    std::string row = std::to_string(r.timestamp);
    row.push_back(',');
    row += text::csv_escape(r.user_id);
    row.push_back(',');
    row += text::csv_escape(r.variant);
    row.push_back(',');
    row += join_ids(r.query);
    row.push_back(',');
    row += join_ids(r.shown);
    row.push_back(',');
    row += join_ids(r.clicked);
    return row;
}

void write_click_log(std::ostream& out, std::span<const SessionRecord> records, bool header) {
    if (header) out << kClickLogHeader << '\n';
    for (const auto& r : records) out << format_click_log_row(r) << '\n';
}

std::vector<SessionRecord> merge_sessions(std::span<const SessionRecord> rows) {
    std::vector<SessionRecord> out;
    std::map<std::tuple<std::int64_t, std::string, std::string>, std::size_t> where;
    auto add_unique = [](std::vector<DestinationId>& into, const std::vector<DestinationId>& from) {
        for (auto d : from)
            if (std::find(into.begin(), into.end(), d) == into.end()) into.push_back(d);
    };
    for (const auto& r : rows) {
        auto key = std::make_tuple(r.timestamp, r.user_id, r.variant);
        auto [it, fresh] = where.emplace(key, out.size());
        if (fresh) {
            out.push_back(r);
            out.back().clicked.clear();
            add_unique(out.back().clicked, r.clicked);
        } else {
            auto& s = out[it->second];
            add_unique(s.shown, r.shown);
            add_unique(s.clicked, r.clicked);
        }
    }
    return out;
}

std::vector<SessionRecord> read_click_log(std::istream& in) {
    std::vector<SessionRecord> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        if (text::trim(line) == kClickLogHeader) continue;
        auto f = text::split_csv(line);
        if (f.size() != 6) throw IngestError("click log row needs 6 fields", lineno);
        SessionRecord r;
        try {
            std::size_t used = 0;
            r.timestamp = std::stoll(f[0], &used);
            if (used != text::trim(f[0]).size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw IngestError("bad timestamp", lineno);
        }
        r.user_id = std::string(text::trim(f[1]));
        r.variant = std::string(text::trim(f[2]));
        if (r.user_id.empty() || r.variant.empty()) throw IngestError("empty user or variant", lineno);
        r.query = parse_ids(f[3], lineno);
        r.shown = parse_ids(f[4], lineno);
        r.clicked = parse_ids(f[5], lineno);
        for (auto c : r.clicked)
            if (std::find(r.shown.begin(), r.shown.end(), c) == r.shown.end())
                throw IngestError("clicked destination was not shown", lineno);
        rows.push_back(std::move(r));
    }
    return merge_sessions(rows);
}

std::vector<SessionRecord> read_click_log_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open click log " + path);
    return read_click_log(in);
}

void ConversionAccumulator::add(const SessionRecord& record) {
    std::string key = record.user_id;
    if (unit_ == ConversionUnit::sessions) {
        key.push_back('\x1f');
        key += std::to_string(record.timestamp);
    }
    bool& clicked = units_[record.variant][key];
    clicked = clicked || !record.clicked.empty();
}

void ConversionAccumulator::merge(const ConversionAccumulator& other) {
    if (other.unit_ != unit_) throw ValidationError("cannot merge accumulators with different units");
    for (const auto& [variant, units] : other.units_) {
        auto& mine = units_[variant];
        for (const auto& [key, clicked] : units) {
            bool& c = mine[key];
            c = c || clicked;
        }
    }
}

std::vector<VariantStats> ConversionAccumulator::stats(std::span<const std::string> variants, double level) const {
    std::vector<VariantStats> out;
    for (const auto& name : variants) {
        VariantStats s;
        s.name = name;
        if (auto it = units_.find(name); it != units_.end()) {
            s.users = it->second.size();
            s.clickers = static_cast<std::uint64_t>(
                std::count_if(it->second.begin(), it->second.end(), [](const auto& kv) { return kv.second; }));
        }
        if (s.users > 0) {
            double rate = static_cast<double>(s.clickers) / static_cast<double>(s.users);
            s.conversion_rate = rate;
            s.ci_halfwidth = stats::proportion_halfwidth(rate, s.users, level);
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<VariantStats> conversion(std::span<const SessionRecord> records, std::span<const std::string> variants,
                                     double level, ConversionUnit unit) {
    ConversionAccumulator acc(unit);
    for (const auto& r : records) acc.add(r);
    return acc.stats(variants, level);
}

ExperimentReport build_report(std::string experiment, std::vector<VariantStats> variants, double level,
                              ConversionUnit unit) {
    ExperimentReport report{std::move(experiment), level, unit, std::move(variants), {}};
    if (report.variants.empty()) return report;
    const auto& control = report.variants.front();
    if (control.users == 0) return report;
    for (std::size_t i = 1; i < report.variants.size(); ++i) {
        const auto& v = report.variants[i];
        if (v.users == 0) continue;
        report.comparisons.push_back(
            {v.name, control.name, stats::g_test_2x2(control.users, control.clickers, v.users, v.clickers)});
    }
    return report;
}

namespace {

std::vector<std::string> variant_names(const ExperimentConfig& config) {
    std::vector<std::string> names;
    for (const auto& v : config.variants) names.push_back(v.name);
    return names;
}

}  // namespace

ExperimentReport evaluate(std::span<const SessionRecord> records, const ExperimentConfig& config, double level,
                          ConversionUnit unit) {
    config.validate();
    for (const auto& r : records)
        if (!config.find(r.variant)) throw ValidationError("record for unknown variant '" + r.variant + "'");
    auto names = variant_names(config);
    auto stats = conversion(records, names, level, unit);
    if (stats.front().users == 0) throw ValidationError("no data for control variant '" + names.front() + "'");
    if (std::none_of(stats.begin() + 1, stats.end(), [](const VariantStats& s) { return s.users > 0; }))
        throw ValidationError("no non-control variant has data");
    return build_report(config.name, std::move(stats), level, unit);
}

ExperimentReport empty_report(const ExperimentConfig& config, double level, ConversionUnit unit) {
    std::vector<VariantStats> stats;
    for (const auto& v : config.variants) stats.push_back(VariantStats{v.name, 0, 0, std::nullopt, std::nullopt});
    return ExperimentReport{config.name, level, unit, std::move(stats), {}};
}

nlohmann::json report_to_json(const ExperimentReport& report) {
    using nlohmann::json;
    json variants = json::array();
    for (const auto& v : report.variants) {
        json row = {{"name", v.name}, {"users", v.users}, {"clickers", v.clickers}};
        row["conversion_rate"] = v.conversion_rate ? json(*v.conversion_rate) : json(nullptr);
        row["ci_halfwidth"] = v.ci_halfwidth ? json(*v.ci_halfwidth) : json(nullptr);
        variants.push_back(std::move(row));
    }
    json comparisons = json::array();
    for (const auto& c : report.comparisons)
        comparisons.push_back({{"variant", c.variant},
                               {"control", c.control},
                               {"g_statistic", c.result.g_statistic},
                               {"degrees_of_freedom", c.result.degrees_of_freedom},
                               {"p_value", c.result.p_value},
                               {"confidence", c.result.confidence},
                               {"significant_at_90", c.result.significant_at_90}});
    return {{"experiment", report.experiment},
            {"level", report.level},
            {"unit", report.unit == ConversionUnit::users ? "users" : "sessions"},
            {"control", report.variants.empty() ? json(nullptr) : json(report.variants.front().name)},
            {"variants", std::move(variants)},
            {"comparisons", std::move(comparisons)}};
}

std::string render_table(const ExperimentReport& report) {
    std::unordered_map<std::string, const Comparison*> by_variant;
    for (const auto& c : report.comparisons) by_variant[c.variant] = &c;

    std::vector<std::array<std::string, 4>> rows;
    rows.push_back({"Ranker type", report.unit == ConversionUnit::users ? "Number of users" : "Number of sessions",
                    "Conversion rate", "G-test"});
    char buf[64];
    for (const auto& v : report.variants) {
        std::array<std::string, 4> row{v.name, std::to_string(v.users), "-", ""};
        if (v.conversion_rate) {
            std::snprintf(buf, sizeof buf, "%.2f%% \xc2\xb1 %.2f%%", *v.conversion_rate * 100.0, *v.ci_halfwidth * 100.0);
            row[2] = buf;
        }
        if (auto it = by_variant.find(v.name); it != by_variant.end()) {
            std::snprintf(buf, sizeof buf, "%.0f%%%s", it->second->result.confidence * 100.0,
                          it->second->result.significant_at_90 ? " *" : "");
            row[3] = buf;
        }
        rows.push_back(std::move(row));
    }
    // Width in code points; the only multibyte character is the 2-byte plus-minus sign.
    auto width = [](const std::string& s) {
        std::size_t w = 0;
        for (unsigned char c : s) w += (c & 0xc0) != 0x80;
        return w;
    };
    std::array<std::size_t, 4> widths{};
    for (const auto& row : rows)
        for (std::size_t i = 0; i < 4; ++i) widths[i] = std::max(widths[i], width(row[i]));
    std::ostringstream out;
    out << report.experiment << " (" << static_cast<int>(std::lround(report.level * 100)) << "% intervals)\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t i = 0; i < 4; ++i) {
            out << rows[r][i] << std::string(widths[i] - width(rows[r][i]), ' ');
            out << (i + 1 < 4 ? "  " : "");
        }
        out << '\n';
        if (r == 0) {
            std::size_t total = widths[0] + widths[1] + widths[2] + widths[3] + 6;
            out << std::string(total, '-') << '\n';
        }
    }
    return out.str();
}

}  // namespace erank

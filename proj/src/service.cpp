#include "erank/service.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include "erank/error.hpp"
#include "erank/random.hpp"
#include "erank/text.hpp"

namespace erank::service {

namespace {

using nlohmann::json;

Response error(int status, std::string message) { return Response{status, json{{"error", std::move(message)}}, {}}; }

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
}

}  // namespace

void ServiceConfig::validate() const {
    if (page_size == 0) throw ValidationError("page_size must be >= 1");
    if (index_snapshot_path.empty()) throw ValidationError("index_snapshot_path is required");
    parse_listen(listen);
}

ServiceConfig service_config_from_json(const nlohmann::json& doc) {
    ServiceConfig c;
    try {
        c.index_snapshot_path = doc.at("index_snapshot_path").get<std::string>();
        c.experiment_config_path = doc.value("experiment_config_path", c.experiment_config_path);
        c.listen = doc.value("listen", c.listen);
        c.page_size = doc.value("page_size", c.page_size);
        c.default_ranker = parse_ranker(doc.value("default_ranker", std::string(to_string(c.default_ranker))));
        c.log_path = doc.value("log_path", c.log_path);
        c.strict = doc.value("strict", c.strict);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed service config: ") + e.what());
    }
    c.validate();
    return c;
}

ServiceConfig load_service_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open service config " + path);
    try {
        return service_config_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw IngestError("service config is not valid JSON: " + std::string(e.what()));
    }
}

std::string resolve_log_path(const std::string& configured) {
    if (const char* env = std::getenv(kLogEnvVar); env && *env) return env;
    return configured;
}

std::pair<std::string, int> parse_listen(const std::string& listen) {
    auto colon = listen.rfind(':');
    std::string host = colon == std::string::npos ? std::string() : listen.substr(0, colon);
    std::string port = colon == std::string::npos ? listen : listen.substr(colon + 1);
    if (!all_digits(port) || port.size() > 5) throw ValidationError("bad listen address '" + listen + "'");
    int p = std::stoi(port);
    if (p > 65535) throw ValidationError("bad listen port");
    return {host.empty() ? "127.0.0.1" : host, p};
}

ClickLog::ClickLog(std::string path) : path_(std::move(path)) {
    std::error_code ec;
    auto size = std::filesystem::exists(path_, ec) ? std::filesystem::file_size(path_, ec) : 0;
    if (size == 0) {
        std::ofstream out(path_, std::ios::trunc);
        if (!out) throw IngestError("cannot create click log " + path_);
        out << kClickLogHeader << '\n';
        out.flush();
        size = kClickLogHeader.size() + 1;
    }
    committed_ = size;
}

void ClickLog::append(const SessionRecord& record) {
    auto row = format_click_log_row(record);
    row.push_back('\n');
    std::lock_guard lock(mutex_);
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    out << row;
    out.flush();
    if (!out) throw Error("failed to append to click log " + path_);
    committed_ += row.size();
}

std::vector<SessionRecord> ClickLog::read() const {
    std::uint64_t limit;
    {
        std::lock_guard lock(mutex_);
        limit = committed_;
    }
    std::ifstream in(path_, std::ios::binary);
    if (!in) throw IngestError("cannot open click log " + path_);
    std::string bytes(limit, '\0');
    in.read(bytes.data(), static_cast<std::streamsize>(limit));
    bytes.resize(static_cast<std::size_t>(in.gcount()));
    std::istringstream stream(bytes);
    return read_click_log(stream);
}

DestinationFinder::DestinationFinder(IndexSnapshot snapshot, std::optional<ExperimentConfig> experiment,
                                     ServiceConfig config)
    : snapshot_(std::move(snapshot)),
      experiment_(std::move(experiment)),
      config_(std::move(config)),
      log_(resolve_log_path(config_.log_path)) {
    if (config_.page_size == 0) throw ValidationError("page_size must be >= 1");
    if (experiment_) experiment_->validate();
    replay_log();
}

std::unique_ptr<DestinationFinder> DestinationFinder::from_config(const ServiceConfig& config) {
    config.validate();
    auto snapshot = read_snapshot_file(config.index_snapshot_path);
    std::optional<ExperimentConfig> experiment;
    if (!config.experiment_config_path.empty()) experiment = load_experiment_file(config.experiment_config_path);
    return std::make_unique<DestinationFinder>(std::move(snapshot), std::move(experiment), config);
}

void DestinationFinder::replay_log() {
    for (auto& r : log_.read()) {
        last_timestamp_ = std::max(last_timestamp_, r.timestamp);
        auto id = std::to_string(r.timestamp);
        sessions_.try_emplace(id, Session{std::move(r)});
    }
}

std::int64_t DestinationFinder::next_timestamp() {
    auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
                   .count();
    last_timestamp_ = std::max<std::int64_t>(now, last_timestamp_ + 1);
    return last_timestamp_;
}

Response DestinationFinder::activities() const {
    json list = json::array();
    const auto& vocab = snapshot_.vocabulary;
    for (ActivityId e = 0; e < vocab.size(); ++e) list.push_back({{"id", e}, {"name", vocab.name(e)}});
    return Response{200, json{{"activities", std::move(list)}}, {}};
}

Response DestinationFinder::search(const SearchRequest& request) {
    const auto& vocab = snapshot_.vocabulary;
    const auto& index = snapshot_.index;

    std::vector<ActivityId> ids;
    std::vector<std::string> unknown;
    std::string joined = request.activities;
    std::replace(joined.begin(), joined.end(), '|', ',');
    for (const auto& token : text::split_list(joined, ',')) {
        std::optional<ActivityId> id = vocab.find_folded(token);
        if (!id && all_digits(token) && token.size() < 10) {
            auto v = std::stoul(token);
            if (v < vocab.size()) id = static_cast<ActivityId>(v);
        }
        if (id)
            ids.push_back(*id);
        else
            unknown.push_back(token);
    }
    if (!unknown.empty() && config_.strict) return error(404, "unknown activity '" + unknown.front() + "'");
    if (ids.empty()) return error(400, "no resolvable activities");

    std::size_t limit = config_.page_size;
    if (request.limit) {
        if (!all_digits(*request.limit) || request.limit->size() > 9) return error(400, "limit must be a positive integer");
        limit = std::stoul(*request.limit);
        if (limit == 0) return error(400, "limit must be a positive integer");
    }

    Response resp;
    std::string user;
    if (request.user && !text::trim(*request.user).empty()) {
        user = std::string(text::trim(*request.user));
    } else if (request.cookie_user && !request.cookie_user->empty()) {
        user = *request.cookie_user;
    } else {
        auto n = anon_counter_.fetch_add(1);
        auto now = std::chrono::steady_clock::now().time_since_epoch().count();
        user = "anon-" + text::hex64(derive_seed(static_cast<std::uint64_t>(now), n));
        resp.set_user_cookie = user;
    }

    std::string variant = "default";
    RankerKind ranker = config_.default_ranker;
    if (experiment_) {
        const auto& v = experiment_->variants[assign_variant_index(user, *experiment_)];
        variant = v.name;
        if (v.ranker) ranker = *v.ranker;
    }

    auto query = Query::make(std::move(ids), vocab.size());

    SessionRecord record;
    record.user_id = user;
    record.variant = variant;
    record.query.assign(query.activities().begin(), query.activities().end());
    std::string session_id;
    {
        std::lock_guard lock(sessions_mutex_);
        record.timestamp = next_timestamp();
        session_id = std::to_string(record.timestamp);
    }
    auto seed = derive_seed(text::fnv1a64(user), static_cast<std::uint64_t>(record.timestamp));
    auto ranked = rank(index, query, ranker, seed);
    if (ranked.entries.size() > limit) ranked.entries.resize(limit);

    json results = json::array();
    std::size_t position = 0;
    for (const auto& entry : ranked.entries) {
        const auto& dest = snapshot_.destinations.at(entry.destination);
        json profile = json::array();
        for (const auto& p : endorsement_profile(index, entry.destination, 3))
            profile.push_back({{"activity_id", p.activity}, {"name", vocab.name(p.activity)}, {"share", p.share}});
        results.push_back({{"rank", ++position},
                           {"destination_id", entry.destination},
                           {"key", dest.key},
                           {"name", dest.name},
                           {"country_code", dest.country_code},
                           {"score", std::isfinite(entry.score) ? json(entry.score) : json(nullptr)},
                           {"profile", std::move(profile)}});
        record.shown.push_back(entry.destination);
    }

    log_.append(record);
    {
        std::lock_guard lock(sessions_mutex_);
        sessions_.emplace(session_id, Session{record});
    }

    json query_json = json::array();
    for (auto e : record.query) query_json.push_back({{"id", e}, {"name", vocab.name(e)}});
    resp.body = json{{"session", session_id},     {"user", user},
                     {"variant", variant},        {"ranker", std::string(to_string(ranker))},
                     {"query", std::move(query_json)}, {"ignored", unknown},
                     {"results", std::move(results)}};
    return resp;
}

Response DestinationFinder::click(std::string_view body) {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::exception&) {
        return error(400, "body is not valid JSON");
    }
    if (!doc.is_object() || !doc.contains("session") || !doc.contains("destination"))
        return error(400, "expected {user, session, destination}");

    std::string session_id;
    if (doc["session"].is_string())
        session_id = doc["session"].get<std::string>();
    else if (doc["session"].is_number_integer())
        session_id = std::to_string(doc["session"].get<std::int64_t>());
    else
        return error(400, "session must be a string");

    std::optional<DestinationId> dest;
    const auto& d = doc["destination"];
    if (d.is_number_unsigned() && d.get<std::uint64_t>() < snapshot_.destinations.size())
        dest = static_cast<DestinationId>(d.get<std::uint64_t>());
    else if (d.is_string())
        dest = snapshot_.destinations.find(d.get<std::string>());
    std::string user = doc.contains("user") && doc["user"].is_string() ? doc["user"].get<std::string>() : "";

    SessionRecord row;
    {
        std::lock_guard lock(sessions_mutex_);
        auto it = sessions_.find(session_id);
        if (it == sessions_.end() || (!user.empty() && it->second.record.user_id != user))
            return error(404, "unknown session");
        auto& rec = it->second.record;
        if (!dest || std::find(rec.shown.begin(), rec.shown.end(), *dest) == rec.shown.end())
            return error(409, "destination was not shown in this session");
        if (std::find(rec.clicked.begin(), rec.clicked.end(), *dest) != rec.clicked.end())
            return Response{200, json{{"status", "ok"}, {"logged", false}}, {}};
        rec.clicked.push_back(*dest);
        row = rec;
        row.clicked = {*dest};
        // Appending under the session lock keeps duplicate clicks from racing.
        log_.append(row);
    }
    return Response{200, json{{"status", "ok"}, {"logged", true}}, {}};
}

ExperimentReport report_for_log(std::span<const SessionRecord> records, const ExperimentConfig& config) {
    if (records.empty()) return empty_report(config);
    std::vector<std::string> names;
    for (const auto& v : config.variants) names.push_back(v.name);
    return build_report(config.name, conversion(records, names));
}

Response DestinationFinder::report(std::string_view experiment) const {
    if (!experiment_ || experiment_->name != experiment) return error(404, "unknown experiment");
    auto records = log_.read();
    return Response{200, report_to_json(report_for_log(records, *experiment_)), {}};
}

struct ApiServer::Impl {
    DestinationFinder& finder;
    httplib::Server server;

    explicit Impl(DestinationFinder& f) : finder(f) { server.set_tcp_nodelay(true); }
};

namespace {

std::optional<std::string> cookie_value(const httplib::Request& req, std::string_view name) {
    if (!req.has_header("Cookie")) return std::nullopt;
    for (const auto& part : text::split_list(req.get_header_value("Cookie"), ';')) {
        auto eq = part.find('=');
        if (eq != std::string::npos && text::trim(std::string_view(part).substr(0, eq)) == name)
            return std::string(text::trim(std::string_view(part).substr(eq + 1)));
    }
    return std::nullopt;
}

void send(httplib::Response& res, const Response& r) {
    res.status = r.status;
    if (r.set_user_cookie)
        res.set_header("Set-Cookie", std::string(kUserCookie) + "=" + *r.set_user_cookie + "; Path=/; SameSite=Lax");
    res.set_content(r.body.dump(), "application/json; charset=utf-8");
}

}  // namespace

ApiServer::ApiServer(DestinationFinder& finder) : impl_(std::make_unique<Impl>(finder)) {
    auto& s = impl_->server;
    auto& f = impl_->finder;
    s.Get("/api/activities", [&f](const httplib::Request&, httplib::Response& res) { send(res, f.activities()); });
    s.Get("/api/search", [&f](const httplib::Request& req, httplib::Response& res) {
        SearchRequest r;
        r.activities = req.get_param_value("activities");
        if (req.has_param("user")) r.user = req.get_param_value("user");
        if (req.has_param("limit")) r.limit = req.get_param_value("limit");
        r.cookie_user = cookie_value(req, kUserCookie);
        send(res, f.search(r));
    });
    s.Post("/api/click", [&f](const httplib::Request& req, httplib::Response& res) { send(res, f.click(req.body)); });
    s.Get(R"(/api/experiments/([^/]+)/report)", [&f](const httplib::Request& req, httplib::Response& res) {
        send(res, f.report(req.matches[1].str()));
    });
    s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        send(res, error(500, what));
    });
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(host);
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool ApiServer::listen() { return impl_->server.listen_after_bind(); }

void ApiServer::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace erank::service

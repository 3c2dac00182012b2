#include "recon/server.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <random>

#include <httplib.h>

#include "recon/errors.hpp"

namespace recon {

struct GameServer::Entry {
    std::mutex mu;
    std::unique_ptr<GameSession> session;
    std::size_t persisted = 0;  // events already in the session file
    std::map<std::string, nlohmann::json> by_nonce;
};

std::string new_session_id() {
    static std::mutex mu;
    static std::random_device rd;
    std::lock_guard<std::mutex> lock(mu);
    char buf[40];
    std::uint32_t w[4];
    for (auto& x : w) x = rd();
    std::snprintf(buf, sizeof buf, "%08x%08x%08x%08x", w[0], w[1], w[2], w[3]);
    return buf;
}

namespace {

nlohmann::json error_body(const std::string& msg) { return {{"error", msg}}; }

std::optional<nlohmann::json> parse_body(const std::string& body) {
    try {
        auto j = nlohmann::json::parse(body);
        if (j.is_object()) return j;
    } catch (const nlohmann::json::exception&) {
    }
    return std::nullopt;
}

nlohmann::json field_meta(const GameSession& s, const FieldArchive& a) {
    return {{"id", s.field_id()}, {"d", corr_length_for_field(s.field_id())}, {"n", a.grid()}};
}

// What a player may see: the traced geometry only. Levels and endpoint
// classification stay on the server.
nlohmann::json player_polyline(const Polyline& pl) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : pl.points) pts.push_back({p.x, p.y});
    return {{"id", pl.id}, {"kind", pl.kind == PolyKind::Isoline ? "isoline" : "gradient"}, {"closed", pl.closed},
            {"points", std::move(pts)}};
}

nlohmann::json player_metrics(const MapState& m) {
    const EntropyReport& r = m.reports().back();
    return {{"k", r.k},
            {"H_data", r.H_data},
            {"cells", m.partition().cells().size()},
            {"uniformity_gap", r.log2_cells - r.H_data}};
}

nlohmann::json click_body(const GameSession& s, const ClickResult& r, std::int64_t now) {
    nlohmann::json j;
    if (r.status == ClickResult::Status::RejectedIsoline || r.status == ClickResult::Status::Failed) {
        j["status"] = "rejected";
        j["reason"] = r.status == ClickResult::Status::Failed ? "trace_failed" : "on_isoline";
    } else {
        j["status"] = r.status == ClickResult::Status::Isoline ? "isoline" : "gradient";
        j["polyline"] = player_polyline(s.map().polylines()[static_cast<std::size_t>(r.polyline)]);
    }
    j["metrics"] = player_metrics(s.map());
    j["remaining_s"] = s.remaining_s(now);
    return j;
}

nlohmann::json header_json(const SessionLog& log) {
    return {{"session", log.session_id},
            {"player", log.player},
            {"start", log.start_ms},
            {"duration_ms", log.duration_ms},
            {"first_field", log.field_ids.front()}};
}

}  // namespace

SessionLog read_session_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read " + path.string());
    std::string line;
    SessionLog log;
    bool header = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IoError("corrupt session file " + path.string() + ": " + e.what());
        }
        if (header) {
            log.session_id = j.at("session").get<std::string>();
            log.player = j.at("player").get<std::string>();
            log.start_ms = j.at("start").get<std::int64_t>();
            log.duration_ms = j.value("duration_ms", kGameDurationMs);
            log.field_ids.push_back(j.at("first_field").get<int>());
            header = false;
            continue;
        }
        SessionEvent e = event_from_json(j);
        if (e.type == "next_area") log.field_ids.push_back(e.field_id);
        log.events.push_back(std::move(e));
    }
    if (header) throw IoError("empty session file " + path.string());
    return log;
}

std::unique_ptr<GameSession> restore_session(const SessionLog& log, std::shared_ptr<const FieldArchive> archive) {
    auto s = std::make_unique<GameSession>(log.session_id, log.player, std::move(archive), log.field_ids.front(),
                                           log.start_ms);
    for (const auto& e : log.events) {
        if (e.type == "next_area") s->next_area(e.t_ms);
        else if (e.type == "click") s->handle_click(e.point, e.t_ms, e.nonce);
        else if (e.type == "program")
            s->apply_program(e.action == "isoline" ? PolyKind::Isoline : PolyKind::Gradient, e.origin, e.t_ms);
        else throw ConsistencyError("unknown event type " + e.type);
    }
    if (log_to_json(s->log()) != log_to_json(log)) throw ConsistencyError("session " + log.session_id + " does not replay");
    return s;
}

GameServer::GameServer(ServerConfig cfg) : cfg_(std::move(cfg)) {
    if (!cfg_.clock)
        cfg_.clock = [] {
            return std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                .count();
        };
    try {
        archive_ = FieldArchive::open(cfg_.archive_dir);
    } catch (const IoError&) {
        archive_.reset();
    }
    if (!cfg_.log_dir.empty()) {
        std::filesystem::create_directories(cfg_.log_dir);
        if (archive_) restore_all();
    }
}

GameServer::~GameServer() = default;

void GameServer::restore_all() {
    std::vector<std::filesystem::path> files;
    for (const auto& de : std::filesystem::directory_iterator(cfg_.log_dir))
        if (de.path().extension() == ".jsonl") files.push_back(de.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        const SessionLog log = read_session_file(f);
        auto e = std::make_shared<Entry>();
        e->session = restore_session(log, archive_);
        e->persisted = log.events.size();
        for (std::size_t i = 0; i < log.events.size(); ++i) {
            const auto& ev = log.events[i];
            if (ev.nonce.empty()) continue;
            nlohmann::json body = {{"status", ev.action == "rejected" ? "rejected" : ev.action}};
            if (ev.action == "rejected") body["reason"] = "on_isoline";
            else body["polyline"] = {{"id", ev.polyline}};
            e->by_nonce[ev.nonce] = body;
        }
        int& next = next_field_[log.player];
        next = std::max(next, e->session->field_id() + 1);
        sessions_[log.session_id] = std::move(e);
        ++restored_;
    }
}

void GameServer::append(Entry& e, std::size_t from) {
    if (cfg_.log_dir.empty()) return;
    const SessionLog& log = e.session->log();
    const auto path = cfg_.log_dir / (log.session_id + ".jsonl");
    const bool fresh = !std::filesystem::exists(path);
    std::ofstream os(path, std::ios::app);
    if (!os) throw IoError("cannot append to " + path.string());
    if (fresh) os << header_json(log).dump() << '\n';
    for (std::size_t i = from; i < log.events.size(); ++i) os << event_to_json(log.events[i]).dump() << '\n';
    os.flush();
    e.persisted = log.events.size();
}

std::shared_ptr<GameServer::Entry> GameServer::find(const std::string& id) const {
    std::lock_guard<std::mutex> lock(mu_);
    const auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

std::size_t GameServer::session_count() const {
    std::lock_guard<std::mutex> lock(mu_);
    return sessions_.size();
}

ApiResponse GameServer::create_session(const std::string& body) {
    if (!archive_) return {503, error_body("field archive unavailable")};
    const auto j = parse_body(body);
    if (!j || !j->contains("player") || !(*j)["player"].is_string() || (*j)["player"].get<std::string>().empty())
        return {400, error_body("player required")};
    const std::string player = (*j)["player"].get<std::string>();
    const std::string id = new_session_id();
    auto e = std::make_shared<Entry>();
    {
        std::lock_guard<std::mutex> lock(mu_);
        int& next = next_field_[player];
        e->session = std::make_unique<GameSession>(id, player, archive_, next, now());
        next = e->session->field_id() + 1;
        sessions_[id] = e;
    }
    std::lock_guard<std::mutex> lock(e->mu);
    append(*e, 0);
    const auto t = now();
    return {201,
            {{"session", id},
             {"player", player},
             {"field", field_meta(*e->session, *archive_)},
             {"remaining_s", e->session->remaining_s(t)}}};
}

ApiResponse GameServer::click(const std::string& id, const std::string& body) {
    const auto e = find(id);
    if (!e) return {404, error_body("unknown session")};
    const auto j = parse_body(body);
    if (!j || !j->contains("x") || !j->contains("y") || !(*j)["x"].is_number() || !(*j)["y"].is_number())
        return {400, error_body("x and y required")};
    const Point p{(*j)["x"].get<double>(), (*j)["y"].get<double>()};
    const std::string nonce = j->value("nonce", "");
    std::lock_guard<std::mutex> lock(e->mu);
    GameSession& s = *e->session;
    const std::int64_t t = now();
    if (!nonce.empty()) {
        if (const auto it = e->by_nonce.find(nonce); it != e->by_nonce.end()) {
            nlohmann::json r = it->second;
            r["metrics"] = player_metrics(s.map());
            r["remaining_s"] = s.remaining_s(t);
            r["duplicate"] = true;
            return {200, r};
        }
    }
    if (!s.active(t)) return {409, error_body("session expired")};
    if (!in_domain(p)) return {400, error_body("click outside the map")};
    const std::size_t before = s.log().events.size();
    const ClickResult r = s.handle_click(p, t, nonce);
    append(*e, before);
    nlohmann::json out = click_body(s, r, t);
    if (!nonce.empty()) e->by_nonce[nonce] = out;
    return {200, out};
}

ApiResponse GameServer::next_area(const std::string& id) {
    const auto e = find(id);
    if (!e) return {404, error_body("unknown session")};
    std::lock_guard<std::mutex> lock(e->mu);
    GameSession& s = *e->session;
    const std::int64_t t = now();
    const std::size_t before = s.log().events.size();
    if (!s.next_area(t)) return {409, error_body("session expired")};
    append(*e, before);
    {
        std::lock_guard<std::mutex> glock(mu_);
        int& next = next_field_[s.player()];
        next = std::max(next, s.field_id() + 1);
    }
    return {200, {{"field", field_meta(s, *archive_)}, {"remaining_s", s.remaining_s(t)}}};
}

ApiResponse GameServer::log(const std::string& id) {
    const auto e = find(id);
    if (!e) return {404, error_body("unknown session")};
    std::lock_guard<std::mutex> lock(e->mu);
    return {200, log_to_json(e->session->log())};
}

ApiResponse GameServer::reveal(const std::string& id) {
    const auto e = find(id);
    if (!e) return {404, error_body("unknown session")};
    std::lock_guard<std::mutex> lock(e->mu);
    const GameSession& s = *e->session;
    if (s.active(now())) return {403, error_body("reveal is available after the game")};
    const SessionReplay rep = replay_session(s.log(), *archive_);
    nlohmann::json areas = nlohmann::json::array();
    for (const auto& a : rep.areas) {
        const TopologyPartition& tp = a.field->topology;
        nlohmann::json crit = nlohmann::json::array();
        for (const auto& cp : tp.critical_points)
            crit.push_back({{"id", cp.id},
                            {"x", cp.location.x},
                            {"y", cp.location.y},
                            {"value", cp.value},
                            {"index", static_cast<int>(cp.index)}});
        nlohmann::json sets = nlohmann::json::array();
        for (const auto& cs : critical_level_sets(a.field->field, tp.critical_points)) {
            if (cs.kind != CriticalLevelSet::Kind::SaddleContour) continue;
            nlohmann::json contours = nlohmann::json::array();
            for (const auto& c : cs.contours) {
                nlohmann::json pts = nlohmann::json::array();
                for (const auto& p : c) pts.push_back({p.x, p.y});
                contours.push_back(std::move(pts));
            }
            sets.push_back({{"owner", cs.owner}, {"level", cs.level}, {"contours", std::move(contours)}});
        }
        nlohmann::json reports = nlohmann::json::array();
        for (const auto& r : a.map->reports()) reports.push_back(report_to_json(r));
        areas.push_back({{"field", a.field_id},
                         {"d", corr_length_for_field(a.field_id)},
                         {"critical_points", std::move(crit)},
                         {"critical_level_sets", std::move(sets)},
                         {"reeb", reeb_to_json(tp)},
                         {"H_M", a.map->h_topology()},
                         {"reports", std::move(reports)}});
    }
    return {200, {{"session", s.id()}, {"areas", std::move(areas)}, {"violations", rep.violations}}};
}

ApiResponse GameServer::health() const {
    return {200, {{"status", "ok"}, {"archive", archive_loaded()}, {"sessions", session_count()}}};
}

void GameServer::mount(httplib::Server& http) {
    auto send = [this](httplib::Response& res, const ApiResponse& r) {
        res.status = r.status;
        res.set_header("Access-Control-Allow-Origin", cfg_.cors_origin);
        res.set_content(r.body.dump(), "application/json");
    };
    auto guarded = [send](auto fn) {
        return [send, fn](const httplib::Request& req, httplib::Response& res) {
            try {
                send(res, fn(req));
            } catch (const std::exception& ex) {
                send(res, {500, error_body(ex.what())});
            }
        };
    };
    http.Options(R"(/.*)", [this](const httplib::Request&, httplib::Response& res) {
        res.status = 204;
        res.set_header("Access-Control-Allow-Origin", cfg_.cors_origin);
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
    });
    http.Post("/sessions", guarded([this](const httplib::Request& req) { return create_session(req.body); }));
    http.Post(R"(/sessions/([0-9a-f]+)/clicks)",
              guarded([this](const httplib::Request& req) { return click(req.matches[1], req.body); }));
    http.Post(R"(/sessions/([0-9a-f]+)/next-area)",
              guarded([this](const httplib::Request& req) { return next_area(req.matches[1]); }));
    http.Get(R"(/sessions/([0-9a-f]+)/log)", guarded([this](const httplib::Request& req) { return log(req.matches[1]); }));
    http.Get(R"(/sessions/([0-9a-f]+)/reveal)",
             guarded([this](const httplib::Request& req) { return reveal(req.matches[1]); }));
    http.Get("/healthz", guarded([this](const httplib::Request&) { return health(); }));
}

bool GameServer::listen(const std::string& host, int port) {
    http_ = std::make_unique<httplib::Server>();
    mount(*http_);
    return http_->listen(host, port);
}

void GameServer::stop() {
    if (http_) http_->stop();
}

}  // namespace recon

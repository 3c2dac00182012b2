#include "recon/game.hpp"

#include <cmath>
#include <algorithm>
#include <cstdio>
#include <fstream>

#include "recon/errors.hpp"

namespace recon {

double corr_length_for_field(int id) { return id % 2 == 0 ? 0.25 : 0.5; }

namespace {

std::filesystem::path field_file(const std::filesystem::path& dir, int id) {
    char name[32];
    std::snprintf(name, sizeof name, "field_%06d.rfld", id);
    return dir / name;
}

}  // namespace

void FieldArchive::generate(const std::filesystem::path& dir, int count, int n, std::uint64_t seed_base) {
    if (count < 2 || count % 2 != 0) throw ParameterError("archive size must be even and >= 2");
    std::filesystem::create_directories(dir);
    for (int id = 0; id < count; ++id) {
        const MorseField mf = make_morse_field(n, corr_length_for_field(id), seed_base + static_cast<std::uint64_t>(id));
        save_field(mf.field, field_file(dir, id));
    }
    std::ofstream os(dir / "archive.json");
    if (!os) throw IoError("cannot write archive manifest in " + dir.string());
    os << nlohmann::json{{"count", count}, {"n", n}, {"seed_base", seed_base}}.dump(2) << '\n';
}

std::shared_ptr<FieldArchive> FieldArchive::open(const std::filesystem::path& dir) {
    std::ifstream is(dir / "archive.json");
    if (!is) throw IoError("no archive manifest in " + dir.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("bad archive manifest: ") + e.what());
    }
    auto a = std::make_shared<FieldArchive>();
    a->dir_ = dir;
    a->count_ = j.at("count").get<int>();
    a->n_ = j.at("n").get<int>();
    if (a->count_ < 2 || a->count_ % 2 != 0) throw IoError("archive size must be even and >= 2");
    return a;
}

std::shared_ptr<const MorseField> FieldArchive::field(int id) const {
    if (id < 0) throw ParameterError("negative field id");
    const int slot = id % count_;
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(slot);
    if (it != cache_.end()) return it->second;
    auto mf = std::make_shared<MorseField>();
    mf->field = load_field(field_file(dir_, slot));
    mf->topology = topology_partition(mf->field);
    cache_.emplace(slot, mf);
    return mf;
}

nlohmann::json event_to_json(const SessionEvent& e) {
    nlohmann::json j = {{"t", e.t_ms}, {"field", e.field_id}, {"type", e.type}, {"x", e.point.x}, {"y", e.point.y}};
    if (e.type != "next_area") {
        j["action"] = e.action;
        j["polyline"] = e.polyline;
        j["ox"] = e.origin.x;
        j["oy"] = e.origin.y;
    }
    if (!e.nonce.empty()) j["nonce"] = e.nonce;
    return j;
}

SessionEvent event_from_json(const nlohmann::json& j) {
    try {
        SessionEvent e;
        e.t_ms = j.at("t").get<std::int64_t>();
        e.field_id = j.at("field").get<int>();
        e.type = j.at("type").get<std::string>();
        e.point = {j.at("x").get<double>(), j.at("y").get<double>()};
        if (e.type != "next_area") {
            e.action = j.at("action").get<std::string>();
            e.polyline = j.at("polyline").get<int>();
            e.origin = {j.at("ox").get<double>(), j.at("oy").get<double>()};
        }
        e.nonce = j.value("nonce", "");
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw ParameterError(std::string("malformed session event: ") + ex.what());
    }
}

nlohmann::json log_to_json(const SessionLog& log) {
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : log.events) events.push_back(event_to_json(e));
    return {{"header",
             {{"session", log.session_id},
              {"player", log.player},
              {"start", log.start_ms},
              {"duration_ms", log.duration_ms},
              {"field_ids", log.field_ids}}},
            {"events", std::move(events)}};
}

SessionLog log_from_json(const nlohmann::json& j) {
    SessionLog log;
    try {
        const auto& h = j.at("header");
        log.session_id = h.at("session").get<std::string>();
        log.player = h.at("player").get<std::string>();
        log.start_ms = h.at("start").get<std::int64_t>();
        log.duration_ms = h.value("duration_ms", kGameDurationMs);
        log.field_ids = h.at("field_ids").get<std::vector<int>>();
        for (const auto& ej : j.at("events")) log.events.push_back(event_from_json(ej));
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("malformed session log: ") + e.what());
    }
    if (log.field_ids.empty()) throw ParameterError("session log without fields");
    return log;
}

GameSession::GameSession(std::string id, std::string player, std::shared_ptr<const FieldArchive> archive,
                         int first_field, std::int64_t start_ms)
    : archive_(std::move(archive)) {
    if (!archive_ || archive_->size() == 0) throw IoError("field archive unavailable");
    log_.session_id = std::move(id);
    log_.player = std::move(player);
    log_.start_ms = start_ms;
    log_.field_ids.push_back(first_field);
    const auto mf = archive_->field(first_field);
    area_ = std::make_unique<MapState>(mf->field, mf->topology);
}

double GameSession::remaining_s(std::int64_t now_ms) const {
    return std::max<std::int64_t>(0, log_.start_ms + log_.duration_ms - now_ms) / 1000.0;
}

std::int64_t GameSession::stamp(std::int64_t t_ms) const {
    if (log_.events.empty()) return std::max(t_ms, log_.start_ms);
    return std::max(t_ms, log_.events.back().t_ms + 1);
}

ClickResult GameSession::map(PolyKind kind, Point point, Point origin, std::int64_t t, const std::string& type,
                             const std::string& nonce) {
    SessionEvent e;
    e.t_ms = t;
    e.field_id = field_id();
    e.type = type;
    e.point = point;
    e.origin = origin;
    e.nonce = nonce;
    ClickResult r;
    try {
        const StepOutcome o = kind == PolyKind::Isoline ? area_->map_isoline(origin) : area_->map_gradient(origin);
        e.action = kind == PolyKind::Isoline ? "isoline" : "gradient";
        e.polyline = o.polyline;
        r.status = kind == PolyKind::Isoline ? ClickResult::Status::Isoline : ClickResult::Status::Gradient;
        r.polyline = o.polyline;
        r.line = &area_->polylines()[static_cast<std::size_t>(o.polyline)];
    } catch (const TracingError&) {
        e.action = "rejected";
        r.status = ClickResult::Status::Failed;
    }
    log_.events.push_back(std::move(e));
    return r;
}

ClickResult GameSession::handle_click(Point p, std::int64_t t_ms, const std::string& nonce) {
    if (!active(t_ms)) return {};
    if (!in_domain(p)) throw DomainError("click outside the map");
    const std::int64_t t = stamp(t_ms);
    const double tol = area_->trace_config().hit_tol_cells * area_->field().spacing();
    const ClickHit hit = locate_click(area_->polylines(), p, tol);
    if (hit.on_gradient) return map(PolyKind::Isoline, p, hit.nearest, t, "click", nonce);
    for (const auto& pl : area_->polylines()) {
        if (pl.kind == PolyKind::Isoline && distance_to_polyline(pl, p) <= tol) {
            log_.events.push_back({t, field_id(), "click", p, "rejected", p, -1, nonce});
            return {ClickResult::Status::RejectedIsoline, -1, nullptr};
        }
    }
    return map(PolyKind::Gradient, p, p, t, "click", nonce);
}

ClickResult GameSession::apply_program(PolyKind kind, Point origin, std::int64_t t_ms) {
    if (!active(t_ms)) return {};
    if (!in_domain(origin)) throw DomainError("program origin outside the map");
    return map(kind, origin, origin, stamp(t_ms), "program", "");
}

bool GameSession::next_area(std::int64_t t_ms) {
    if (!active(t_ms)) return false;
    const int next = field_id() + 1;
    const auto mf = archive_->field(next);
    log_.events.push_back({stamp(t_ms), next, "next_area", {}, "", {}, -1, ""});
    log_.field_ids.push_back(next);
    area_ = std::make_unique<MapState>(mf->field, mf->topology);
    return true;
}

std::vector<char> topological_cells(const DataPartition& part) {
    const auto saddles = part.saddle_counts();
    std::vector<char> out(saddles.size());
    for (std::size_t c = 0; c < saddles.size(); ++c) out[c] = saddles[c] > 0;
    return out;
}

double topological_measure(const DataPartition& part) {
    const auto in = topological_cells(part);
    double m = 0.0, total = 0.0;
    for (const auto& c : part.cells()) {
        total += c.measure;
        if (in[static_cast<std::size_t>(c.id)]) m += c.measure;
    }
    return total > 0 ? m / total : 0.0;
}

int cell_at(const MapState& map, Point p) {
    return map.partition().cell_of(locate_point(map.partition().tree(), map.field(), p));
}

SessionReplay replay_session(const SessionLog& log, const FieldArchive& archive, const ReplayObserver& observe) {
    SessionReplay out;
    auto open_area = [&](int id) {
        AreaReplay a;
        a.field_id = id;
        a.field = archive.field(id);
        a.map = std::make_unique<MapState>(a.field->field, a.field->topology);
        out.areas.push_back(std::move(a));
    };
    open_area(log.field_ids.front());
    std::vector<int> ids{log.field_ids.front()};
    std::int64_t last_t = log.start_ms - 1;
    char buf[256];
    for (std::size_t i = 0; i < log.events.size(); ++i) {
        const auto& e = log.events[i];
        auto fail = [&](const char* what) {
            std::snprintf(buf, sizeof buf, "event %zu: %s", i, what);
            out.errors.emplace_back(buf);
        };
        if (e.t_ms <= last_t) fail("timestamps not strictly increasing");
        if (e.t_ms >= log.start_ms + log.duration_ms) fail("event after the clock expired");
        last_t = e.t_ms;
        if (e.type == "next_area") {
            if (e.field_id != out.areas.back().field_id + 1) fail("next area is not the following field id");
            open_area(e.field_id);
            ids.push_back(e.field_id);
            continue;
        }
        auto& area = out.areas.back();
        if (e.field_id != area.field_id) fail("event on a field other than the current one");
        if (e.type != "click" && e.type != "program") {
            fail("unknown event type");
            continue;
        }
        if (e.action == "rejected") continue;
        MapState& map = *area.map;
        const PolyKind kind = e.action == "isoline" ? PolyKind::Isoline : PolyKind::Gradient;
        if (e.action != "isoline" && e.action != "gradient") {
            fail("unknown action");
            continue;
        }
        if (e.type == "click") {
            const double tol = map.trace_config().hit_tol_cells * map.field().spacing();
            const ClickHit hit = locate_click(map.polylines(), e.point, tol);
            if (hit.on_gradient != (kind == PolyKind::Isoline)) fail("click resolves to a different action");
            else if (hit.on_gradient && (hit.nearest.x != e.origin.x || hit.nearest.y != e.origin.y))
                fail("isoline origin differs from the resolved click");
        }
        if (kind == PolyKind::Isoline && map.partition().cell(cell_at(map, e.origin)).chi > -1) {
            std::snprintf(buf, sizeof buf, "event %zu: isoline outside the cells with chi <= -1", i);
            out.violations.emplace_back(buf);
        }
        if (observe) observe(i, map);
        try {
            const StepOutcome o = kind == PolyKind::Isoline ? map.map_isoline(e.origin) : map.map_gradient(e.origin);
            if (o.polyline != e.polyline) fail("polyline index differs");
        } catch (const TracingError&) {
            fail("program failed to trace on replay");
        }
        area.events.push_back(i);
    }
    if (ids != log.field_ids) out.errors.emplace_back("header field ids do not match the events");
    return out;
}

namespace {

// Arc-length uniform point of the mapped gradients inside the region. Edges
// are assigned to cells through the tree path of their gradient, so thin
// cells are found without rejection over the whole map.
std::optional<Point> sample_on_gradients(const MapState& map, const std::vector<char>& in, bool topological,
                                         Rng& rng) {
    struct Edge {
        Point a, b;
    };
    std::vector<Edge> edges;
    std::vector<double> cum;
    double total = 0.0;
    const auto& lines = map.polylines();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const Polyline& pl = lines[i];
        if (pl.kind != PolyKind::Gradient || pl.points.size() < 2) continue;
        const auto& path = map.gradient_path(static_cast<int>(i));
        if (!path) continue;
        const auto segs = map.partition().path_segments(*path);
        double fa = eval(map.field(), pl.points[0]);
        for (std::size_t k = 0; k + 1 < pl.points.size(); ++k) {
            const Point a = pl.points[k], b = pl.points[k + 1];
            const double fb = eval(map.field(), b);
            const double len = std::hypot(b.x - a.x, b.y - a.y);
            const double lo = std::min(fa, fb), hi = std::max(fa, fb);
            // Pieces of the edge whose interpolated level lies in a region cell.
            for (const auto& sg : segs) {
                if (sg.hi < lo || sg.lo > hi) continue;
                if (static_cast<bool>(in[static_cast<std::size_t>(sg.cell)]) != topological) continue;
                double t0 = 0.0, t1 = 1.0;
                if (hi > lo) {
                    t0 = (std::max(lo, sg.lo) - fa) / (fb - fa);
                    t1 = (std::min(hi, sg.hi) - fa) / (fb - fa);
                    if (t0 > t1) std::swap(t0, t1);
                }
                const double piece = len * (t1 - t0);
                if (!(piece > 0)) continue;
                total += piece;
                edges.push_back({{a.x + t0 * (b.x - a.x), a.y + t0 * (b.y - a.y)},
                                 {a.x + t1 * (b.x - a.x), a.y + t1 * (b.y - a.y)}});
                cum.push_back(total);
            }
            fa = fb;
        }
    }
    if (edges.empty()) return std::nullopt;
    for (int tries = 0; tries < 50; ++tries) {
        const double u = rng.uniform() * total;
        const auto k = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
        const Edge& e = edges[std::min(k, edges.size() - 1)];
        const double t = rng.uniform();
        const Point q{e.a.x + t * (e.b.x - e.a.x), e.a.y + t * (e.b.y - e.a.y)};
        if (static_cast<bool>(in[static_cast<std::size_t>(cell_at(map, q))]) == topological) return q;
    }
    return std::nullopt;
}

// Start point for a gradient that will cross the region: a uniform pixel of
// it, or for cells too thin to own pixels a point next to one of their
// saddles.
std::optional<Point> sample_in_region(const MapState& map, const std::vector<char>& in, bool topological, Rng& rng) {
    const ScalarField& f = map.field();
    const DataPartition& part = map.partition();
    const auto cells = part.pixel_cells(f);
    std::vector<int> pixels;
    for (std::size_t i = 0; i < cells.size(); ++i)
        if (cells[i] >= 0 && static_cast<bool>(in[static_cast<std::size_t>(cells[i])]) == topological)
            pixels.push_back(static_cast<int>(i));
    const double h = f.spacing();
    for (int tries = 0; !pixels.empty() && tries < 100; ++tries) {
        const int px = pixels[static_cast<std::size_t>(rng.uniform() * static_cast<double>(pixels.size()))];
        const Point c = f.node_point(px % f.n(), px / f.n());
        const Point q{std::clamp(c.x + (rng.uniform() - 0.5) * h, 0.0, 1.0),
                      std::clamp(c.y + (rng.uniform() - 0.5) * h, 0.0, 1.0)};
        if (static_cast<bool>(in[static_cast<std::size_t>(cell_at(map, q))]) == topological) return q;
    }
    if (!topological) return std::nullopt;
    std::vector<Point> saddles;
    const auto& nodes = part.tree().nodes();
    for (std::size_t v = 0; v < nodes.size(); ++v) {
        if (nodes[v].kind != NodeKind::Saddle || !in[static_cast<std::size_t>(part.cell_of_node(static_cast<int>(v)))])
            continue;
        const int px = nodes[v].pixel;
        saddles.push_back(f.node_point(px % f.n(), px / f.n()));
    }
    if (saddles.empty()) return std::nullopt;
    const Point c = saddles[static_cast<std::size_t>(rng.uniform() * static_cast<double>(saddles.size()))];
    return Point{std::clamp(c.x + (rng.uniform() - 0.5) * h, 0.0, 1.0), std::clamp(c.y + (rng.uniform() - 0.5) * h, 0.0, 1.0)};
}

}  // namespace

SessionLog synthetic_player(const SyntheticPlayerConfig& cfg, std::shared_ptr<const FieldArchive> archive,
                            int first_field, const std::string& player) {
    if (cfg.isoline_clicks < 1 || cfg.areas < 1) throw ParameterError("synthetic player needs clicks and areas");
    if (cfg.kind == PlayerKind::Beta && !(cfg.beta >= 0)) throw ParameterError("beta must be >= 0");
    GameSession s(player + "-synthetic", player, std::move(archive), first_field, 0);
    Rng rng(cfg.seed);
    std::int64_t t = 0;
    for (int a = 0; a < cfg.areas; ++a) {
        if (a > 0 && !s.next_area(t += cfg.click_interval_ms)) break;
        int iso = 0;
        while (iso < cfg.isoline_clicks) {
            t += cfg.click_interval_ms;
            if (!s.active(t)) return s.log();
            bool has_grad = false;
            for (const auto& pl : s.map().polylines()) has_grad |= pl.kind == PolyKind::Gradient;
            if (!has_grad || rng.uniform() < cfg.gradient_prob) {
                s.apply_program(PolyKind::Gradient, {rng.uniform(), rng.uniform()}, t);
                continue;
            }
            if (cfg.kind == PlayerKind::UniformRandom) {
                s.apply_program(PolyKind::Isoline, {rng.uniform(), rng.uniform()}, t);
                ++iso;
                continue;
            }
            const DataPartition& part = s.map().partition();
            const auto in = topological_cells(part);
            const double p = topological_measure(part);
            const bool topological = p > 0 && rng.uniform() < std::pow(p, cfg.beta);
            if (const auto o = sample_on_gradients(s.map(), in, topological, rng)) {
                s.apply_program(PolyKind::Isoline, *o, t);
                ++iso;
                continue;
            }
            // No mapped gradient reaches the chosen region yet: map one through it.
            const auto g = sample_in_region(s.map(), in, topological, rng);
            s.apply_program(PolyKind::Gradient, g ? *g : Point{rng.uniform(), rng.uniform()}, t);
        }
    }
    return s.log();
}

}  // namespace recon

#include "recon/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "recon/errors.hpp"

namespace recon {

void validate(const StrategyConfig& cfg) {
    if (!(cfg.T >= 0)) throw ParameterError("T must be >= 0");
    if (cfg.n < 1) throw ParameterError("n must be >= 1");
    if (cfg.budget < 1) throw ParameterError("budget must be >= 1");
}

bool exploit_rule(int k, double R, double T) {
    if (R <= 0) return true;
    return R > std::pow(static_cast<double>(k), -T);
}

std::optional<IsoChoice> choose_iso_origin(const MapState& state) {
    const auto& part = state.partition();
    std::vector<IsoChoice> cands;
    for (std::size_t g = 0; g < state.polylines().size(); ++g) {
        const auto& path = state.gradient_path(static_cast<int>(g));
        if (!path) continue;
        for (const auto& seg : part.path_segments(*path))
            if (part.cell(seg.cell).chi <= -1 && seg.hi - seg.lo >= kMinSegmentRange)
                cands.push_back({static_cast<int>(g), seg.cell, seg.lo, seg.hi, {}});
    }
    std::stable_sort(cands.begin(), cands.end(), [](const IsoChoice& a, const IsoChoice& b) {
        const double ra = a.hi - a.lo, rb = b.hi - b.lo;
        if (std::abs(ra - rb) > 1e-12) return ra > rb;
        if (a.gradient != b.gradient) return a.gradient < b.gradient;
        return a.cell < b.cell;
    });
    for (auto& c : cands) {
        const double mid = 0.5 * (c.lo + c.hi);
        if (point_at_level(state.field(), state.polylines()[static_cast<std::size_t>(c.gradient)], mid, c.point))
            return c;
    }
    return std::nullopt;
}

std::vector<Point> scan_origins(const ScalarField& f, const Polyline& grad, int n) {
    std::vector<Point> out;
    if (grad.points.size() < 2) return out;
    const double lo = eval(f, grad.points.front()), hi = eval(f, grad.points.back());
    if (!(hi > lo)) return out;
    for (int j = 1; j <= n; ++j) {
        Point p;
        if (point_at_level(f, grad, lo + (hi - lo) * j / (n + 1), p)) out.push_back(p);
    }
    return out;
}

namespace {

// Cells met by at least one mapped gradient path, optionally counting only
// segments that can still be cut.
std::vector<char> crossed_cells(const MapState& state, bool unresolved_only = false) {
    std::vector<char> out(state.partition().cells().size(), 0);
    for (std::size_t g = 0; g < state.polylines().size(); ++g)
        if (const auto& path = state.gradient_path(static_cast<int>(g)))
            for (const auto& seg : state.partition().path_segments(*path))
                if (!unresolved_only || seg.hi - seg.lo >= kMinSegmentRange) out[static_cast<std::size_t>(seg.cell)] = 1;
    return out;
}

std::uint64_t digest(const Rng& rng) {
    Rng copy = rng;
    return copy.next_u64();
}

Point boundary_point(Rng& rng) {
    const double t = rng.uniform() * 4.0;
    const int side = static_cast<int>(t);
    const double s = t - side;
    switch (side) {
        case 0: return {s, 0.0};
        case 1: return {1.0, s};
        case 2: return {1.0 - s, 1.0};
        default: return {0.0, 1.0 - s};
    }
}

class Runner {
public:
    Runner(const MorseField& mf, const StrategyConfig& cfg, const TraceConfig& tcfg)
        : cfg_(cfg), state_(mf.field, mf.topology, tcfg), rng_(cfg.seed) {
        trace_.cfg = cfg;
        trace_.field_n = mf.field.n();
        trace_.field_d = mf.field.corr_length();
        trace_.field_seed = mf.field.seed();
    }

    bool done() const { return state_.steps() >= cfg_.budget; }

    void apply(PolyKind kind, Point origin, StepMode mode) {
        const int k = state_.steps() + 1;
        trace_.programs.push_back({k, kind, origin, mode, digest(rng_)});
        trace_.outcomes.push_back(kind == PolyKind::Isoline ? state_.map_isoline(origin) : state_.map_gradient(origin));
    }

    void topology_guided() {
        apply(PolyKind::Gradient, boundary_point(rng_), StepMode::Explore);
        while (!done()) {
            const int k = state_.steps();
            if (exploit_rule(k, state_.reports().back().R_k, cfg_.T)) {
                if (const auto c = choose_iso_origin(state_)) {
                    apply(PolyKind::Isoline, c->point, StepMode::Exploit);
                    continue;
                }
                bool extended = false;
                const auto crossed = crossed_cells(state_);
                for (int cell : state_.partition().eligible_cells()) {
                    if (crossed[static_cast<std::size_t>(cell)]) continue;
                    if (const auto p = state_.sample_on_cell_boundary(cell, rng_)) {
                        apply(PolyKind::Gradient, *p, StepMode::Extension);
                        extended = true;
                        break;
                    }
                }
                if (extended) continue;
            }
            apply(PolyKind::Gradient, state_.sample_on_isolines(rng_), StepMode::Explore);
        }
    }

    void n_scan() {
        while (!done()) {
            const Point o{rng_.uniform(), rng_.uniform()};
            apply(PolyKind::Gradient, o, StepMode::Scan);
            const auto& grad = state_.polylines().back();
            for (const Point& p : scan_origins(state_.field(), grad, cfg_.n)) {
                if (done()) break;
                apply(PolyKind::Isoline, p, StepMode::Scan);
            }
        }
    }

    RunTrace finish() {
        trace_.reports = state_.reports();
        trace_.polylines = state_.polylines();
        trace_.h_topology = state_.h_topology();
        return std::move(trace_);
    }

    RunTrace& trace() { return trace_; }

private:
    StrategyConfig cfg_;
    MapState state_;
    Rng rng_;
    RunTrace trace_;
};

}  // namespace

RunTrace run_strategy(const MorseField& mf, const StrategyConfig& cfg, const TraceConfig& tcfg) {
    validate(cfg);
    Runner r(mf, cfg, tcfg);
    try {
        if (cfg.kind == StrategyKind::TopologyGuided) r.topology_guided();
        else r.n_scan();
    } catch (const TracingError& e) {
        r.trace().error = e.what();
        // The failed program never reached the map.
        r.trace().programs.pop_back();
    }
    return r.finish();
}

MapState replay_programs(const MorseField& mf, const std::vector<Program>& programs, const TraceConfig& tcfg) {
    MapState state(mf.field, mf.topology, tcfg);
    for (const auto& p : programs) {
        if (p.k != state.steps() + 1) throw ConsistencyError("program index out of sequence");
        if (p.kind == PolyKind::Isoline) state.map_isoline(p.origin);
        else state.map_gradient(p.origin);
    }
    return state;
}

ExploitRun exploit_known_extrema(const MorseField& mf, double target, int max_isolines, std::uint64_t seed,
                                 const TraceConfig& tcfg) {
    if (max_isolines < 0) throw ParameterError("max_isolines must be >= 0");
    MapState state(mf.field, mf.topology, tcfg);
    Rng rng(seed);
    state.reveal_extrema();
    const double h = 0.5 * mf.field.spacing();
    for (const auto& cp : mf.topology.critical_points) {
        if (cp.index == CritKind::Saddle) continue;
        // The gradient vanishes at the extremum itself.
        state.map_gradient({cp.location.x < 0.5 ? cp.location.x + h : cp.location.x - h, cp.location.y});
    }
    ExploitRun out;
    // Extensions can miss their cell; cap the retries.
    const int max_extensions = 10 * static_cast<int>(mf.topology.cell_count()) + 10;
    while (out.isolines < max_isolines && state.reports().back().H_bar >= target) {
        if (const auto c = choose_iso_origin(state)) {
            state.map_isoline(c->point);
            ++out.isolines;
            continue;
        }
        if (out.gradients >= max_extensions) break;
        const auto crossed = crossed_cells(state, true);
        std::optional<Point> origin;
        for (int cell : state.partition().eligible_cells())
            if (!crossed[static_cast<std::size_t>(cell)] && (origin = state.sample_on_cell_boundary(cell, rng))) break;
        if (!origin) break;
        state.map_gradient(*origin);
        ++out.gradients;
    }
    out.reports = state.reports();
    return out;
}

TraceVerification verify_trace(const MorseField& mf, const RunTrace& t, const TraceConfig& tcfg) {
    TraceVerification v;
    MapState state(mf.field, mf.topology, tcfg);
    const bool topo = t.cfg.kind == StrategyKind::TopologyGuided;
    char buf[160];
    auto fail = [&](int k, const char* what) {
        std::snprintf(buf, sizeof buf, "k=%d: %s", k, what);
        v.failures.emplace_back(buf);
    };
    // Distance from p to the domain boundary or the nearest mapped polyline of kind `on`.
    auto anchor_distance = [&](Point p, PolyKind on, bool boundary) {
        double d = boundary ? std::min({p.x, p.y, 1 - p.x, 1 - p.y}) : INFINITY;
        for (const auto& pl : state.polylines())
            if (pl.kind == on) d = std::min(d, distance_to_polyline(pl, p));
        return d;
    };
    for (const auto& p : t.programs) {
        if (p.k != state.steps() + 1) {
            fail(p.k, "program index out of sequence");
            break;
        }
        if (p.kind == PolyKind::Isoline && anchor_distance(p.origin, PolyKind::Gradient, false) > 1e-9)
            fail(p.k, "isoline origin is not on a mapped gradient");
        if (topo && p.kind == PolyKind::Gradient && anchor_distance(p.origin, PolyKind::Isoline, true) > 1e-9)
            fail(p.k, "gradient origin is neither on the boundary nor on a mapped isoline");
        StepOutcome o;
        try {
            o = p.kind == PolyKind::Isoline ? state.map_isoline(p.origin) : state.map_gradient(p.origin);
        } catch (const TracingError&) {
            fail(p.k, "program does not trace");
            break;
        }
        const auto& reps = state.reports();
        const EntropyReport& cur = reps.back();
        if (cur.H_cond > reps[reps.size() - 2].H_cond + 1e-9) fail(p.k, "H(M|V_k) increased");
        if (!topo) continue;
        if (p.kind == PolyKind::Gradient && cur.R_k > 1e-12) fail(p.k, "gradient step with R_k > 0");
        if (p.kind == PolyKind::Isoline && p.mode == StepMode::Exploit) {
            const auto& sp = o.split;
            if (!sp.split || sp.chi_before > -1) fail(p.k, "exploit isoline did not split a chi <= -1 cell");
            else if (sp.chi_lower + sp.chi_upper != sp.chi_before) fail(p.k, "chi not additive over the split");
            if (!(cur.R_k > 0)) fail(p.k, "exploit isoline with R_k <= 0");
        }
    }
    v.reports = state.reports();
    v.h_topology = state.h_topology();
    return v;
}

std::string to_string(StrategyKind k) { return k == StrategyKind::TopologyGuided ? "topo" : "nscan"; }

std::string to_string(StepMode m) {
    switch (m) {
        case StepMode::Explore: return "explore";
        case StepMode::Exploit: return "exploit";
        case StepMode::Extension: return "extension";
        case StepMode::Scan: return "scan";
    }
    return "";
}

StrategyKind strategy_kind_from_string(const std::string& s) {
    if (s == "topo") return StrategyKind::TopologyGuided;
    if (s == "nscan") return StrategyKind::NScan;
    throw ParameterError("unknown strategy: " + s);
}

StepMode step_mode_from_string(const std::string& s) {
    for (auto m : {StepMode::Explore, StepMode::Exploit, StepMode::Extension, StepMode::Scan})
        if (to_string(m) == s) return m;
    throw ParameterError("unknown step mode: " + s);
}

std::string trace_to_jsonl(const RunTrace& t) {
    std::ostringstream os;
    nlohmann::json header = {{"type", "header"},
                             {"strategy", to_string(t.cfg.kind)},
                             {"T", t.cfg.T},
                             {"n", t.cfg.n},
                             {"budget", t.cfg.budget},
                             {"seed", t.cfg.seed},
                             {"field", {{"n", t.field_n}, {"d", t.field_d}, {"seed", t.field_seed}}}};
    if (!t.error.empty()) header["error"] = t.error;
    os << header.dump() << '\n';
    for (const auto& p : t.programs) {
        char dig[17];
        std::snprintf(dig, sizeof dig, "%016llx", static_cast<unsigned long long>(p.rng_digest));
        os << nlohmann::json{{"k", p.k},
                             {"kind", p.kind == PolyKind::Isoline ? "isoline" : "gradient"},
                             {"origin", {p.origin.x, p.origin.y}},
                             {"mode", to_string(p.mode)},
                             {"rng", dig}}
                  .dump()
           << '\n';
    }
    return os.str();
}

RunTrace trace_from_jsonl(const std::string& text) {
    RunTrace t;
    std::istringstream is(text);
    std::string line;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        if (!header) {
            if (j.value("type", "") != "header") throw ParameterError("trace does not start with a header");
            t.cfg.kind = strategy_kind_from_string(j.at("strategy").get<std::string>());
            t.cfg.T = j.at("T").get<double>();
            t.cfg.n = j.at("n").get<int>();
            t.cfg.budget = j.at("budget").get<int>();
            t.cfg.seed = j.at("seed").get<std::uint64_t>();
            t.field_n = j.at("field").at("n").get<int>();
            t.field_d = j.at("field").at("d").get<double>();
            t.field_seed = j.at("field").at("seed").get<std::uint64_t>();
            t.error = j.value("error", "");
            header = true;
            continue;
        }
        Program p;
        p.k = j.at("k").get<int>();
        const auto kind = j.at("kind").get<std::string>();
        if (kind != "isoline" && kind != "gradient") throw ParameterError("unknown program kind: " + kind);
        p.kind = kind == "isoline" ? PolyKind::Isoline : PolyKind::Gradient;
        p.origin = {j.at("origin").at(0).get<double>(), j.at("origin").at(1).get<double>()};
        p.mode = step_mode_from_string(j.at("mode").get<std::string>());
        p.rng_digest = std::stoull(j.at("rng").get<std::string>(), nullptr, 16);
        t.programs.push_back(p);
    }
    if (!header) throw ParameterError("empty trace");
    return t;
}

std::string reports_csv(const std::vector<EntropyReport>& reports, double h_topology) {
    std::string out = "k,H_data,H_cond,H_bar,R_k,log2_cells,info\n";
    char buf[256];
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.k, r.H_data, r.H_cond, r.H_bar, r.R_k,
                      r.log2_cells, h_topology - r.H_cond);
        out += buf;
    }
    return out;
}

}  // namespace recon

#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "recon/errors.hpp"
#include "recon/game.hpp"
#include "recon/strategy.hpp"

using namespace recon;

namespace {

double boundary_distance(Point p) { return std::min({p.x, p.y, 1 - p.x, 1 - p.y}); }

}  // namespace

TEST_CASE("exploit rule") {
    CHECK(exploit_rule(4, 0.6, 0.5));
    CHECK_FALSE(exploit_rule(4, 0.4, 0.5));
    CHECK(exploit_rule(4, -0.3, 0.5));
    CHECK(exploit_rule(4, 0.0, 0.5));
    CHECK_FALSE(exploit_rule(4, 0.5, 0.5));  // equality explores
    // T = 0: threshold 1.
    CHECK_FALSE(exploit_rule(7, 0.9, 0.0));
    CHECK(exploit_rule(7, 1.1, 0.0));
}

TEST_CASE("config validation") {
    StrategyConfig c;
    c.T = -1;
    CHECK_THROWS_AS(validate(c), ParameterError);
    c = {};
    c.n = 0;
    CHECK_THROWS_AS(validate(c), ParameterError);
    c = {};
    c.budget = 0;
    CHECK_THROWS_AS(validate(c), ParameterError);
    CHECK_THROWS_AS(strategy_kind_from_string("greedy"), ParameterError);
}

TEST_CASE("isoline origin halves the longest segment") {
    const auto f = test::two_bumps();
    MapState state(f, topology_partition(f));
    CHECK_FALSE(choose_iso_origin(state).has_value());

    // One gradient per bump, from below each.
    const auto a = state.map_gradient({0.72, 0.15});
    const auto b = state.map_gradient({0.3, 0.15});
    REQUIRE(a.new_extrema.size() == 1);
    REQUIRE(b.new_extrema.size() == 1);
    REQUIRE(state.partition().cells()[0].chi == -1);

    // Both paths run from the boundary (f = 0) to a maximum inside the one
    // cell, so the ranges are the peak heights; the higher bump wins.
    const auto& nodes = state.topology().tree->nodes();
    const double peak_a = nodes[static_cast<std::size_t>(a.new_extrema[0])].value;
    const double peak_b = nodes[static_cast<std::size_t>(b.new_extrema[0])].value;
    REQUIRE(peak_b > peak_a);
    const auto c = choose_iso_origin(state);
    REQUIRE(c.has_value());
    CHECK(c->gradient == 1);
    CHECK(c->cell == 0);
    CHECK(c->lo == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(c->hi == doctest::Approx(peak_b).epsilon(1e-12));
    CHECK(eval(f, c->point) == doctest::Approx(0.5 * peak_b).epsilon(1e-9));
    CHECK(distance_to_polyline(state.polylines()[1], c->point) < 1e-9);
}

TEST_CASE("isoline origin ties go to the lower gradient id") {
    const auto f = test::two_bumps();
    MapState state(f, topology_partition(f));
    state.map_gradient({0.72, 0.15});
    state.map_gradient({0.3, 0.15});
    state.map_gradient({0.3, 0.15});  // same path again
    const auto c = choose_iso_origin(state);
    REQUIRE(c.has_value());
    CHECK(c->gradient == 1);
}

TEST_CASE("scan origins split the traced range uniformly") {
    const auto f = test::from_fn(65, [](double x, double) { return 0.9 * x; });
    const auto g = trace_gradient(f, {0.4, 0.5});
    const auto o = scan_origins(f, g, 3);
    REQUIRE(o.size() == 3);
    CHECK(eval(f, o[0]) == doctest::Approx(0.225).epsilon(1e-9));
    CHECK(eval(f, o[1]) == doctest::Approx(0.45).epsilon(1e-9));
    CHECK(eval(f, o[2]) == doctest::Approx(0.675).epsilon(1e-9));
}

TEST_CASE("n-scan with n = 1 alternates and truncates at the budget") {
    const auto mf = make_morse_field(96, 0.25, 12);
    StrategyConfig cfg;
    cfg.kind = StrategyKind::NScan;
    cfg.n = 1;
    cfg.budget = 11;
    const auto t = run_strategy(mf, cfg);
    REQUIRE(t.programs.size() == 11);
    for (std::size_t k = 0; k < t.programs.size(); ++k)
        CHECK(t.programs[k].kind == (k % 2 ? PolyKind::Isoline : PolyKind::Gradient));

    cfg.n = 5;
    cfg.budget = 9;
    const auto u = run_strategy(mf, cfg);
    CHECK(u.programs.size() == 9);
    CHECK(u.programs.back().kind == PolyKind::Isoline);
    CHECK(verify_trace(mf, u).ok());
}

TEST_CASE("topology-guided runs follow the protocol") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto mf = make_morse_field(96, 0.25, 40 + seed);
        StrategyConfig cfg;
        cfg.budget = 60;
        cfg.seed = seed;
        cfg.T = 0.5;
        const auto t = run_strategy(mf, cfg);
        REQUIRE(t.error.empty());
        REQUIRE(t.programs.size() == 60);
        CHECK(t.programs[0].kind == PolyKind::Gradient);
        CHECK(boundary_distance(t.programs[0].origin) == 0.0);

        MapState state(mf.field, mf.topology);
        for (const auto& p : t.programs) {
            if (p.kind == PolyKind::Isoline) {
                double d = 1;
                for (const auto& pl : state.polylines())
                    if (pl.kind == PolyKind::Gradient) d = std::min(d, distance_to_polyline(pl, p.origin));
                CHECK(d < 1e-9);
                const auto& part = state.partition();
                const int cell = cell_at(state, p.origin);
                CHECK(part.cell(cell).chi <= -1);
                state.map_isoline(p.origin);
            } else {
                double d = boundary_distance(p.origin);
                for (const auto& pl : state.polylines())
                    if (pl.kind == PolyKind::Isoline) d = std::min(d, distance_to_polyline(pl, p.origin));
                CHECK(d < 1e-9);
                state.map_gradient(p.origin);
            }
        }
        for (std::size_t k = 1; k < t.reports.size(); ++k) CHECK(t.reports[k].H_cond <= t.reports[k - 1].H_cond + 1e-9);
    }
}

TEST_CASE("runs are deterministic and round-trip through JSON lines") {
    const auto mf = make_morse_field(96, 0.25, 77);
    for (auto kind : {StrategyKind::TopologyGuided, StrategyKind::NScan}) {
        StrategyConfig cfg;
        cfg.kind = kind;
        cfg.budget = 40;
        cfg.seed = 9;
        const auto a = run_strategy(mf, cfg);
        const auto b = run_strategy(mf, cfg);
        const auto text = trace_to_jsonl(a);
        CHECK(text == trace_to_jsonl(b));
        CHECK(reports_csv(a.reports, a.h_topology) == reports_csv(b.reports, b.h_topology));

        const auto back = trace_from_jsonl(text);
        CHECK(trace_to_jsonl(back) == text);
        REQUIRE(back.programs.size() == a.programs.size());
        for (std::size_t k = 0; k < a.programs.size(); ++k) {
            CHECK(back.programs[k].origin.x == a.programs[k].origin.x);
            CHECK(back.programs[k].origin.y == a.programs[k].origin.y);
        }
        const auto v = verify_trace(mf, back);
        CHECK(v.ok());
        REQUIRE(v.reports.size() == a.reports.size());
        CHECK(reports_csv(v.reports, v.h_topology) == reports_csv(a.reports, a.h_topology));
    }
    CHECK_THROWS_AS(trace_from_jsonl(""), ParameterError);
    CHECK_THROWS_AS(trace_from_jsonl("{\"k\":1}\n"), ParameterError);
}

TEST_CASE("verification rejects tampered traces") {
    const auto mf = make_morse_field(96, 0.25, 78);
    StrategyConfig cfg;
    cfg.budget = 40;
    const auto t = run_strategy(mf, cfg);
    REQUIRE(verify_trace(mf, t).ok());

    auto reordered = t;
    std::swap(reordered.programs[3], reordered.programs[4]);
    CHECK_FALSE(verify_trace(mf, reordered).ok());

    // An exploit isoline moved onto the domain boundary splits nothing.
    auto moved = t;
    int exploit = -1;
    for (std::size_t k = 0; k < moved.programs.size() && exploit < 0; ++k)
        if (moved.programs[k].mode == StepMode::Exploit) exploit = static_cast<int>(k);
    REQUIRE(exploit >= 0);
    moved.programs[static_cast<std::size_t>(exploit)].origin = moved.programs[0].origin;
    CHECK_FALSE(verify_trace(mf, moved).ok());

    auto inner = t;
    inner.programs[1].origin = {0.4, 0.4};
    const auto vi = verify_trace(mf, inner);
    REQUIRE_FALSE(vi.ok());
    CHECK(vi.failures[0].find("gradient origin") != std::string::npos);

    auto off = t;
    const auto iso = static_cast<std::size_t>(exploit);
    off.programs[iso].origin.x += 0.01;
    const auto vo = verify_trace(mf, off);
    REQUIRE_FALSE(vo.ok());
    CHECK(vo.failures[0].find("isoline origin") != std::string::npos);
}

TEST_CASE("exploitation with known extrema drives H_bar down") {
    const auto f = test::three_bumps();
    const MorseField mf{f, topology_partition(f)};
    const auto r = exploit_known_extrema(mf, 0.05, 400, 1);
    CHECK(r.final_h_bar() < 0.05);
    CHECK(r.isolines > 0);
    for (std::size_t k = 1; k < r.reports.size(); ++k) CHECK(r.reports[k].H_cond <= r.reports[k - 1].H_cond + 1e-9);

    const auto one = test::bumps(65, {{0.5, 0.5, 0.15, 1.0}});
    const auto r1 = exploit_known_extrema(MorseField{one, topology_partition(one)}, 0.05, 400, 1);
    CHECK(r1.isolines == 0);
    CHECK(r1.final_h_bar() == 0.0);

    const auto r0 = exploit_known_extrema(mf, 0.05, 0, 1);
    CHECK(r0.isolines == 0);
    CHECK_THROWS_AS(exploit_known_extrema(mf, 0.05, -1, 1), ParameterError);
}

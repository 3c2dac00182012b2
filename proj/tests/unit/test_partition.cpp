#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "recon/errors.hpp"
#include "recon/mapping.hpp"
#include "recon/partition.hpp"
#include "recon/rng.hpp"
#include "recon/strategy.hpp"

using namespace recon;
using recon::test::nodes_of_kind;

namespace {

double total_measure(const DataPartition& p) {
    double s = 0;
    for (const auto& c : p.cells()) s += c.measure;
    return s;
}

// Arc whose two ends are both saddles.
int saddle_saddle_arc(const ContourTree& tree) {
    for (std::size_t a = 0; a < tree.arcs().size(); ++a) {
        const auto& arc = tree.arcs()[a];
        if (tree.nodes()[static_cast<std::size_t>(arc.lo)].kind == NodeKind::Saddle &&
            tree.nodes()[static_cast<std::size_t>(arc.hi)].kind == NodeKind::Saddle)
            return static_cast<int>(a);
    }
    return -1;
}

int parent_arc_of(const ContourTree& tree, int node) {
    for (int a : tree.nodes()[static_cast<std::size_t>(node)].arcs)
        if (tree.arcs()[static_cast<std::size_t>(a)].hi == node) return a;
    return -1;
}

}  // namespace

TEST_CASE("initial partition is the whole domain") {
    const auto tp = topology_partition(test::two_bumps());
    const DataPartition p(tp.tree);
    REQUIRE(p.cells().size() == 1);
    CHECK(p.cells()[0].chi == 1);
    CHECK(p.cells()[0].measure == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(p.eligible_cells().empty());
    CHECK(p.cell_lower_bound(0) == 1);
}

TEST_CASE("discovering extrema punctures the cell") {
    const auto tp = topology_partition(test::two_bumps());
    DataPartition p(tp.tree);
    const auto maxima = nodes_of_kind(*tp.tree, NodeKind::Max);
    REQUIRE(maxima.size() == 2);

    CHECK(p.insert_extremum(maxima[0]));
    CHECK(p.cells()[0].chi == 0);
    CHECK(p.cell_lower_bound(0) == 1);
    CHECK(p.eligible_cells().empty());

    CHECK(p.insert_extremum(maxima[1]));
    CHECK(p.cells()[0].chi == -1);
    CHECK(p.cell_lower_bound(0) == 3);
    CHECK(p.eligible_cells() == std::vector<int>{0});

    const auto before = p.snapshot();
    CHECK_FALSE(p.insert_extremum(maxima[1]));
    CHECK(p.snapshot() == before);
    CHECK(p.discovered_count() == 2);

    const auto saddles = nodes_of_kind(*tp.tree, NodeKind::Saddle);
    CHECK_THROWS_AS(p.insert_extremum(saddles.at(0)), ParameterError);
}

TEST_CASE("closed loop around a discovered maximum") {
    const auto tp = topology_partition(test::bumps(129, {{0.5, 0.5, 0.15, 1.0}}));
    REQUIRE(tp.tree->arcs().size() == 1);
    DataPartition p(tp.tree);
    p.insert_extremum(nodes_of_kind(*tp.tree, NodeKind::Max).at(0));
    const auto& arc = tp.tree->arcs()[0];
    const auto s = p.insert_isoline({0, 0.5 * (arc.lo_value + arc.hi_value)});
    REQUIRE(s.split);
    CHECK(p.cells().size() == 2);
    CHECK(s.chi_lower == 0);
    CHECK(s.chi_upper == 0);
    CHECK(s.measure_lower + s.measure_upper == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(s.measure_lower > 0);
    CHECK(s.measure_upper > 0);

    // Mapping the same contour again changes nothing.
    const auto again = p.insert_isoline({0, 0.5 * (arc.lo_value + arc.hi_value)});
    CHECK_FALSE(again.split);
    CHECK(p.cells().size() == 2);

    CHECK_THROWS_AS(p.insert_isoline({0, arc.hi_value + 1.0}), ConsistencyError);
}

TEST_CASE("closed loop around an undiscovered maximum keeps chi 1 inside") {
    const auto tp = topology_partition(test::bumps(129, {{0.5, 0.5, 0.15, 1.0}}));
    DataPartition p(tp.tree);
    const auto& arc = tp.tree->arcs()[0];
    const auto s = p.insert_isoline({0, 0.5 * (arc.lo_value + arc.hi_value)});
    CHECK(s.chi_upper == 1);
    CHECK(s.chi_lower == 0);
}

TEST_CASE("cut between two saddles splits chi -2 into -1 and -1") {
    const auto tp = topology_partition(test::three_bumps());
    const auto& tree = *tp.tree;
    REQUIRE(nodes_of_kind(tree, NodeKind::Max).size() == 3);
    const int a = saddle_saddle_arc(tree);
    REQUIRE(a >= 0);

    DataPartition p(tp.tree);
    std::vector<int> lb;
    lb.push_back(p.cell_lower_bound(0));
    for (int m : nodes_of_kind(tree, NodeKind::Max)) {
        p.insert_extremum(m);
        lb.push_back(p.cell_lower_bound(0));
    }
    CHECK(p.cells()[0].chi == -2);
    CHECK(lb == std::vector<int>{1, 1, 3, 5});

    const auto& arc = tree.arcs()[static_cast<std::size_t>(a)];
    const auto s = p.insert_isoline({a, 0.5 * (arc.lo_value + arc.hi_value)});
    REQUIRE(s.split);
    CHECK(s.chi_before == -2);
    CHECK(s.chi_lower == -1);
    CHECK(s.chi_upper == -1);
    CHECK(p.eligible_cells() == std::vector<int>{0, 1});
    CHECK(p.cut_sides({a, 0.5 * (arc.lo_value + arc.hi_value)}) == std::pair<int, int>{0, 1});
}

TEST_CASE("cut below a discovered maximum isolates it") {
    const auto tp = topology_partition(test::two_bumps());
    const auto& tree = *tp.tree;
    DataPartition p(tp.tree);
    const auto maxima = nodes_of_kind(tree, NodeKind::Max);
    for (int m : maxima) p.insert_extremum(m);
    const int a = parent_arc_of(tree, maxima[0]);
    REQUIRE(a >= 0);
    const auto& arc = tree.arcs()[static_cast<std::size_t>(a)];
    const auto s = p.insert_isoline({a, arc.lo_value + 0.25 * (arc.hi_value - arc.lo_value)});
    REQUIRE(s.split);
    CHECK(s.chi_lower + s.chi_upper == s.chi_before);
    CHECK(s.chi_upper == 0);
    CHECK(s.chi_lower == -1);
    CHECK(p.cell_of_node(maxima[0]) == s.upper);
    CHECK(p.cell_of_node(maxima[1]) == s.parent);
}

TEST_CASE("random cuts refine the partition and conserve measure") {
    const auto mf = make_morse_field(128, 0.25, 21);
    const auto& tree = *mf.topology.tree;
    DataPartition p(mf.topology.tree);
    Rng rng(5);
    for (int t = 0; t < 60; ++t) {
        const int a = static_cast<int>(rng.below(tree.arcs().size()));
        const auto& arc = tree.arcs()[static_cast<std::size_t>(a)];
        const double level = rng.uniform(arc.lo_value, arc.hi_value);
        const auto before = p.cells().size();
        // Every old cell is a union of new cells: record node membership.
        std::vector<int> old_of_node;
        for (std::size_t k = 0; k < tree.nodes().size(); ++k) old_of_node.push_back(p.cell_of_node(static_cast<int>(k)));
        const auto s = p.insert_isoline({a, level});
        if (!s.split) continue;
        CHECK(p.cells().size() == before + 1);
        CHECK(s.chi_lower + s.chi_upper == s.chi_before);
        CHECK(total_measure(p) == doctest::Approx(1.0).epsilon(1e-9));
        for (std::size_t k = 0; k < tree.nodes().size(); ++k) {
            const int now = p.cell_of_node(static_cast<int>(k));
            const int root = now == s.upper ? s.parent : now;
            CHECK(root == old_of_node[k]);
        }
    }
    CHECK(p.cells().size() > 40);
}

TEST_CASE("pixel labels agree with cell measures") {
    const auto mf = make_morse_field(128, 0.25, 22);
    const auto& tree = *mf.topology.tree;
    DataPartition p(mf.topology.tree);
    Rng rng(6);
    for (int t = 0; t < 12; ++t) {
        const int a = static_cast<int>(rng.below(tree.arcs().size()));
        const auto& arc = tree.arcs()[static_cast<std::size_t>(a)];
        p.insert_isoline({a, rng.uniform(arc.lo_value, arc.hi_value)});
    }
    const auto labels = p.pixel_cells(mf.field);
    std::vector<double> counted(p.cells().size(), 0.0);
    for (int l : labels)
        if (l >= 0) counted[static_cast<std::size_t>(l)] += 1.0;
    for (auto& c : counted) c /= static_cast<double>(labels.size());
    for (const auto& c : p.cells()) CHECK(std::abs(counted[static_cast<std::size_t>(c.id)] - c.measure) < 0.02);
}

TEST_CASE("cells hold at least |1 - 2 chi| topology cells on strategy runs") {
    int checked = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto mf = make_morse_field(96, 0.25, 300 + seed);
        StrategyConfig cfg;
        cfg.budget = 40;
        cfg.seed = seed;
        cfg.T = seed % 2 ? 0.5 : 2.0;
        const auto run = run_strategy(mf, cfg);
        const auto state = replay_programs(mf, run.programs);
        const auto& part = state.partition();
        const auto joint = part.joint_measure();
        for (const auto& c : part.cells()) {
            int arcs = 0;
            for (const auto& row : joint)
                if (row[static_cast<std::size_t>(c.id)] > 0) ++arcs;
            CHECK(arcs >= part.cell_lower_bound(c.id));
            ++checked;
        }
    }
    CHECK(checked > 100);
}

TEST_CASE("gradient paths map to monotone tree paths") {
    const auto f = test::two_bumps();
    const auto tp = topology_partition(f);
    const auto g = trace_gradient(f, {0.3, 0.2});
    const auto path = gradient_tree_path(*tp.tree, g);
    REQUIRE(path.has_value());
    REQUIRE_FALSE(path->empty());
    const auto& arcs = tp.tree->arcs();
    CHECK(arcs[static_cast<std::size_t>(path->front())].lo == tp.tree->boundary_node());
    for (std::size_t k = 1; k < path->size(); ++k)
        CHECK(arcs[static_cast<std::size_t>((*path)[k])].lo == arcs[static_cast<std::size_t>((*path)[k - 1])].hi);
    CHECK(tp.tree->nodes()[static_cast<std::size_t>(arcs[static_cast<std::size_t>(path->back())].hi)].kind == NodeKind::Max);
}

TEST_CASE("isoline position agrees with the point lookup") {
    const auto mf = make_morse_field(128, 0.25, 9);
    Rng rng(8);
    int agreed = 0;
    for (int t = 0; t < 40; ++t) {
        const Point o{rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)};
        Polyline iso;
        try {
            iso = trace_isoline(mf.field, o);
        } catch (const TracingError&) {
            continue;
        }
        const auto a = locate_isoline(*mf.topology.tree, iso);
        const auto b = locate_point(*mf.topology.tree, mf.field, o);
        if (!a.valid() || !b.valid()) continue;
        CHECK(a.arc == b.arc);
        ++agreed;
    }
    CHECK(agreed >= 30);
}

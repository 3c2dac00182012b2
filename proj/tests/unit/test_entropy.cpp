#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>

#include "fixtures.hpp"
#include "recon/entropy.hpp"
#include "recon/errors.hpp"
#include "recon/mapping.hpp"
#include "recon/rng.hpp"
#include "recon/strategy.hpp"

using namespace recon;
using recon::test::nodes_of_kind;

namespace {

constexpr int kGrid = 64;

// Labels on a kGrid x kGrid pixel grid.
LabelPartition labels(const std::function<int(int, int)>& fn) {
    LabelPartition p;
    p.label.resize(kGrid * kGrid);
    for (int j = 0; j < kGrid; ++j)
        for (int i = 0; i < kGrid; ++i) p.label[static_cast<std::size_t>(j * kGrid + i)] = fn(i, j);
    return p;
}

// Random block partition: blocks of `b` pixels, each given one of `k` labels.
LabelPartition random_blocks(Rng& rng, int b, int k) {
    const int nb = kGrid / b;
    std::vector<int> block(static_cast<std::size_t>(nb * nb));
    for (auto& v : block) v = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    return labels([&](int i, int j) { return block[static_cast<std::size_t>((j / b) * nb + i / b)]; });
}

// Common refinement of a by a finer block partition.
LabelPartition refine(const LabelPartition& a, Rng& rng, int b) {
    const auto extra = random_blocks(rng, b, 3);
    LabelPartition out = a;
    for (std::size_t k = 0; k < out.label.size(); ++k) out.label[k] = a.label[k] * 3 + extra.label[k];
    return out;
}

// Entropies straight from pixel counts, for comparison.
double h_oracle(const LabelPartition& a) {
    std::map<int, double> count;
    for (int l : a.label) count[l] += 1;
    double h = 0;
    for (const auto& [l, c] : count) {
        const double p = c / a.label.size();
        h -= p * std::log2(p);
    }
    return h;
}

double hcond_oracle(const LabelPartition& a, const LabelPartition& b) {
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> mb;
    for (std::size_t k = 0; k < a.label.size(); ++k) {
        joint[{a.label[k], b.label[k]}] += 1;
        mb[b.label[k]] += 1;
    }
    double h = 0;
    for (const auto& [ab, c] : joint) h -= c / a.label.size() * std::log2(c / mb[ab.second]);
    return h;
}

}  // namespace

TEST_CASE("partition entropy of simple measures") {
    CHECK(partition_entropy(std::vector<double>{1.0}) == 0.0);
    CHECK(partition_entropy(std::vector<double>{0.5, 0.5}) == doctest::Approx(1.0));
    CHECK(partition_entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}) == doctest::Approx(2.0));
    // Renormalized.
    CHECK(partition_entropy(std::vector<double>{0.2, 0.2}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(partition_entropy(std::vector<double>{}), ParameterError);
    CHECK_THROWS_AS(partition_entropy(std::vector<double>{0.0, 0.0}), ParameterError);
}

TEST_CASE("conditional entropy of label partitions") {
    const auto whole = labels([](int, int) { return 0; });
    const auto lr = labels([](int i, int) { return i < kGrid / 2; });
    const auto tb = labels([](int, int j) { return j < kGrid / 2; });
    const auto quad = labels([](int i, int j) { return 2 * (i < kGrid / 2) + (j < kGrid / 2); });

    CHECK(conditional_entropy(lr, tb) == doctest::Approx(1.0));
    CHECK(conditional_entropy(lr, quad) == doctest::Approx(0.0));
    CHECK(conditional_entropy(lr, lr) == doctest::Approx(0.0));
    CHECK(conditional_entropy(quad, lr) == doctest::Approx(1.0));
    CHECK(partition_entropy(quad) == doctest::Approx(2.0));
    // Refining the conditioning partition need not reduce H(a|b).
    CHECK(conditional_entropy(whole, whole) == 0.0);
    CHECK(conditional_entropy(whole, lr) == 0.0);

    auto partial = lr;
    for (int k = 0; k < kGrid * 4; ++k) partial.label[static_cast<std::size_t>(k)] = -1;
    CHECK_THROWS_AS(conditional_entropy(partial, tb), ConsistencyError);
    CHECK_THROWS_AS(conditional_entropy(lr, LabelPartition{{0, 1}}), ParameterError);
}

TEST_CASE("joint-table conditional entropy matches pixel counts") {
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        const auto a = random_blocks(rng, 8, 4);
        const auto b = random_blocks(rng, 4, 5);
        CHECK(conditional_entropy(a, b) == doctest::Approx(hcond_oracle(a, b)).epsilon(1e-12));
        CHECK(partition_entropy(a) == doctest::Approx(h_oracle(a)).epsilon(1e-12));
        std::vector<std::vector<double>> joint(4, std::vector<double>(5, 0.0));
        for (std::size_t k = 0; k < a.label.size(); ++k)
            joint[static_cast<std::size_t>(a.label[k])][static_cast<std::size_t>(b.label[k])] += 1.0 / a.label.size();
        CHECK(conditional_entropy(joint) == doctest::Approx(hcond_oracle(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("conditional entropy bounds and refinement on random partitions") {
    Rng rng(17);
    for (int t = 0; t < 50; ++t) {
        const auto alpha = random_blocks(rng, 16, 3);
        const auto beta = refine(alpha, rng, 8);  // refines alpha
        const auto gamma = refine(beta, rng, 4);  // refines beta
        const auto other = random_blocks(rng, 8, 4);

        const double h = conditional_entropy(alpha, other);
        CHECK(h >= -1e-12);
        CHECK(h <= partition_entropy(alpha) + 1e-12);
        CHECK(conditional_entropy(alpha, beta) == doctest::Approx(0.0));
        CHECK(conditional_entropy(alpha, gamma) == doctest::Approx(0.0));

        // Refining the first argument adds entropy.
        CHECK(conditional_entropy(alpha, other) <= conditional_entropy(beta, other) + 1e-12);
        CHECK(partition_entropy(alpha) <= partition_entropy(beta) + 1e-12);
        // Refining the conditioning partition never adds any.
        CHECK(conditional_entropy(other, beta) >= conditional_entropy(other, gamma) - 1e-12);
        CHECK(conditional_entropy(other, alpha) >= conditional_entropy(other, beta) - 1e-12);
    }
    // Equality case: alpha = beta = {X}, gamma two halves.
    const auto whole = labels([](int, int) { return 0; });
    const auto halves = labels([](int i, int) { return i < kGrid / 2; });
    CHECK(conditional_entropy(whole, whole) == conditional_entropy(whole, halves));
}

TEST_CASE("H(M|V_0) equals H(M) and refinement drives it to zero") {
    const auto mf = make_morse_field(128, 0.25, 41);
    const auto& tree = *mf.topology.tree;
    DataPartition p(mf.topology.tree);
    const double hm = topology_entropy(tree);
    CHECK(hm > 0);
    CHECK(conditional_entropy_M_given_V(p) == doctest::Approx(hm).epsilon(1e-12));

    std::vector<double> measures;
    for (const auto& a : tree.arcs()) measures.push_back(a.measure);
    CHECK(hm == doctest::Approx(partition_entropy(measures)).epsilon(1e-12));

    // Cut every arc just above its lower and below its upper end: the
    // middle segments are cells of their own, leaving slivers around nodes.
    double prev = conditional_entropy_M_given_V(p);
    for (std::size_t a = 0; a < tree.arcs().size(); ++a) {
        const auto& arc = tree.arcs()[a];
        const double eps = 1e-4 * (arc.hi_value - arc.lo_value);
        p.insert_isoline({static_cast<int>(a), arc.lo_value + eps});
        p.insert_isoline({static_cast<int>(a), arc.hi_value - eps});
        const double h = conditional_entropy_M_given_V(p);
        CHECK(h <= prev + 1e-12);
        prev = h;
    }
    CHECK(prev < 0.02);
}

TEST_CASE("bound H_bar on constructed partitions") {
    const auto tp = topology_partition(test::two_bumps());
    DataPartition p(tp.tree);
    CHECK(h_bar(p) == 0.0);
    for (int m : nodes_of_kind(*tp.tree, NodeKind::Max)) p.insert_extremum(m);
    CHECK(h_bar(p) == doctest::Approx(std::log2(3.0)).epsilon(1e-9));

    // Two cells with chi (-1, 0): H_bar is the chi -1 cell's share of log2 3.
    DataPartition q(tp.tree);
    const auto maxima = nodes_of_kind(*tp.tree, NodeKind::Max);
    for (int m : maxima) q.insert_extremum(m);
    const int a = tp.tree->nodes()[static_cast<std::size_t>(maxima[0])].arcs.front();
    const auto& arc = tp.tree->arcs()[static_cast<std::size_t>(a)];
    q.insert_isoline({a, 0.5 * (arc.lo_value + arc.hi_value)});
    REQUIRE(q.cells().size() == 2);
    const auto& c = q.cells();
    const int neg = c[0].chi == -1 ? 0 : 1;
    CHECK(c[static_cast<std::size_t>(1 - neg)].chi == 0);
    CHECK(h_bar(q) == doctest::Approx(c[static_cast<std::size_t>(neg)].measure * std::log2(3.0)).epsilon(1e-12));
}

TEST_CASE("entropy of one-dimensional functions") {
    for (int m : {1, 2, 4, 8, 16})
        CHECK(function_entropy_1d([](double x) { return x; }, m) == doctest::Approx(std::log2(m)).epsilon(1e-6));

    // x^2, m = 2: preimages [0, sqrt(1/2)) and [sqrt(1/2), 1].
    const double p = std::sqrt(0.5);
    const double f2 = -(p * std::log2(p) + (1 - p) * std::log2(1 - p));
    CHECK(f2 == doctest::Approx(0.8724).epsilon(1e-4));
    CHECK(function_entropy_1d([](double x) { return x * x; }, 2) == doctest::Approx(f2).epsilon(1e-6));

    // sin^2(2 pi x), m = 2: the level 1/2 is crossed at odd multiples of
    // 1/8, giving components of measure 1/8, 1/4, 1/4, 1/4, 1/8.
    const double f3 = 2 * (0.125 * 3) + 3 * (0.25 * 2);
    CHECK(f3 == 2.25);
    CHECK(function_entropy_1d([](double x) { return std::pow(std::sin(2 * M_PI * x), 2); }, 2) ==
          doctest::Approx(f3).epsilon(1e-6));
    CHECK_THROWS_AS(function_entropy_1d([](double x) { return x; }, 0), ParameterError);
}

TEST_CASE("function entropy bound on a single bump") {
    const auto tp = topology_partition(test::bumps(129, {{0.5, 0.5, 0.15, 1.0}}));
    const auto g1024 = entropy_bound_gap(*tp.tree, 1024);
    const auto g2048 = entropy_bound_gap(*tp.tree, 2048);
    CHECK(g1024.rhs == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(g1024.lhs <= g1024.rhs + 0.05);
    CHECK(g1024.lhs >= g2048.lhs - 0.05);
}

TEST_CASE("function entropy bound on random fields") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto mf = make_morse_field(96, s % 2 ? 0.5 : 0.25, 70 + s);
        const auto g = entropy_bound_gap(*mf.topology.tree, 1024);
        CHECK(g.lhs <= g.rhs + 0.1);
    }
}

TEST_CASE("consumption rate follows the step kind") {
    int iso = 0, punctured = 0, nothing = 0;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const auto mf = make_morse_field(96, 0.25, 500 + seed);
        StrategyConfig cfg;
        cfg.budget = 40;
        cfg.seed = seed;
        const auto run = run_strategy(mf, cfg);
        REQUIRE(run.error.empty());
        MapState state(mf.field, mf.topology);
        const auto& nodes = mf.topology.tree->nodes();
        for (const auto& prog : run.programs) {
            const auto& part = state.partition();
            std::vector<int> chi_before(nodes.size());
            for (std::size_t n = 0; n < nodes.size(); ++n) chi_before[n] = part.cell(part.cell_of_node(static_cast<int>(n))).chi;
            const double hc_before = state.reports().back().H_cond;

            const auto o = prog.kind == PolyKind::Isoline ? state.map_isoline(prog.origin) : state.map_gradient(prog.origin);
            const auto& rep = state.reports().back();
            CHECK(rep.H_cond <= hc_before + 1e-9);
            if (o.kind == PolyKind::Isoline) {
                if (o.split.split && o.split.chi_before <= -1 && o.split.measure_lower > 0 && o.split.measure_upper > 0) {
                    CHECK(rep.R_k > 0);
                    CHECK(rep.H_cond < hc_before);
                    ++iso;
                }
                continue;
            }
            CHECK(rep.R_k <= 0.0);
            bool hole = false;
            for (int n : o.new_extrema) hole = hole || chi_before[static_cast<std::size_t>(n)] <= 0;
            if (hole) {
                // A new hole in a cell that already had chi <= 0.
                CHECK(rep.R_k < 0);
                ++punctured;
            } else if (o.new_extrema.empty()) {
                CHECK(rep.R_k == 0.0);
                ++nothing;
            }
        }
    }
    CHECK(iso > 0);
    CHECK(punctured > 0);
    CHECK(nothing > 0);
}

TEST_CASE("cells with chi 0 and all extrema found meet a single topology cell") {
    int checked = 0;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const auto mf = make_morse_field(96, 0.25, 600 + seed);
        StrategyConfig cfg;
        cfg.budget = 80;
        cfg.seed = seed;
        const auto run = run_strategy(mf, cfg);
        const auto state = replay_programs(mf, run.programs);
        const auto& part = state.partition();
        const auto& nodes = mf.topology.tree->nodes();
        std::vector<char> complete(part.cells().size(), 1);
        for (std::size_t n = 0; n < nodes.size(); ++n)
            if ((nodes[n].kind == NodeKind::Min || nodes[n].kind == NodeKind::Max) && !part.discovered(static_cast<int>(n)))
                complete[static_cast<std::size_t>(part.cell_of_node(static_cast<int>(n)))] = 0;
        const auto joint = part.joint_measure();
        for (const auto& c : part.cells()) {
            if (c.chi != 0 || !complete[static_cast<std::size_t>(c.id)]) continue;
            int arcs = 0;
            for (const auto& row : joint)
                if (row[static_cast<std::size_t>(c.id)] > 0) ++arcs;
            CHECK(arcs == 1);
            ++checked;
        }
    }
    CHECK(checked > 10);
}

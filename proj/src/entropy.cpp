#include "recon/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "recon/errors.hpp"

namespace recon {

double partition_entropy(const std::vector<double>& measures) {
    if (measures.empty()) throw ParameterError("empty partition");
    const double total = std::accumulate(measures.begin(), measures.end(), 0.0);
    if (!(total > 0)) throw ParameterError("partition has no measure");
    double h = 0.0;
    for (double m : measures)
        if (m > 0) {
            const double p = m / total;
            h -= p * std::log2(p);
        }
    return std::max(h, 0.0);
}

double conditional_entropy(const std::vector<std::vector<double>>& joint) {
    if (joint.empty()) throw ParameterError("empty partition");
    const std::size_t nb = joint.front().size();
    std::vector<double> col(nb, 0.0);
    double total = 0.0;
    for (const auto& row : joint)
        for (std::size_t b = 0; b < nb; ++b) {
            col[b] += row[b];
            total += row[b];
        }
    if (!(total > 0)) throw ParameterError("partition has no measure");
    double h = 0.0;
    for (const auto& row : joint)
        for (std::size_t b = 0; b < nb; ++b)
            if (row[b] > 0) h -= row[b] / total * std::log2(row[b] / col[b]);
    return std::max(h, 0.0);
}

double partition_entropy(const LabelPartition& p) {
    std::unordered_map<int, double> counts;
    for (int l : p.label)
        if (l >= 0) counts[l] += 1.0;
    std::vector<int> keys;
    for (const auto& [k, v] : counts) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    std::vector<double> m;
    for (int k : keys) m.push_back(counts[k]);
    return partition_entropy(m);
}

double conditional_entropy(const LabelPartition& a, const LabelPartition& b) {
    if (a.label.size() != b.label.size()) throw ParameterError("partitions over different grids");
    std::size_t ca = 0, cb = 0;
    for (std::size_t k = 0; k < a.label.size(); ++k) {
        ca += a.label[k] >= 0;
        cb += b.label[k] >= 0;
    }
    const double total = static_cast<double>(a.label.size());
    if (std::abs(static_cast<double>(ca) - static_cast<double>(cb)) > 0.02 * total)
        throw ConsistencyError("partitions cover different measures");
    std::vector<int> ia, ib;
    std::unordered_map<int, int> ra, rb;
    auto index = [](std::unordered_map<int, int>& r, int l) {
        const auto it = r.find(l);
        if (it != r.end()) return it->second;
        const int id = static_cast<int>(r.size());
        r.emplace(l, id);
        return id;
    };
    for (std::size_t k = 0; k < a.label.size(); ++k)
        if (a.label[k] >= 0 && b.label[k] >= 0) {
            index(ra, a.label[k]);
            index(rb, b.label[k]);
        }
    std::vector<std::vector<double>> joint(ra.size(), std::vector<double>(rb.size(), 0.0));
    for (std::size_t k = 0; k < a.label.size(); ++k)
        if (a.label[k] >= 0 && b.label[k] >= 0) joint[static_cast<std::size_t>(ra[a.label[k]])][static_cast<std::size_t>(rb[b.label[k]])] += 1.0;
    if (joint.empty()) throw ParameterError("partitions do not overlap");
    return conditional_entropy(joint);
}

double topology_entropy(const ContourTree& tree) {
    std::vector<double> m;
    for (const auto& a : tree.arcs()) m.push_back(a.measure);
    return partition_entropy(m);
}

double conditional_entropy_M_given_V(const DataPartition& part) {
    return conditional_entropy(part.joint_measure());
}

double h_bar(const DataPartition& part) {
    double total = 0.0, h = 0.0;
    for (const auto& c : part.cells()) total += c.measure;
    for (const auto& c : part.cells()) h += c.measure / total * std::log2(std::abs(1.0 - 2.0 * c.chi));
    return h;
}

EntropyReport entropy_report(const DataPartition& part, const EntropyReport* prev) {
    EntropyReport r;
    r.k = part.step();
    std::vector<double> m;
    for (const auto& c : part.cells()) m.push_back(c.measure);
    r.H_data = partition_entropy(m);
    r.H_cond = conditional_entropy_M_given_V(part);
    r.H_bar = h_bar(part);
    r.log2_cells = std::log2(static_cast<double>(part.cells().size()));
    r.R_k = prev ? consumption_rate(*prev, r) : 0.0;
    return r;
}

double consumption_rate(const EntropyReport& prev, const EntropyReport& cur) { return prev.H_bar - cur.H_bar; }

nlohmann::json report_to_json(const EntropyReport& r) {
    return {{"k", r.k}, {"H_data", r.H_data}, {"H_cond", r.H_cond}, {"H_bar", r.H_bar}, {"R_k", r.R_k},
            {"log2_cells", r.log2_cells}};
}

namespace {

struct UF {
    std::vector<int> p;
    explicit UF(std::size_t n) : p(n) { std::iota(p.begin(), p.end(), 0); }
    int find(int x) {
        while (p[static_cast<std::size_t>(x)] != x) x = p[static_cast<std::size_t>(x)] = p[static_cast<std::size_t>(p[static_cast<std::size_t>(x)])];
        return x;
    }
    void unite(int a, int b) { p[static_cast<std::size_t>(find(a))] = find(b); }
};

}  // namespace

double function_entropy(const ContourTree& tree, int m) {
    if (m < 1) throw ParameterError("m must be >= 1");
    const auto& arcs = tree.arcs();
    const auto& nodes = tree.nodes();
    double ymin = nodes[static_cast<std::size_t>(tree.boundary_node())].value, ymax = ymin;
    for (const auto& nd : nodes) ymax = std::max(ymax, nd.value);
    const double width = (ymax - ymin) / m;

    // Segments of every arc between consecutive bin edges.
    std::vector<int> first(arcs.size() + 1, 0);
    std::vector<double> seg_measure;
    for (std::size_t a = 0; a < arcs.size(); ++a) {
        first[a] = static_cast<int>(seg_measure.size());
        const double lo = arcs[a].lo_value, hi = arcs[a].hi_value;
        int j = static_cast<int>(std::floor((lo - ymin) / width)) + 1;
        double prev = lo;
        for (; j < m && ymin + j * width < hi; ++j) {
            const double y = ymin + j * width;
            if (y <= lo) continue;
            seg_measure.push_back(tree.area_between(static_cast<int>(a), prev, y));
            prev = y;
        }
        seg_measure.push_back(tree.area_between(static_cast<int>(a), prev, hi));
    }
    first[arcs.size()] = static_cast<int>(seg_measure.size());

    UF uf(seg_measure.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        int anchor = -1;
        for (int a : nodes[k].arcs) {
            const int s = arcs[static_cast<std::size_t>(a)].lo == static_cast<int>(k) ? first[static_cast<std::size_t>(a)]
                                                                                       : first[static_cast<std::size_t>(a) + 1] - 1;
            if (anchor < 0) anchor = s;
            else uf.unite(s, anchor);
        }
    }
    std::vector<double> comp(seg_measure.size(), 0.0);
    for (std::size_t s = 0; s < seg_measure.size(); ++s) comp[static_cast<std::size_t>(uf.find(static_cast<int>(s)))] += seg_measure[s];
    std::vector<double> cells;
    for (double c : comp)
        if (c > 0) cells.push_back(c);
    return partition_entropy(cells);
}

double function_entropy_1d(const std::function<double(double)>& f, int m, int samples) {
    if (m < 1) throw ParameterError("m must be >= 1");
    std::vector<double> y(static_cast<std::size_t>(samples) + 1);
    for (int k = 0; k <= samples; ++k) y[static_cast<std::size_t>(k)] = f(static_cast<double>(k) / samples);
    const double ymin = *std::min_element(y.begin(), y.end());
    const double ymax = *std::max_element(y.begin(), y.end());
    auto bin = [&](double v) {
        if (ymax <= ymin) return 0;
        return std::clamp(static_cast<int>(std::floor((v - ymin) / (ymax - ymin) * m)), 0, m - 1);
    };

    // Walk the samples, bisecting every change of bin to machine precision.
    std::vector<double> lengths;
    double start = 0.0;
    double x0 = 0.0;
    int b0 = bin(y[0]);
    for (int k = 1; k <= samples; ++k) {
        const double x1 = static_cast<double>(k) / samples;
        while (bin(f(x1)) != b0) {
            double lo = x0, hi = x1;
            for (int it = 0; it < 200 && hi - lo > 0; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (mid <= lo || mid >= hi) break;
                (bin(f(mid)) == b0 ? lo : hi) = mid;
            }
            lengths.push_back(hi - start);
            start = hi;
            x0 = hi;
            b0 = bin(f(hi));
        }
        x0 = x1;
    }
    lengths.push_back(1.0 - start);
    return partition_entropy(lengths);
}

EntropyBoundGap entropy_bound_gap(const ContourTree& tree, int m) {
    EntropyBoundGap g;
    g.lhs = function_entropy(tree, m) - std::log2(static_cast<double>(m));
    const auto& nodes = tree.nodes();
    double ymin = nodes[static_cast<std::size_t>(tree.boundary_node())].value, ymax = ymin;
    for (const auto& nd : nodes) ymax = std::max(ymax, nd.value);
    g.rhs = topology_entropy(tree);
    for (const auto& a : tree.arcs()) g.rhs += a.measure * std::log2((a.hi_value - a.lo_value) / (ymax - ymin));
    return g;
}

}  // namespace recon

#include "recon/topology.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>

#include "recon/contour.hpp"
#include "recon/errors.hpp"

namespace recon {

namespace {

constexpr int kDx8[8] = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr int kDy8[8] = {0, 1, 1, 1, 0, -1, -1, -1};

}  // namespace

int local_euler_change(const ScalarField& f, int i, int j) {
    const int n = f.n();
    if (i <= 0 || j <= 0 || i >= n - 1 || j >= n - 1) throw DomainError("not an interior node");
    const double c = f.at(i, j);
    bool lower[8];
    for (int k = 0; k < 8; ++k) {
        const double v = f.at(i + kDx8[k], j + kDy8[k]);
        if (v == c) throw DegenerateFieldError("tie between neighboring nodes");
        lower[k] = v < c;
    }
    // Even ring slots are edge neighbors, odd slots diagonals.
    int e = 0, q = 0;
    for (int k = 0; k < 8; k += 2) {
        e += lower[k];
        q += lower[k] && lower[k + 1] && lower[(k + 2) % 8];
    }
    return 1 - e + q;
}

std::vector<CriticalPoint> find_critical_points(const ScalarField& f) {
    const int n = f.n();
    std::vector<CriticalPoint> out;
    for (int j = 1; j < n - 1; ++j)
        for (int i = 1; i < n - 1; ++i) {
            const int dchi = local_euler_change(f, i, j);
            if (dchi == 0) continue;
            if (dchi < -1) throw DegenerateFieldError("degenerate saddle");
            CriticalPoint cp;
            cp.id = static_cast<int>(out.size());
            cp.location = f.node_point(i, j);
            cp.value = f.at(i, j);
            cp.pixel = j * n + i;
            if (dchi == -1) {
                cp.index = CritKind::Saddle;
            } else {
                cp.index = f.at(i + 1, j) < cp.value ? CritKind::Max : CritKind::Min;
            }
            out.push_back(cp);
        }
    return out;
}

std::size_t RegionMask::count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

int euler_characteristic(const RegionMask& mask) {
    const int n = mask.n();
    if (n == 0 || mask.count() == 0) throw ParameterError("empty mask");

    // Padded grid so the frame is one complement component.
    const int w = n + 2;
    std::vector<int> label(static_cast<std::size_t>(w) * w, -1);
    auto inside = [&](int x, int y) { return x >= 1 && y >= 1 && x <= n && y <= n && mask.get(x - 1, y - 1); };

    int components = 0;
    std::vector<int> stack;
    for (int y = 1; y <= n; ++y)
        for (int x = 1; x <= n; ++x) {
            const int s = y * w + x;
            if (!inside(x, y) || label[s] >= 0) continue;
            label[s] = components;
            stack.assign(1, s);
            while (!stack.empty()) {
                const int p = stack.back();
                stack.pop_back();
                const int px = p % w, py = p / w;
                for (int k = 0; k < 8; k += 2) {
                    const int qx = px + kDx8[k], qy = py + kDy8[k];
                    const int q = qy * w + qx;
                    if (inside(qx, qy) && label[q] < 0) {
                        label[q] = components;
                        stack.push_back(q);
                    }
                }
            }
            ++components;
        }

    int holes = -1;  // the component holding the frame is not a hole
    for (int y = 0; y < w; ++y)
        for (int x = 0; x < w; ++x) {
            const int s = y * w + x;
            if (inside(x, y) || label[s] >= 0) continue;
            label[s] = components;
            stack.assign(1, s);
            while (!stack.empty()) {
                const int p = stack.back();
                stack.pop_back();
                const int px = p % w, py = p / w;
                for (int k = 0; k < 8; ++k) {
                    const int qx = px + kDx8[k], qy = py + kDy8[k];
                    if (qx < 0 || qy < 0 || qx >= w || qy >= w) continue;
                    const int q = qy * w + qx;
                    if (!inside(qx, qy) && label[q] < 0) {
                        label[q] = components;
                        stack.push_back(q);
                    }
                }
            }
            ++holes;
        }
    return components - holes;
}

namespace {

struct UnionFind {
    std::vector<int> parent, size;
    explicit UnionFind(int n) : parent(n), size(n, 1) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    int unite(int a, int b) {
        if (size[a] < size[b]) std::swap(a, b);
        parent[b] = a;
        size[a] += size[b];
        return a;
    }
};

void replace_one(std::vector<int>& v, int from, int to) {
    *std::find(v.begin(), v.end(), from) = to;
}

void erase_one(std::vector<int>& v, int x) { v.erase(std::find(v.begin(), v.end(), x)); }

}  // namespace

ContourTree ContourTree::build(const ScalarField& f, const std::vector<CriticalPoint>& cps) {
    const int n = f.n();
    const int side = n - 2;
    const int m = side * side;
    const int B = m;
    const int nv = m + 1;

    ContourTree t;
    t.n_ = n;
    const double ring = f.at(0, 0);
    for (int k = 0; k < n; ++k)
        for (double v : {f.at(k, 0), f.at(k, n - 1), f.at(0, k), f.at(n - 1, k)})
            if (v != ring) throw ParameterError("boundary ring is not a level set");

    t.vvalue_.resize(nv);
    for (int j = 1; j <= side; ++j)
        for (int i = 1; i <= side; ++i) {
            const double v = f.at(i, j);
            if (!(v > ring)) throw ParameterError("interior must lie above the boundary level");
            t.vvalue_[(j - 1) * side + (i - 1)] = v;
        }
    t.vvalue_[B] = ring;

    std::vector<int> order(nv);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (a == B || b == B) return a == B && b != B;
        return t.vvalue_[a] != t.vvalue_[b] ? t.vvalue_[a] < t.vvalue_[b] : a < b;
    });
    std::vector<int> rank(nv);
    for (int r = 0; r < nv; ++r) rank[order[r]] = r;

    auto vid = [&](int i, int j) {
        return (i <= 0 || j <= 0 || i >= n - 1 || j >= n - 1) ? B : (j - 1) * side + (i - 1);
    };
    std::vector<int> first_layer;
    for (int j = 1; j <= side; ++j)
        for (int i = 1; i <= side; ++i)
            if (i == 1 || j == 1 || i == side || j == side) first_layer.push_back(vid(i, j));
    auto neighbors = [&](int v, int step, std::vector<int>& out) {
        out.clear();
        if (v == B) {
            out = first_layer;
            return;
        }
        const int i = v % side + 1, j = v / side + 1;
        for (int k = 0; k < 8; k += step) out.push_back(vid(i + kDx8[k], j + kDy8[k]));
    };

    // Join tree over superlevel sets (8-adjacency), swept from the top.
    std::vector<int> jt_down(nv, -1);
    std::vector<std::vector<int>> jt_up(nv);
    {
        UnionFind uf(nv);
        std::vector<int> low(nv);
        std::vector<char> seen(nv, 0);
        std::vector<int> nb;
        for (int r = nv - 1; r >= 0; --r) {
            const int v = order[r];
            seen[v] = 1;
            low[v] = v;
            neighbors(v, 1, nb);
            for (int u : nb) {
                if (!seen[u]) continue;
                const int ru = uf.find(u), rv = uf.find(v);
                if (ru == rv) continue;
                jt_down[low[ru]] = v;
                jt_up[v].push_back(low[ru]);
                low[uf.unite(ru, rv)] = v;
            }
        }
    }
    // Split tree over sublevel sets (4-adjacency), swept from the bottom.
    std::vector<int> st_up(nv, -1);
    std::vector<std::vector<int>> st_down(nv);
    {
        UnionFind uf(nv);
        std::vector<int> high(nv);
        std::vector<char> seen(nv, 0);
        std::vector<int> nb;
        for (int r = 0; r < nv; ++r) {
            const int v = order[r];
            seen[v] = 1;
            high[v] = v;
            neighbors(v, 2, nb);
            for (int u : nb) {
                if (!seen[u]) continue;
                const int ru = uf.find(u), rv = uf.find(v);
                if (ru == rv) continue;
                st_up[high[ru]] = v;
                st_down[v].push_back(high[ru]);
                high[uf.unite(ru, rv)] = v;
            }
        }
    }

    // Merge by repeatedly peeling leaves of either tree.
    std::vector<std::vector<int>> adj(nv);
    {
        std::vector<char> gone(nv, 0);
        std::vector<int> queue;
        auto is_leaf = [&](int v) { return jt_up[v].size() + st_down[v].size() == 1; };
        for (int v = 0; v < nv; ++v)
            if (is_leaf(v)) queue.push_back(v);
        int edges = 0;
        while (!queue.empty() && edges < nv - 1) {
            const int v = queue.back();
            queue.pop_back();
            if (gone[v] || !is_leaf(v)) continue;
            int w;
            if (jt_up[v].empty()) {
                w = jt_down[v];
                erase_one(jt_up[w], v);
                const int c = st_down[v][0], p = st_up[v];
                st_up[c] = p;
                if (p >= 0) replace_one(st_down[p], v, c);
            } else {
                w = st_up[v];
                erase_one(st_down[w], v);
                const int u = jt_up[v][0], d = jt_down[v];
                jt_down[u] = d;
                if (d >= 0) replace_one(jt_up[d], v, u);
            }
            gone[v] = 1;
            adj[v].push_back(w);
            adj[w].push_back(v);
            ++edges;
            if (is_leaf(w)) queue.push_back(w);
        }
        if (edges != nv - 1) throw ConsistencyError("contour tree merge did not complete");
    }

    // Nodes: one per critical point plus the boundary.
    t.vnode_.assign(nv, -1);
    t.varc_.assign(nv, -1);
    for (const auto& cp : cps) {
        Node nd;
        nd.pixel = cp.pixel;
        nd.vertex = vid(cp.pixel % n, cp.pixel / n);
        nd.value = cp.value;
        nd.kind = cp.index == CritKind::Min ? NodeKind::Min : cp.index == CritKind::Max ? NodeKind::Max : NodeKind::Saddle;
        nd.crit_id = cp.id;
        const std::size_t want = nd.kind == NodeKind::Saddle ? 3 : 1;
        if (adj[nd.vertex].size() != want)
            throw ConsistencyError("contour tree degree disagrees with the local criterion at pixel " +
                                   std::to_string(cp.pixel));
        t.vnode_[nd.vertex] = static_cast<int>(t.nodes_.size());
        t.nodes_.push_back(nd);
    }
    {
        Node nd;
        nd.vertex = B;
        nd.value = ring;
        nd.kind = NodeKind::Boundary;
        if (adj[B].size() != 1) throw ConsistencyError("boundary is not a leaf of the contour tree");
        t.boundary_node_ = static_cast<int>(t.nodes_.size());
        t.vnode_[B] = t.boundary_node_;
        t.nodes_.push_back(nd);
    }
    for (int v = 0; v < nv; ++v)
        if (t.vnode_[v] < 0 && adj[v].size() != 2)
            throw ConsistencyError("regular vertex with contour tree degree " + std::to_string(adj[v].size()));

    // Arcs: walk upward from every node through regular vertices.
    const double total = static_cast<double>(n) * n;
    auto share = [&](int node) {
        switch (t.nodes_[node].kind) {
            case NodeKind::Boundary: return 4.0 * (n - 1);
            case NodeKind::Saddle: return 1.0 / 3.0;
            default: return 1.0;
        }
    };
    for (int a = 0; a < static_cast<int>(t.nodes_.size()); ++a) {
        const int start = t.nodes_[a].vertex;
        for (int w : adj[start]) {
            if (rank[w] < rank[start]) continue;
            std::vector<int> chain;
            int prev = start, cur = w;
            while (t.vnode_[cur] < 0) {
                if (!chain.empty() && rank[cur] < rank[chain.back()])
                    throw ConsistencyError("contour tree arc is not monotone");
                chain.push_back(cur);
                const int next = adj[cur][0] == prev ? adj[cur][1] : adj[cur][0];
                prev = cur;
                cur = next;
            }
            const int id = static_cast<int>(t.arcs_.size());
            Arc arc;
            arc.lo = a;
            arc.hi = t.vnode_[cur];
            arc.lo_value = t.nodes_[a].value;
            arc.hi_value = t.nodes_[arc.hi].value;
            if (!(arc.hi_value > arc.lo_value) || (!chain.empty() && rank[cur] < rank[chain.back()]))
                throw ConsistencyError("contour tree arc is not monotone");
            for (int v : chain) t.varc_[v] = id;

            const double lo_share = share(a), hi_share = share(arc.hi);
            arc.knot.push_back(arc.lo_value);
            arc.cum.push_back(0.0);
            double prev_v = arc.lo_value, acc = lo_share;
            for (std::size_t k = 0; k <= chain.size(); ++k) {
                const double next_v = k < chain.size() ? t.vvalue_[chain[k]] : arc.hi_value;
                arc.knot.push_back(0.5 * (prev_v + next_v));
                arc.cum.push_back(acc / total);
                acc += 1.0;
                prev_v = next_v;
            }
            acc += hi_share - 1.0;
            arc.knot.push_back(arc.hi_value);
            arc.cum.push_back(acc / total);
            arc.measure = acc / total;

            t.nodes_[a].arcs.push_back(id);
            t.nodes_[arc.hi].arcs.push_back(id);
            t.arcs_.push_back(std::move(arc));
        }
    }

    // Root both the augmented and the compressed tree at the boundary.
    t.vparent_.assign(nv, -1);
    t.vdepth_.assign(nv, 0);
    {
        std::vector<int> stack{B};
        std::vector<char> seen(nv, 0);
        seen[B] = 1;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (int w : adj[v])
                if (!seen[w]) {
                    seen[w] = 1;
                    t.vparent_[w] = v;
                    t.vdepth_[w] = t.vdepth_[v] + 1;
                    stack.push_back(w);
                }
        }
    }
    const int nn = static_cast<int>(t.nodes_.size());
    t.node_parent_arc_.assign(nn, -1);
    t.node_depth_.assign(nn, 0);
    {
        std::vector<int> stack{t.boundary_node_};
        std::vector<char> seen(nn, 0);
        seen[t.boundary_node_] = 1;
        while (!stack.empty()) {
            const int x = stack.back();
            stack.pop_back();
            for (int a : t.nodes_[x].arcs) {
                const int y = t.arcs_[a].lo == x ? t.arcs_[a].hi : t.arcs_[a].lo;
                if (seen[y]) continue;
                seen[y] = 1;
                t.node_parent_arc_[y] = a;
                t.node_depth_[y] = t.node_depth_[x] + 1;
                stack.push_back(y);
            }
        }
    }
    return t;
}

double ContourTree::area_below(int arc, double t) const {
    const Arc& a = arcs_[arc];
    if (t <= a.lo_value) return 0.0;
    if (t >= a.hi_value) return a.measure;
    const auto it = std::upper_bound(a.knot.begin(), a.knot.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - a.knot.begin());
    const double x0 = a.knot[k - 1], x1 = a.knot[k];
    const double y0 = a.cum[k - 1], y1 = a.cum[k];
    return x1 > x0 ? y0 + (y1 - y0) * (t - x0) / (x1 - x0) : y1;
}

double ContourTree::area_between(int arc, double lo, double hi) const {
    return std::max(0.0, area_below(arc, hi) - area_below(arc, lo));
}

int ContourTree::vertex_of_pixel(int pixel) const {
    const int i = pixel % n_, j = pixel / n_;
    if (i <= 0 || j <= 0 || i >= n_ - 1 || j >= n_ - 1) return static_cast<int>(vvalue_.size()) - 1;
    return (j - 1) * (n_ - 2) + (i - 1);
}

int ContourTree::crossing_arc(int a, int b, double c, int* crossings) const {
    int found = -1, count = 0;
    auto edge = [&](int x, int y) {
        if ((vvalue_[x] < c) == (vvalue_[y] < c)) return;
        ++count;
        if (varc_[x] >= 0) {
            found = varc_[x];
        } else if (varc_[y] >= 0) {
            found = varc_[y];
        } else {
            const int nx = vnode_[x], ny = vnode_[y];
            for (int arc : nodes_[nx].arcs)
                if (arcs_[arc].lo == ny || arcs_[arc].hi == ny) found = arc;
        }
    };
    while (a != b) {
        if (vdepth_[a] >= vdepth_[b]) {
            edge(a, vparent_[a]);
            a = vparent_[a];
        } else {
            edge(b, vparent_[b]);
            b = vparent_[b];
        }
    }
    if (crossings) *crossings = count;
    return count == 1 ? found : -1;
}

std::vector<std::pair<int, bool>> ContourTree::node_path(int a, int b) const {
    std::vector<std::pair<int, bool>> up, down;
    while (a != b) {
        if (node_depth_[a] >= node_depth_[b]) {
            const int arc = node_parent_arc_[a];
            up.emplace_back(arc, arcs_[arc].lo == a);
            a = arcs_[arc].lo == a ? arcs_[arc].hi : arcs_[arc].lo;
        } else {
            const int arc = node_parent_arc_[b];
            // Travelled later in the opposite direction, towards b.
            down.emplace_back(arc, arcs_[arc].hi == b);
            b = arcs_[arc].lo == b ? arcs_[arc].hi : arcs_[arc].lo;
        }
    }
    up.insert(up.end(), down.rbegin(), down.rend());
    return up;
}

int TopologyPartition::extremum_count() const {
    return static_cast<int>(std::count_if(critical_points.begin(), critical_points.end(),
                                          [](const CriticalPoint& c) { return c.index != CritKind::Saddle; }));
}

int TopologyPartition::saddle_count() const {
    return static_cast<int>(critical_points.size()) - extremum_count();
}

std::vector<CriticalLevelSet> critical_level_sets(const ScalarField& f, const std::vector<CriticalPoint>& cps) {
    const int n = f.n();
    std::vector<CriticalLevelSet> out;
    for (const auto& cp : cps) {
        CriticalLevelSet s;
        s.level = cp.value;
        s.owner = cp.id;
        s.point = cp.location;
        if (cp.index != CritKind::Saddle) {
            s.kind = CriticalLevelSet::Kind::ExtremumPoint;
            out.push_back(std::move(s));
            continue;
        }
        s.kind = CriticalLevelSet::Kind::SaddleContour;
        std::vector<std::vector<std::pair<double, double>>> seen;
        const int i = cp.pixel % n, j = cp.pixel / n;
        for (int k = 0; k < 8; k += 2) {
            const int ni = i + kDx8[k], nj = j + kDy8[k];
            if (f.at(ni, nj) >= cp.value) continue;
            auto tr = contour_from_edge(f, cp.value, nj * n + ni, cp.pixel);
            std::vector<std::pair<double, double>> key;
            for (const auto& p : tr.points) key.emplace_back(p.x, p.y);
            std::sort(key.begin(), key.end());
            if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
            seen.push_back(std::move(key));
            s.contours.push_back(std::move(tr.points));
        }
        if (s.contours.empty()) throw DegenerateFieldError("saddle contour extraction failed");
        out.push_back(std::move(s));
    }
    return out;
}

TopologyPartition topology_partition(const ScalarField& f) {
    TopologyPartition tp;
    tp.critical_points = find_critical_points(f);
    std::vector<double> saddle_levels;
    for (const auto& c : tp.critical_points)
        if (c.index == CritKind::Saddle) saddle_levels.push_back(c.value);
    std::sort(saddle_levels.begin(), saddle_levels.end());
    for (std::size_t k = 1; k < saddle_levels.size(); ++k)
        if (saddle_levels[k] - saddle_levels[k - 1] < 1e-9)
            throw DegenerateFieldError("two saddles share a level");
    tp.tree = std::make_shared<const ContourTree>(ContourTree::build(f, tp.critical_points));
    tp.critical_sets = critical_level_sets(f, tp.critical_points);
    return tp;
}

MorseField make_morse_field(int n, double d, std::uint64_t seed) {
    for (int attempt = 0; attempt < 50; ++attempt) {
        const std::uint64_t s = seed + static_cast<std::uint64_t>(attempt) * 1000000ULL;
        ScalarField f = make_field(n, d, s);
        try {
            TopologyPartition tp = topology_partition(f);
            return {std::move(f), std::move(tp), attempt};
        } catch (const DegenerateFieldError&) {
        }
    }
    throw DegenerateFieldError("no Morse field after 50 reseeds");
}

nlohmann::json reeb_to_json(const TopologyPartition& tp) {
    const auto& t = *tp.tree;
    nlohmann::json verts = nlohmann::json::array(), edges = nlohmann::json::array();
    auto kind_name = [](NodeKind k) {
        switch (k) {
            case NodeKind::Min: return "min";
            case NodeKind::Max: return "max";
            case NodeKind::Saddle: return "saddle";
            default: return "boundary";
        }
    };
    for (std::size_t k = 0; k < t.nodes().size(); ++k) {
        const auto& nd = t.nodes()[k];
        nlohmann::json v = {{"id", k}, {"kind", kind_name(nd.kind)}, {"level", nd.value}};
        if (nd.crit_id >= 0) {
            const auto& p = tp.critical_points[static_cast<std::size_t>(nd.crit_id)].location;
            v["x"] = p.x;
            v["y"] = p.y;
        }
        verts.push_back(std::move(v));
    }
    for (const auto& a : t.arcs())
        edges.push_back({{"lo", a.lo}, {"hi", a.hi}, {"area", a.measure}});
    nlohmann::json sets = nlohmann::json::array();
    for (const auto& s : tp.critical_sets) {
        nlohmann::json js = {{"owner", s.owner}, {"level", s.level},
                             {"kind", s.kind == CriticalLevelSet::Kind::SaddleContour ? "saddle" : "extremum"},
                             {"point", {s.point.x, s.point.y}}};
        if (!s.contours.empty()) {
            nlohmann::json cs = nlohmann::json::array();
            for (const auto& c : s.contours) {
                nlohmann::json pts = nlohmann::json::array();
                for (const auto& p : c) pts.push_back({p.x, p.y});
                cs.push_back(std::move(pts));
            }
            js["contours"] = std::move(cs);
        }
        sets.push_back(std::move(js));
    }
    return {{"vertices", std::move(verts)}, {"edges", std::move(edges)}, {"critical_sets", std::move(sets)}};
}

}  // namespace recon

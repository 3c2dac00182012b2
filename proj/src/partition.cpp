#include "recon/partition.hpp"

#include <algorithm>
#include <cmath>

#include "recon/contour.hpp"
#include "recon/errors.hpp"

namespace recon {

TreePos locate_isoline(const ContourTree& tree, const Polyline& iso) {
    if (iso.kind != PolyKind::Isoline || iso.on_boundary || iso.anchor_lo < 0) return {};
    const int a = tree.vertex_of_pixel(iso.anchor_lo);
    const int b = tree.vertex_of_pixel(iso.anchor_hi);
    const int arc = tree.crossing_arc(a, b, iso.level);
    if (arc < 0) return {};
    const auto& ar = tree.arcs()[static_cast<std::size_t>(arc)];
    if (!(iso.level > ar.lo_value && iso.level < ar.hi_value)) return {};
    return {arc, iso.level};
}

TreePos locate_point(const ContourTree& tree, const ScalarField& f, Point p) {
    const double c = eval(f, p);
    const auto& B = tree.nodes()[static_cast<std::size_t>(tree.boundary_node())];
    if (c <= B.value) return {};
    if (const auto anchor = contour_anchor(f, p, c)) {
        const int arc = tree.crossing_arc(tree.vertex_of_pixel(anchor->first), tree.vertex_of_pixel(anchor->second), c);
        if (arc >= 0) {
            const auto& ar = tree.arcs()[static_cast<std::size_t>(arc)];
            if (c > ar.lo_value && c < ar.hi_value) return {arc, c};
        }
    }
    return {};
}

int endpoint_node(const ContourTree& tree, const Endpoint& e) {
    if (e.kind == Endpoint::Kind::Boundary) return tree.boundary_node();
    return tree.node_of_vertex(tree.vertex_of_pixel(e.pixel));
}

std::optional<std::vector<int>> gradient_tree_path(const ContourTree& tree, const Polyline& grad) {
    if (grad.kind != PolyKind::Gradient) return std::nullopt;
    const int lo = endpoint_node(tree, grad.lo_end);
    const int hi = endpoint_node(tree, grad.hi_end);
    if (lo < 0 || hi < 0 || lo == hi) return std::nullopt;
    std::vector<int> arcs;
    for (const auto& [arc, upward] : tree.node_path(lo, hi)) {
        if (!upward) return std::nullopt;
        arcs.push_back(arc);
    }
    return arcs;
}

DataPartition::DataPartition(std::shared_ptr<const ContourTree> tree) : tree_(std::move(tree)) {
    const std::size_t na = tree_->arcs().size();
    cuts_.assign(na, {});
    seg_cell_.assign(na, std::vector<int>{0});
    discovered_.assign(tree_->nodes().size(), 0);
    cells_.push_back(Cell{0, 1, 1.0, -1, 0});
    recompute();
}

int DataPartition::segment_index(int arc, double t) const {
    const auto& c = cuts_[static_cast<std::size_t>(arc)];
    return static_cast<int>(std::upper_bound(c.begin(), c.end(), t) - c.begin());
}

int DataPartition::end_segment(int arc, int node) const {
    const auto& a = tree_->arcs()[static_cast<std::size_t>(arc)];
    return a.lo == node ? 0 : static_cast<int>(cuts_[static_cast<std::size_t>(arc)].size());
}

int DataPartition::cell_on_arc(int arc, double t) const {
    return seg_cell_[static_cast<std::size_t>(arc)][static_cast<std::size_t>(segment_index(arc, t))];
}

int DataPartition::cell_of(TreePos p) const {
    if (!p.valid()) return cell_of_node(tree_->boundary_node());
    return cell_on_arc(p.arc, p.level);
}

int DataPartition::cell_of_node(int node) const {
    const int arc = tree_->nodes()[static_cast<std::size_t>(node)].arcs.front();
    return seg_cell_[static_cast<std::size_t>(arc)][static_cast<std::size_t>(end_segment(arc, node))];
}

std::pair<int, int> DataPartition::cut_sides(TreePos cut) const {
    const auto& cuts = cuts_.at(static_cast<std::size_t>(cut.arc));
    const auto it = std::lower_bound(cuts.begin(), cuts.end(), cut.level - 1e-12);
    if (it == cuts.end() || std::abs(*it - cut.level) > 1e-12) throw ParameterError("no cut at this position");
    const auto s = static_cast<std::size_t>(it - cuts.begin());
    const auto& segs = seg_cell_[static_cast<std::size_t>(cut.arc)];
    return {segs[s], segs[s + 1]};
}

std::vector<int> DataPartition::saddle_counts() const {
    std::vector<int> out(cells_.size(), 0);
    const auto& nodes = tree_->nodes();
    for (std::size_t k = 0; k < nodes.size(); ++k)
        if (nodes[k].kind == NodeKind::Saddle) ++out[static_cast<std::size_t>(cell_of_node(static_cast<int>(k)))];
    return out;
}

DataPartition::Split DataPartition::insert_isoline(TreePos cut) {
    Split out;
    if (!cut.valid()) return out;
    const auto& arcs = tree_->arcs();
    const auto& ar = arcs[static_cast<std::size_t>(cut.arc)];
    if (!(cut.level > ar.lo_value && cut.level < ar.hi_value))
        throw ConsistencyError("cut level outside its arc");
    auto& cuts = cuts_[static_cast<std::size_t>(cut.arc)];
    auto& segs = seg_cell_[static_cast<std::size_t>(cut.arc)];
    const int s = segment_index(cut.arc, cut.level);
    // The same contour mapped twice does not split anything.
    if ((s > 0 && std::abs(cuts[static_cast<std::size_t>(s - 1)] - cut.level) < 1e-12) ||
        (s < static_cast<int>(cuts.size()) && std::abs(cuts[static_cast<std::size_t>(s)] - cut.level) < 1e-12))
        return out;

    const int parent = segs[static_cast<std::size_t>(s)];
    out.parent = parent;
    out.chi_before = cells_[static_cast<std::size_t>(parent)].chi;
    cuts.insert(cuts.begin() + s, cut.level);
    segs.insert(segs.begin() + s, parent);

    const int fresh = static_cast<int>(cells_.size());
    cells_.push_back(Cell{fresh, 0, 0.0, parent, step_});
    // Flood the upper side of the cut within the parent cell.
    std::vector<std::pair<int, int>> stack{{cut.arc, s + 1}};
    while (!stack.empty()) {
        const auto [a, k] = stack.back();
        stack.pop_back();
        auto& cell = seg_cell_[static_cast<std::size_t>(a)][static_cast<std::size_t>(k)];
        if (cell != parent) continue;
        cell = fresh;
        const auto& arc = arcs[static_cast<std::size_t>(a)];
        const int last = static_cast<int>(cuts_[static_cast<std::size_t>(a)].size());
        for (int node : {k == 0 ? arc.lo : -1, k == last ? arc.hi : -1}) {
            if (node < 0) continue;
            for (int b : tree_->nodes()[static_cast<std::size_t>(node)].arcs) {
                const int kb = end_segment(b, node);
                if (seg_cell_[static_cast<std::size_t>(b)][static_cast<std::size_t>(kb)] == parent)
                    stack.emplace_back(b, kb);
            }
        }
    }
    if (seg_cell_[static_cast<std::size_t>(cut.arc)][static_cast<std::size_t>(s)] != parent)
        throw ConsistencyError("cut did not separate its cell");
    recompute();
    out.split = true;
    out.upper = fresh;
    out.chi_lower = cells_[static_cast<std::size_t>(parent)].chi;
    out.chi_upper = cells_[static_cast<std::size_t>(fresh)].chi;
    out.measure_lower = cells_[static_cast<std::size_t>(parent)].measure;
    out.measure_upper = cells_[static_cast<std::size_t>(fresh)].measure;
    return out;
}

bool DataPartition::insert_extremum(int node) {
    const auto& nd = tree_->nodes().at(static_cast<std::size_t>(node));
    if (nd.kind != NodeKind::Min && nd.kind != NodeKind::Max) throw ParameterError("not an extremum node");
    if (discovered_[static_cast<std::size_t>(node)]) return false;
    discovered_[static_cast<std::size_t>(node)] = 1;
    recompute();
    return true;
}

int DataPartition::discovered_count() const {
    return static_cast<int>(std::count(discovered_.begin(), discovered_.end(), char{1}));
}

void DataPartition::recompute() {
    for (auto& c : cells_) {
        c.chi = 0;
        c.measure = 0.0;
    }
    const auto& nodes = tree_->nodes();
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        const auto& nd = nodes[k];
        int contrib = 0;
        if (nd.kind == NodeKind::Saddle) contrib = -1;
        else if (nd.kind != NodeKind::Boundary && !discovered_[k]) contrib = 1;
        cells_[static_cast<std::size_t>(cell_of_node(static_cast<int>(k)))].chi += contrib;
    }
    const auto& arcs = tree_->arcs();
    for (std::size_t a = 0; a < arcs.size(); ++a) {
        const auto& cuts = cuts_[a];
        for (std::size_t k = 0; k <= cuts.size(); ++k) {
            const double lo = k == 0 ? arcs[a].lo_value : cuts[k - 1];
            const double hi = k == cuts.size() ? arcs[a].hi_value : cuts[k];
            cells_[static_cast<std::size_t>(seg_cell_[a][k])].measure += tree_->area_between(static_cast<int>(a), lo, hi);
        }
    }
}

std::vector<int> DataPartition::eligible_cells() const {
    std::vector<int> out;
    for (const auto& c : cells_)
        if (c.chi <= -1) out.push_back(c.id);
    return out;
}

int DataPartition::cell_lower_bound(int id) const { return std::abs(-2 * cell(id).chi + 1); }

std::vector<std::vector<double>> DataPartition::joint_measure() const {
    const auto& arcs = tree_->arcs();
    std::vector<std::vector<double>> out(arcs.size(), std::vector<double>(cells_.size(), 0.0));
    for (std::size_t a = 0; a < arcs.size(); ++a) {
        const auto& cuts = cuts_[a];
        for (std::size_t k = 0; k <= cuts.size(); ++k) {
            const double lo = k == 0 ? arcs[a].lo_value : cuts[k - 1];
            const double hi = k == cuts.size() ? arcs[a].hi_value : cuts[k];
            out[a][static_cast<std::size_t>(seg_cell_[a][k])] += tree_->area_between(static_cast<int>(a), lo, hi);
        }
    }
    return out;
}

std::vector<DataPartition::PathSegment> DataPartition::path_segments(const std::vector<int>& path) const {
    std::vector<PathSegment> out;
    const auto& arcs = tree_->arcs();
    for (int a : path) {
        const auto& cuts = cuts_[static_cast<std::size_t>(a)];
        const auto& ar = arcs[static_cast<std::size_t>(a)];
        for (std::size_t k = 0; k <= cuts.size(); ++k) {
            const double lo = k == 0 ? ar.lo_value : cuts[k - 1];
            const double hi = k == cuts.size() ? ar.hi_value : cuts[k];
            const int cell = seg_cell_[static_cast<std::size_t>(a)][k];
            // The path is monotone, so a cell's stretch on it is contiguous.
            if (!out.empty() && out.back().cell == cell) {
                out.back().hi = hi;
            } else {
                out.push_back({cell, lo, hi});
            }
        }
    }
    return out;
}

TreePos DataPartition::path_position(const std::vector<int>& path, double level) const {
    for (int a : path) {
        const auto& ar = tree_->arcs()[static_cast<std::size_t>(a)];
        if (level > ar.lo_value && level < ar.hi_value) return {a, level};
    }
    return {};
}

std::vector<int> DataPartition::pixel_cells(const ScalarField& f) const {
    const int n = f.n();
    std::vector<int> out(static_cast<std::size_t>(n) * n);
    for (int px = 0; px < n * n; ++px) {
        const int v = tree_->vertex_of_pixel(px);
        const int node = tree_->node_of_vertex(v);
        if (node >= 0) {
            out[static_cast<std::size_t>(px)] = cell_of_node(node);
        } else {
            out[static_cast<std::size_t>(px)] = cell_on_arc(tree_->arc_of_vertex(v), tree_->vertex_value(v));
        }
    }
    return out;
}

nlohmann::json DataPartition::snapshot() const {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : cells_) cells.push_back({{"id", c.id}, {"area", c.measure}, {"chi", c.chi}});
    return {{"k", step_}, {"cells", std::move(cells)}};
}

}  // namespace recon

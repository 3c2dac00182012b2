#include "recon/mapping.hpp"

#include <cmath>

#include "recon/errors.hpp"

namespace recon {

namespace {

Polyline domain_boundary() {
    Polyline pl;
    pl.kind = PolyKind::Isoline;
    pl.closed = true;
    pl.on_boundary = true;
    pl.points = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    return pl;
}

double segment_count(const Polyline& pl) {
    const std::size_t m = pl.points.size();
    return pl.closed ? static_cast<double>(m) : static_cast<double>(m > 0 ? m - 1 : 0);
}

}  // namespace

Point sample_on_polylines(const std::vector<const Polyline*>& lines, Rng& rng) {
    double total = 0.0;
    for (const auto* pl : lines) {
        const auto& p = pl->points;
        for (std::size_t k = 0; k + 1 < p.size(); ++k) total += std::hypot(p[k + 1].x - p[k].x, p[k + 1].y - p[k].y);
        if (pl->closed && p.size() > 1) total += std::hypot(p.front().x - p.back().x, p.front().y - p.back().y);
    }
    if (!(total > 0)) throw ParameterError("nothing to sample on");
    double s = rng.uniform() * total;
    Point last{};
    for (const auto* pl : lines) {
        const auto& p = pl->points;
        const std::size_t m = p.size();
        for (std::size_t k = 0; k < static_cast<std::size_t>(segment_count(*pl)); ++k) {
            const Point a = p[k], b = p[(k + 1) % m];
            const double len = std::hypot(b.x - a.x, b.y - a.y);
            last = b;
            if (s < len) {
                const double t = s / len;
                return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
            }
            s -= len;
        }
    }
    return last;
}

MapState::MapState(ScalarField f, TopologyPartition tp, TraceConfig cfg)
    : field_(std::move(f)), topo_(std::move(tp)), cfg_(cfg), part_(topo_.tree) {
    for (const auto& cp : topo_.critical_points)
        if (cp.index == CritKind::Saddle) saddle_levels_.push_back(cp.value);
    h_topology_ = topology_entropy(*topo_.tree);
    reports_.push_back(entropy_report(part_, nullptr));
}

void MapState::record() { reports_.push_back(entropy_report(part_, &reports_.back())); }

StepOutcome MapState::map_isoline(Point origin) {
    Polyline pl = trace_isoline(field_, origin, cfg_, &saddle_levels_);
    pl.id = static_cast<int>(polylines_.size());
    StepOutcome out;
    out.kind = PolyKind::Isoline;
    out.polyline = pl.id;
    out.cut = locate_isoline(*topo_.tree, pl);
    part_.advance();
    if (out.cut.valid()) out.split = part_.insert_isoline(out.cut);
    polylines_.push_back(std::move(pl));
    paths_.emplace_back();
    iso_cut_.push_back(out.cut);
    record();
    return out;
}

StepOutcome MapState::map_gradient(Point origin) {
    Polyline pl = trace_gradient(field_, origin, cfg_);
    pl.id = static_cast<int>(polylines_.size());
    StepOutcome out;
    out.kind = PolyKind::Gradient;
    out.polyline = pl.id;
    const auto& tree = *topo_.tree;
    auto path = gradient_tree_path(tree, pl);
    out.path_consistent = path.has_value();
    part_.advance();
    for (const auto* e : {&pl.lo_end, &pl.hi_end}) {
        if (e->kind != Endpoint::Kind::Extremum) continue;
        const int node = endpoint_node(tree, *e);
        if (node < 0) continue;
        const auto kind = tree.nodes()[static_cast<std::size_t>(node)].kind;
        if ((kind == NodeKind::Min || kind == NodeKind::Max) && part_.insert_extremum(node)) out.new_extrema.push_back(node);
    }
    polylines_.push_back(std::move(pl));
    paths_.push_back(std::move(path));
    iso_cut_.emplace_back();
    record();
    return out;
}

void MapState::reveal_extrema() {
    const auto& nodes = topo_.tree->nodes();
    for (std::size_t k = 0; k < nodes.size(); ++k)
        if (nodes[k].kind == NodeKind::Min || nodes[k].kind == NodeKind::Max) part_.insert_extremum(static_cast<int>(k));
    // Restate the current step with the new partition; R_k is measured from
    // the previous step as usual.
    const EntropyReport* prev = reports_.size() > 1 ? &reports_[reports_.size() - 2] : nullptr;
    reports_.back() = entropy_report(part_, prev);
}

Point MapState::sample_on_isolines(Rng& rng) const {
    static const Polyline boundary = domain_boundary();
    std::vector<const Polyline*> lines{&boundary};
    for (const auto& pl : polylines_)
        if (pl.kind == PolyKind::Isoline && !pl.on_boundary) lines.push_back(&pl);
    return sample_on_polylines(lines, rng);
}

std::optional<Point> MapState::sample_on_cell_boundary(int cell, Rng& rng) const {
    static const Polyline boundary = domain_boundary();
    std::vector<const Polyline*> lines;
    if (part_.cell_of_node(topo_.tree->boundary_node()) == cell) lines.push_back(&boundary);
    for (std::size_t k = 0; k < polylines_.size(); ++k) {
        if (!iso_cut_[k].valid()) continue;
        const auto [lo, hi] = part_.cut_sides(iso_cut_[k]);
        if (lo == cell || hi == cell) lines.push_back(&polylines_[k]);
    }
    if (lines.empty()) return std::nullopt;
    return sample_on_polylines(lines, rng);
}

}  // namespace recon

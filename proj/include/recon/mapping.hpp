#pragma once

#include <optional>
#include <vector>

#include "recon/entropy.hpp"
#include "recon/partition.hpp"
#include "recon/rng.hpp"
#include "recon/topology.hpp"
#include "recon/trace.hpp"

namespace recon {

struct StepOutcome {
    PolyKind kind = PolyKind::Gradient;
    int polyline = -1;
    // Isolines.
    TreePos cut;  // invalid when the traced contour did not resolve to an arc
    DataPartition::Split split;
    // Gradients.
    std::vector<int> new_extrema;  // nodes discovered by this path
    bool path_consistent = true;
};

// A map under construction on one field: traced polylines, the data-induced
// partition they generate, and one EntropyReport per executed program.
// Strategies, game sessions and replays all drive this class, so a program
// sequence always reproduces the same map.
class MapState {
public:
    MapState(ScalarField f, TopologyPartition tp, TraceConfig cfg = {});

    StepOutcome map_isoline(Point origin);
    StepOutcome map_gradient(Point origin);

    // Marks every extremum as discovered without tracing, for experiments
    // that assume the extrema are known. Not a motion program.
    void reveal_extrema();

    const ScalarField& field() const { return field_; }
    const TopologyPartition& topology() const { return topo_; }
    const TraceConfig& trace_config() const { return cfg_; }
    const std::vector<Polyline>& polylines() const { return polylines_; }
    const DataPartition& partition() const { return part_; }
    const std::vector<EntropyReport>& reports() const { return reports_; }
    int steps() const { return part_.step(); }
    double h_topology() const { return h_topology_; }

    // Tree path of a gradient polyline; empty for isolines and for paths
    // whose traced ends do not bound a monotone tree path.
    const std::optional<std::vector<int>>& gradient_path(int polyline) const {
        return paths_[static_cast<std::size_t>(polyline)];
    }
    TreePos isoline_cut(int polyline) const { return iso_cut_[static_cast<std::size_t>(polyline)]; }

    // Arc-length uniform point on the mapped isolines and the domain boundary.
    Point sample_on_isolines(Rng& rng) const;
    // Arc-length uniform point on the mapped isolines bounding a cell (the
    // domain boundary counts when the cell touches it).
    std::optional<Point> sample_on_cell_boundary(int cell, Rng& rng) const;

private:
    void record();

    ScalarField field_;
    TopologyPartition topo_;
    TraceConfig cfg_;
    std::vector<double> saddle_levels_;
    DataPartition part_;
    double h_topology_ = 0.0;
    std::vector<Polyline> polylines_;
    std::vector<std::optional<std::vector<int>>> paths_;
    std::vector<TreePos> iso_cut_;
    std::vector<EntropyReport> reports_;
};

// Arc-length uniform point on a set of polylines.
Point sample_on_polylines(const std::vector<const Polyline*>& lines, Rng& rng);

}  // namespace recon

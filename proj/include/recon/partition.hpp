#pragma once

#include <memory>
#include <optional>
#include <vector>

#include <json.hpp>

#include "recon/topology.hpp"
#include "recon/trace.hpp"

namespace recon {

// A point of the contour tree: a level on an arc, i.e. one connected
// component of a level set.
struct TreePos {
    int arc = -1;
    double level = 0.0;
    bool valid() const { return arc >= 0; }
};

// Tree position of a traced isoline, from its anchor edge. Invalid for the
// domain boundary and when the anchor does not resolve to a single arc.
TreePos locate_isoline(const ContourTree& tree, const Polyline& iso);

// Tree position of the level-set component through an arbitrary point.
TreePos locate_point(const ContourTree& tree, const ScalarField& f, Point p);

// Node at the end of a gradient path.
int endpoint_node(const ContourTree& tree, const Endpoint& e);

// Monotone tree path from the lower to the upper end of a gradient path, or
// nothing when the traced ends do not bound an ascending path in the tree.
std::optional<std::vector<int>> gradient_tree_path(const ContourTree& tree, const Polyline& grad);

// Data-induced partition. Mapped isolines cut arcs of the contour tree at
// their level, so every cell is a connected subtree; discovered extrema
// puncture cells without splitting them.
class DataPartition {
public:
    struct Cell {
        int id = -1;
        int chi = 1;
        double measure = 0.0;
        int parent = -1;  // cell this one was split from
        int born = 0;     // step of creation
    };
    struct Split {
        bool split = false;
        int parent = -1;  // keeps its id as the lower side
        int upper = -1;   // new cell above the cut
        int chi_before = 0;
        int chi_lower = 0, chi_upper = 0;
        double measure_lower = 0.0, measure_upper = 0.0;
    };

    explicit DataPartition(std::shared_ptr<const ContourTree> tree);

    const ContourTree& tree() const { return *tree_; }
    std::shared_ptr<const ContourTree> tree_ptr() const { return tree_; }
    const std::vector<Cell>& cells() const { return cells_; }
    const Cell& cell(int id) const { return cells_.at(static_cast<std::size_t>(id)); }
    int step() const { return step_; }
    void advance() { ++step_; }

    Split insert_isoline(TreePos cut);
    // Returns false when the extremum was already discovered.
    bool insert_extremum(int node);
    bool discovered(int node) const { return discovered_[static_cast<std::size_t>(node)]; }
    int discovered_count() const;

    std::vector<int> eligible_cells() const;
    int cell_lower_bound(int id) const;

    int cell_of(TreePos p) const;
    int cell_of_node(int node) const;
    // Cell of the segment of `arc` containing level t.
    int cell_on_arc(int arc, double t) const;
    const std::vector<double>& cuts(int arc) const { return cuts_[static_cast<std::size_t>(arc)]; }
    // Cells below and above an existing cut.
    std::pair<int, int> cut_sides(TreePos cut) const;
    // Saddle nodes inside each cell.
    std::vector<int> saddle_counts() const;

    // mu(arc ∩ cell) for every arc and cell.
    std::vector<std::vector<double>> joint_measure() const;

    // Level interval [lo, hi] of a monotone tree path inside a cell, with
    // the arc on which the midpoint level lies.
    struct PathSegment {
        int cell = -1;
        double lo = 0.0, hi = 0.0;
    };
    std::vector<PathSegment> path_segments(const std::vector<int>& path_arcs) const;
    // Arc of the path carrying `level`.
    TreePos path_position(const std::vector<int>& path_arcs, double level) const;

    // Cell label per grid pixel, reconstructed from the field.
    std::vector<int> pixel_cells(const ScalarField& f) const;

    nlohmann::json snapshot() const;

private:
    void recompute();
    int segment_index(int arc, double t) const;
    int end_segment(int arc, int node) const;

    std::shared_ptr<const ContourTree> tree_;
    std::vector<std::vector<double>> cuts_;
    std::vector<std::vector<int>> seg_cell_;
    std::vector<char> discovered_;
    std::vector<Cell> cells_;
    int step_ = 0;
};

}  // namespace recon

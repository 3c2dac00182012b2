#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <json.hpp>

#include "recon/field.hpp"

namespace recon {

enum class CritKind { Min = 0, Saddle = 1, Max = 2 };

struct CriticalPoint {
    int id = -1;
    Point location;
    double value = 0.0;
    CritKind index = CritKind::Min;
    int pixel = -1;  // j * n + i
};

// Change in Euler characteristic of the sublevel set when node (i, j) is
// added. Sublevel sets use 4-adjacency and superlevel sets 8-adjacency, so
// +1 is an extremum, 0 regular, -1 a simple saddle and <= -2 a degenerate
// (monkey) saddle. Throws DegenerateFieldError on a tie with a neighbor.
int local_euler_change(const ScalarField& f, int i, int j);

// Maxima exceed all 8 neighbors, minima are below their 4 edge neighbors,
// saddles have local_euler_change == -1. Ids are assigned in pixel order.
std::vector<CriticalPoint> find_critical_points(const ScalarField& f);

class RegionMask {
public:
    RegionMask() = default;
    explicit RegionMask(int n) : n_(n), bits_(static_cast<std::size_t>(n) * n, 0) {}
    int n() const { return n_; }
    bool get(int i, int j) const { return bits_[static_cast<std::size_t>(j) * n_ + i] != 0; }
    void set(int i, int j, bool v = true) { bits_[static_cast<std::size_t>(j) * n_ + i] = v; }
    std::size_t count() const;
    double area() const { return static_cast<double>(count()) / bits_.size(); }
    const std::vector<std::uint8_t>& bits() const { return bits_; }

private:
    int n_ = 0;
    std::vector<std::uint8_t> bits_;
};

// 4-connected components minus holes (8-connected complement components
// that do not reach the grid frame).
int euler_characteristic(const RegionMask& mask);

enum class NodeKind { Min, Saddle, Max, Boundary };

// Contour tree of the field with the boundary ring collapsed into one
// vertex. Arcs of the tree are the cells of the topology-induced partition;
// every arc is monotone in f and carries a continuous area function.
class ContourTree {
public:
    struct Node {
        int vertex = -1;
        int pixel = -1;  // -1 for the boundary node
        double value = 0.0;
        NodeKind kind = NodeKind::Min;
        int crit_id = -1;
        std::vector<int> arcs;
    };
    struct Arc {
        int lo = -1, hi = -1;  // node ids
        double lo_value = 0.0, hi_value = 0.0;
        double measure = 0.0;  // fraction of the domain
        // Piecewise-linear cumulative measure: cum[k] = measure below knot[k].
        std::vector<double> knot, cum;
    };

    static ContourTree build(const ScalarField& f, const std::vector<CriticalPoint>& cps);

    int n() const { return n_; }
    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Arc>& arcs() const { return arcs_; }
    int boundary_node() const { return boundary_node_; }

    // Measure of the part of an arc with f < t (clamped to the arc range).
    double area_below(int arc, double t) const;
    double area_between(int arc, double lo, double hi) const;

    // Graph vertex of a pixel; all boundary-ring pixels share one vertex.
    int vertex_of_pixel(int pixel) const;
    double vertex_value(int v) const { return vvalue_[v]; }
    // Arc containing a regular vertex, or -1 for nodes.
    int arc_of_vertex(int v) const { return varc_[v]; }
    int node_of_vertex(int v) const { return vnode_[v]; }

    // Arc on which the tree path from vertex a to vertex b crosses level c.
    // Returns -1 unless exactly one crossing exists.
    int crossing_arc(int a, int b, double c, int* crossings = nullptr) const;

    // Arcs along the path between two nodes, each with the direction of
    // travel (true when moving from its lo to its hi node).
    std::vector<std::pair<int, bool>> node_path(int a, int b) const;

    int node_parent_arc(int node) const { return node_parent_arc_[node]; }

private:
    int n_ = 0;
    int boundary_node_ = -1;
    std::vector<Node> nodes_;
    std::vector<Arc> arcs_;
    std::vector<double> vvalue_;
    std::vector<int> varc_, vnode_;
    std::vector<int> vparent_, vdepth_;  // augmented tree rooted at the boundary
    std::vector<int> node_parent_arc_, node_depth_;
};

struct CriticalLevelSet {
    enum class Kind { ExtremumPoint, SaddleContour } kind = Kind::ExtremumPoint;
    double level = 0.0;
    int owner = -1;  // CriticalPoint id
    Point point;
    std::vector<std::vector<Point>> contours;  // saddle only
};

struct TopologyPartition {
    std::vector<CriticalPoint> critical_points;
    std::vector<CriticalLevelSet> critical_sets;
    std::shared_ptr<const ContourTree> tree;

    int extremum_count() const;
    int saddle_count() const;
    std::size_t cell_count() const { return tree->arcs().size(); }
};

// Critical points plus contour tree. Throws DegenerateFieldError for ties,
// degenerate saddles or saddles whose levels differ by less than 1e-9.
TopologyPartition topology_partition(const ScalarField& f);

std::vector<CriticalLevelSet> critical_level_sets(const ScalarField& f,
                                                  const std::vector<CriticalPoint>& cps);

// Windowed field with a valid Morse structure. Degenerate draws are
// regenerated from seed + 1e6 * attempt; the seed actually used is stored in
// the returned field.
struct MorseField {
    ScalarField field;
    TopologyPartition topology;
    int reseeds = 0;
};
MorseField make_morse_field(int n, double d, std::uint64_t seed);

nlohmann::json reeb_to_json(const TopologyPartition& tp);

}  // namespace recon

#pragma once

#include <optional>
#include <vector>

#include "recon/field.hpp"

namespace recon {

// Marching squares on the bilinear field. A node is "upper" when its value is
// >= level. In the ambiguous cell the upper corners are taken as connected,
// which matches the 8-adjacency used for superlevel sets elsewhere.
struct ContourTrace {
    std::vector<Point> points;  // edge crossings in walk order
    bool closed = false;
    // Grid edge of the first crossing: the node below and the node at or
    // above the level (pixel indices j * n + i).
    int anchor_lo = -1;
    int anchor_hi = -1;
};

// Component of {f = level} through the crossing on the grid edge between two
// 4-adjacent nodes, which must straddle the level.
ContourTrace contour_from_edge(const ScalarField& f, double level, int pixel_a, int pixel_b);

// Component of {f = level} passing through (or nearest to) p within p's grid
// cell or its neighbors. Empty when no crossing is nearby.
std::optional<ContourTrace> contour_through(const ScalarField& f, Point p, double level);

// The anchor edge of the contour through p, without walking the contour.
std::optional<std::pair<int, int>> contour_anchor(const ScalarField& f, Point p, double level);

}  // namespace recon

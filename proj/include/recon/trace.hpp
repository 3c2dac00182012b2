#pragma once

#include <vector>

#include <json.hpp>

#include "recon/field.hpp"

namespace recon {

struct TraceConfig {
    double step_cells = 0.25;        // RK4 step
    double grad_tol = 1e-4;          // stop when |grad f| falls below this
    double iso_tol = 1e-3;           // max |f - level| along stored isoline points
    double hit_tol_cells = 1.5;      // click-to-gradient hit test
    int max_jitters = 4;
};

enum class PolyKind { Isoline, Gradient };

struct Endpoint {
    enum class Kind { Boundary, Extremum } kind = Kind::Boundary;
    int pixel = -1;  // extremum node, j * n + i
    Point point;
};

struct Polyline {
    int id = -1;
    PolyKind kind = PolyKind::Isoline;
    std::vector<Point> points;
    Point origin;

    // Isolines.
    double level = 0.0;
    bool closed = false;
    bool on_boundary = false;     // the traced contour is the domain boundary
    bool level_perturbed = false;  // origin sat on a saddle level
    int anchor_lo = -1, anchor_hi = -1;

    // Gradient paths run from the lower end to the upper end.
    Endpoint lo_end, hi_end;
    int jitters = 0;
};

// Component of the level set through the origin. `saddle_levels`, when given,
// triggers the +1e-6 level shift for origins on a saddle level.
Polyline trace_isoline(const ScalarField& f, Point origin, const TraceConfig& cfg = {},
                       const std::vector<double>* saddle_levels = nullptr);

// Steepest ascent and descent from the origin, RK4 on the normalized
// gradient, finished by a discrete walk onto the extremum node (8-adjacent
// ascent, 4-adjacent descent). Descent ends on the boundary when it comes
// within half a cell of it. Throws TracingError on step overflow.
Polyline trace_gradient(const ScalarField& f, Point origin, const TraceConfig& cfg = {});

struct ClickHit {
    bool on_gradient = false;
    int polyline = -1;  // index into the polyline list
    Point nearest;
    double distance = 0.0;
};

// Nearest gradient polyline within tol; ties go to the lower index.
ClickHit locate_click(const std::vector<Polyline>& polylines, Point p, double tol);

double distance_to_polyline(const Polyline& pl, Point p, Point* nearest = nullptr);

// Point on a gradient path where f reaches `level`, by interpolation between
// stored vertices. Returns false if the level is outside the path's range.
bool point_at_level(const ScalarField& f, const Polyline& grad, double level, Point& out);

nlohmann::json polyline_to_json(const Polyline& pl);

}  // namespace recon

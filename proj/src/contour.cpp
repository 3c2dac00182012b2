#include "recon/contour.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "recon/errors.hpp"

namespace recon {

namespace {

// Corners of cell (i, j) counter-clockwise from (i, j); edge k joins corner k
// and corner k + 1.
constexpr int kCornerDx[4] = {0, 1, 1, 0};
constexpr int kCornerDy[4] = {0, 0, 1, 1};
constexpr int kStepDx[4] = {0, 1, 0, -1};
constexpr int kStepDy[4] = {-1, 0, 1, 0};

struct Cell {
    int i, j;
    bool operator==(const Cell&) const = default;
};

class Walker {
public:
    Walker(const ScalarField& f, double level) : f_(f), c_(level), n_(f.n()) {}

    bool valid(Cell c) const { return c.i >= 0 && c.j >= 0 && c.i < n_ - 1 && c.j < n_ - 1; }

    int corner_pixel(Cell c, int k) const { return (c.j + kCornerDy[k]) * n_ + c.i + kCornerDx[k]; }

    bool upper(Cell c, int k) const { return f_.at(c.i + kCornerDx[k], c.j + kCornerDy[k]) >= c_; }

    bool crossed(Cell c, int e) const { return upper(c, e) != upper(c, (e + 1) % 4); }

    int partner(Cell c, int e) const {
        bool u[4];
        int count = 0;
        for (int k = 0; k < 4; ++k) u[k] = upper(c, k);
        for (int k = 0; k < 4; ++k) count += u[k] != u[(k + 1) % 4];
        if (count == 2) {
            for (int k = 0; k < 4; ++k)
                if (k != e && u[k] != u[(k + 1) % 4]) return k;
        }
        if (count == 4) {
            // Each lower corner k is cut off by edges k-1 and k.
            const int lower_corner = u[e] ? (e + 1) % 4 : e;
            return lower_corner == e ? (e + 3) % 4 : lower_corner;
        }
        return -1;
    }

    Point cross(Cell c, int e) const { return crossing(corner_pixel(c, e), corner_pixel(c, (e + 1) % 4)); }

    Point crossing(int pa, int pb) const {
        if (pa > pb) std::swap(pa, pb);
        const double fa = f_.at(static_cast<std::size_t>(pa));
        const double fb = f_.at(static_cast<std::size_t>(pb));
        const double t = (c_ - fa) / (fb - fa);
        const int ia = pa % n_, ja = pa / n_, ib = pb % n_, jb = pb / n_;
        const double h = f_.spacing();
        return {(ia + t * (ib - ia)) * h, (ja + t * (jb - ja)) * h};
    }

    std::pair<int, int> anchor(Cell c, int e) const {
        int a = corner_pixel(c, e), b = corner_pixel(c, (e + 1) % 4);
        if (f_.at(static_cast<std::size_t>(a)) >= c_) std::swap(a, b);
        return {a, b};
    }

    // Walk from (cell, entry) appending exit crossings until the contour
    // closes on `stop` or leaves the grid. Returns true when it closed.
    bool walk(Cell cell, int entry, Cell stop_cell, int stop_entry, std::vector<Point>& out) const {
        const std::size_t limit = 4 * static_cast<std::size_t>(n_) * n_;
        for (std::size_t it = 0; it < limit; ++it) {
            const int exit = partner(cell, entry);
            if (exit < 0) throw TracingError("contour walk entered a cell without a crossing");
            out.push_back(cross(cell, exit));
            const Cell next{cell.i + kStepDx[exit], cell.j + kStepDy[exit]};
            const int next_entry = (exit + 2) % 4;
            if (!valid(next)) return false;
            if (next == stop_cell && next_entry == stop_entry) return true;
            cell = next;
            entry = next_entry;
        }
        throw TracingError("contour walk did not terminate");
    }

    int n() const { return n_; }

private:
    const ScalarField& f_;
    double c_;
    int n_;
};

ContourTrace trace_from(const Walker& w, Cell cell, int e) {
    ContourTrace out;
    const auto [lo, hi] = w.anchor(cell, e);
    out.anchor_lo = lo;
    out.anchor_hi = hi;
    out.points.push_back(w.cross(cell, e));
    out.closed = w.walk(cell, e, cell, e, out.points);
    if (out.closed) {
        out.points.pop_back();
        return out;
    }
    // Open contour: walk the other way from the anchor edge and prepend.
    const Cell back{cell.i + kStepDx[e], cell.j + kStepDy[e]};
    if (w.valid(back)) {
        std::vector<Point> rev;
        w.walk(back, (e + 2) % 4, back, -1, rev);
        std::reverse(rev.begin(), rev.end());
        rev.insert(rev.end(), out.points.begin(), out.points.end());
        out.points = std::move(rev);
    }
    return out;
}

double seg_dist2(Point p, Point a, Point b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double ex = a.x + t * dx - p.x, ey = a.y + t * dy - p.y;
    return ex * ex + ey * ey;
}

struct Segment {
    Cell cell;
    int edge;
};

std::optional<Segment> nearest_segment(const Walker& w, const ScalarField& f, Point p) {
    const int n = f.n();
    const double u = std::clamp(p.x, 0.0, 1.0) * (n - 1);
    const double v = std::clamp(p.y, 0.0, 1.0) * (n - 1);
    const int ci = std::min(static_cast<int>(u), n - 2);
    const int cj = std::min(static_cast<int>(v), n - 2);
    double best = std::numeric_limits<double>::infinity();
    std::optional<Segment> found;
    for (int ring = 0; ring <= 1 && !found; ++ring)
        for (int dj = -ring; dj <= ring; ++dj)
            for (int di = -ring; di <= ring; ++di) {
                if (std::max(std::abs(di), std::abs(dj)) != ring) continue;
                const Cell c{ci + di, cj + dj};
                if (!w.valid(c)) continue;
                for (int e = 0; e < 4; ++e) {
                    if (!w.crossed(c, e)) continue;
                    const int x = w.partner(c, e);
                    if (x < e) continue;
                    const double d2 = seg_dist2(p, w.cross(c, e), w.cross(c, x));
                    if (d2 < best) {
                        best = d2;
                        found = Segment{c, e};
                    }
                }
            }
    return found;
}

}  // namespace

ContourTrace contour_from_edge(const ScalarField& f, double level, int pixel_a, int pixel_b) {
    const Walker w(f, level);
    const int n = f.n();
    if (pixel_a > pixel_b) std::swap(pixel_a, pixel_b);
    const int ia = pixel_a % n, ja = pixel_a / n;
    Cell cell{};
    int e = -1;
    if (pixel_b == pixel_a + 1 && ia + 1 < n) {
        // Horizontal edge: bottom edge of the cell above, else top edge of the cell below.
        cell = {ia, ja};
        e = 0;
        if (!w.valid(cell)) {
            cell = {ia, ja - 1};
            e = 2;
        }
    } else if (pixel_b == pixel_a + n) {
        cell = {ia, ja};
        e = 3;
        if (!w.valid(cell)) {
            cell = {ia - 1, ja};
            e = 1;
        }
    } else {
        throw ParameterError("contour_from_edge needs 4-adjacent nodes");
    }
    if (!w.valid(cell) || !w.crossed(cell, e)) throw ParameterError("edge does not straddle the level");
    return trace_from(w, cell, e);
}

std::optional<ContourTrace> contour_through(const ScalarField& f, Point p, double level) {
    const Walker w(f, level);
    const auto seg = nearest_segment(w, f, p);
    if (!seg) return std::nullopt;
    return trace_from(w, seg->cell, seg->edge);
}

std::optional<std::pair<int, int>> contour_anchor(const ScalarField& f, Point p, double level) {
    const Walker w(f, level);
    const auto seg = nearest_segment(w, f, p);
    if (!seg) return std::nullopt;
    return w.anchor(seg->cell, seg->edge);
}

}  // namespace recon

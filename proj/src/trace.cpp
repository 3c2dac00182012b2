#include "recon/trace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "recon/contour.hpp"
#include "recon/errors.hpp"

namespace recon {

namespace {

Point clamp_domain(Point p) { return {std::clamp(p.x, 0.0, 1.0), std::clamp(p.y, 0.0, 1.0)}; }

double boundary_distance(Point p) { return std::min({p.x, p.y, 1.0 - p.x, 1.0 - p.y}); }

Point project_to_boundary(Point p) {
    const double d[4] = {p.x, 1.0 - p.x, p.y, 1.0 - p.y};
    const int k = static_cast<int>(std::min_element(d, d + 4) - d);
    switch (k) {
        case 0: return {0.0, p.y};
        case 1: return {1.0, p.y};
        case 2: return {p.x, 0.0};
        default: return {p.x, 1.0};
    }
}

std::vector<Point> boundary_loop(int n) {
    const double h = 1.0 / (n - 1);
    std::vector<Point> pts;
    for (int k = 0; k < n - 1; ++k) pts.push_back({k * h, 0.0});
    for (int k = 0; k < n - 1; ++k) pts.push_back({1.0, k * h});
    for (int k = n - 1; k > 0; --k) pts.push_back({k * h, 1.0});
    for (int k = n - 1; k > 0; --k) pts.push_back({0.0, k * h});
    return pts;
}

std::vector<Point> resample_closed(const std::vector<Point>& pts, double spacing) {
    const std::size_t m = pts.size();
    std::vector<double> cum(m + 1, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        const Point a = pts[k], b = pts[(k + 1) % m];
        cum[k + 1] = cum[k] + std::hypot(b.x - a.x, b.y - a.y);
    }
    const double total = cum[m];
    const std::size_t count = std::max<std::size_t>(3, static_cast<std::size_t>(std::lround(total / spacing)));
    std::vector<Point> out;
    out.reserve(count);
    std::size_t seg = 0;
    for (std::size_t k = 0; k < count; ++k) {
        const double s = total * static_cast<double>(k) / static_cast<double>(count);
        while (seg + 1 < m && cum[seg + 1] < s) ++seg;
        const double len = cum[seg + 1] - cum[seg];
        const double t = len > 0 ? (s - cum[seg]) / len : 0.0;
        const Point a = pts[seg], b = pts[(seg + 1) % m];
        out.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
    }
    return out;
}

// Newton steps along the gradient back onto the level set.
Point project_to_level(const ScalarField& f, Point p, double level) {
    double r = eval(f, p) - level;
    for (int it = 0; it < 4 && std::abs(r) > 1e-13; ++it) {
        const Vec2 g = grad(f, p);
        const double g2 = g.x * g.x + g.y * g.y;
        if (g2 == 0.0) break;
        const Point q = clamp_domain({p.x - r * g.x / g2, p.y - r * g.y / g2});
        const double rq = eval(f, q) - level;
        if (std::abs(rq) >= std::abs(r)) break;
        p = q;
        r = rq;
    }
    return p;
}

double max_level_error(const ScalarField& f, const std::vector<Point>& pts, double level) {
    double e = 0.0;
    for (const auto& p : pts) e = std::max(e, std::abs(eval(f, p) - level));
    return e;
}

}  // namespace

Polyline trace_isoline(const ScalarField& f, Point origin, const TraceConfig& cfg,
                       const std::vector<double>* saddle_levels) {
    if (!in_domain(origin)) throw DomainError("isoline origin outside the domain");
    origin = clamp_domain(origin);
    Polyline pl;
    pl.kind = PolyKind::Isoline;
    pl.origin = origin;
    const double ring = f.at(0, 0);
    double c = eval(f, origin);
    if (c <= ring) {
        pl.level = ring;
        pl.closed = true;
        pl.on_boundary = true;
        pl.points = boundary_loop(f.n());
        return pl;
    }
    if (saddle_levels) {
        for (double s : *saddle_levels)
            if (std::abs(c - s) < 1e-9) {
                c += 1e-6;
                pl.level_perturbed = true;
                break;
            }
    }
    pl.level = c;
    const auto tr = contour_through(f, origin, c);
    if (!tr) throw TracingError("no level crossing near the isoline origin");
    pl.closed = tr->closed;
    pl.anchor_lo = tr->anchor_lo;
    pl.anchor_hi = tr->anchor_hi;
    if (tr->closed && tr->points.size() >= 3) {
        auto pts = resample_closed(tr->points, f.spacing());
        for (auto& p : pts) p = project_to_level(f, p, c);
        pl.points = max_level_error(f, pts, c) < cfg.iso_tol ? std::move(pts) : tr->points;
    } else {
        pl.points = tr->points;
    }
    return pl;
}

namespace {

struct HalfPath {
    std::vector<Point> pts;
    std::vector<char> keep;
    Endpoint end;
    int jitters = 0;
};

Vec2 unit(Vec2 g) {
    const double m = std::hypot(g.x, g.y);
    return m > 0 ? Vec2{g.x / m, g.y / m} : Vec2{};
}

HalfPath trace_half(const ScalarField& f, Point origin, int dir, const TraceConfig& cfg) {
    const int n = f.n();
    const double h = f.spacing();
    const double step = cfg.step_cells * h;
    const long max_steps = static_cast<long>(10.0 * n * std::sqrt(2.0));
    HalfPath out;
    Point p = origin;
    double fp = eval(f, p);
    Vec2 last{0, 0};
    auto better = [&](double a, double b) { return dir > 0 ? a > b : a < b; };
    const double ring = f.at(0, 0);

    long steps = 0;
    for (;;) {
        if (++steps > max_steps) throw TracingError("gradient trace exceeded the step limit");
        if (dir < 0 && boundary_distance(p) < 0.5 * h) {
            const Point q = project_to_boundary(p);
            if (q.x != p.x || q.y != p.y) {
                out.pts.push_back(q);
                out.keep.push_back(1);
            }
            out.end = {Endpoint::Kind::Boundary, -1, q};
            return out;
        }
        const Vec2 g = grad(f, p);
        bool stalled = std::hypot(g.x, g.y) < cfg.grad_tol;
        if (!stalled) {
            auto dirv = [&](Point q) {
                const Vec2 u = unit(grad(f, clamp_domain(q)));
                return Vec2{dir * u.x, dir * u.y};
            };
            const Vec2 k1 = dirv(p);
            const Vec2 k2 = dirv({p.x + 0.5 * step * k1.x, p.y + 0.5 * step * k1.y});
            const Vec2 k3 = dirv({p.x + 0.5 * step * k2.x, p.y + 0.5 * step * k2.y});
            const Vec2 k4 = dirv({p.x + step * k3.x, p.y + step * k3.y});
            const Point q = clamp_domain({p.x + step / 6.0 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x),
                                          p.y + step / 6.0 * (k1.y + 2 * k2.y + 2 * k3.y + k4.y)});
            const double fq = eval(f, q);
            // Zigzag across a crease of the interpolant: little net motion
            // over the last steps despite strict progress in f.
            const std::size_t np = out.pts.size();
            const bool creeping = np >= 8 && std::hypot(q.x - out.pts[np - 8].x, q.y - out.pts[np - 8].y) < 2.0 * step;
            if (better(fq, fp) && !creeping) {
                last = {q.x - p.x, q.y - p.y};
                p = q;
                fp = fq;
                out.pts.push_back(p);
                out.keep.push_back(0);
                continue;
            }
        }
        // Stalled: near a saddle, nudge sideways and keep integrating.
        const double u = p.x * (n - 1), v = p.y * (n - 1);
        const int ci = std::min(static_cast<int>(u), n - 2), cj = std::min(static_cast<int>(v), n - 2);
        if (stalled && out.jitters < cfg.max_jitters && (last.x != 0 || last.y != 0)) {
            const Vec2 t = unit(last);
            Point best = p;
            double fb = fp;
            for (int s : {1, -1}) {
                const Point q = clamp_domain({p.x - s * 0.5 * h * t.y, p.y + s * 0.5 * h * t.x});
                const double fq = eval(f, q);
                if (better(fq, fb)) {
                    best = q;
                    fb = fq;
                }
            }
            if (best.x != p.x || best.y != p.y) {
                ++out.jitters;
                p = best;
                fp = fb;
                out.pts.push_back(p);
                out.keep.push_back(1);
                continue;
            }
        }
        // Discrete finish from the best corner of the current cell.
        int bi = ci, bj = cj;
        for (int dj = 0; dj <= 1; ++dj)
            for (int di = 0; di <= 1; ++di)
                if (better(f.at(ci + di, cj + dj), f.at(bi, bj))) {
                    bi = ci + di;
                    bj = cj + dj;
                }
        auto on_ring = [&](int i, int j) { return i == 0 || j == 0 || i == n - 1 || j == n - 1; };
        auto push_node = [&](int i, int j) {
            const double fv = f.at(i, j);
            if (better(fv, fp)) {
                fp = fv;
                out.pts.push_back(f.node_point(i, j));
                out.keep.push_back(1);
            }
        };
        push_node(bi, bj);
        for (;;) {
            if (dir < 0 && on_ring(bi, bj)) {
                out.end = {Endpoint::Kind::Boundary, -1, f.node_point(bi, bj)};
                return out;
            }
            int ni = bi, nj = bj;
            const int stride = dir > 0 ? 1 : 2;
            constexpr int dx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
            constexpr int dy[8] = {0, 1, 1, 1, 0, -1, -1, -1};
            for (int k = 0; k < 8; k += stride) {
                const int qi = bi + dx[k], qj = bj + dy[k];
                if (qi < 0 || qj < 0 || qi >= n || qj >= n) continue;
                if (better(f.at(qi, qj), f.at(ni, nj))) {
                    ni = qi;
                    nj = qj;
                }
            }
            if (ni == bi && nj == bj) break;
            if (++steps > max_steps) throw TracingError("gradient trace exceeded the step limit");
            bi = ni;
            bj = nj;
            push_node(bi, bj);
        }
        // Ascent can only reach the ring on fields without the boundary window.
        if ((dir > 0 && on_ring(bi, bj)) || (dir < 0 && f.at(bi, bj) <= ring)) {
            out.end = {Endpoint::Kind::Boundary, -1, f.node_point(bi, bj)};
        } else {
            out.end = {Endpoint::Kind::Extremum, bj * n + bi, f.node_point(bi, bj)};
        }
        return out;
    }
}

}  // namespace

Polyline trace_gradient(const ScalarField& f, Point origin, const TraceConfig& cfg) {
    if (!in_domain(origin)) throw DomainError("gradient origin outside the domain");
    origin = clamp_domain(origin);
    Polyline pl;
    pl.kind = PolyKind::Gradient;
    pl.origin = origin;
    const HalfPath up = trace_half(f, origin, +1, cfg);
    const HalfPath down = trace_half(f, origin, -1, cfg);
    pl.jitters = up.jitters + down.jitters;

    // Store roughly one point per cell: every fourth RK4 point, plus every
    // jitter, discrete-walk node and end point.
    auto thin = [&](const HalfPath& hp, std::vector<Point>& out) {
        for (std::size_t k = 0; k < hp.pts.size(); ++k)
            if (hp.keep[k] || (k + 1) % 4 == 0 || k + 1 == hp.pts.size()) out.push_back(hp.pts[k]);
    };
    std::vector<Point> lower, upper;
    thin(down, lower);
    thin(up, upper);
    pl.points.assign(lower.rbegin(), lower.rend());
    pl.points.push_back(origin);
    pl.points.insert(pl.points.end(), upper.begin(), upper.end());
    pl.lo_end = down.end;
    if (down.pts.empty()) pl.lo_end.point = origin;
    pl.hi_end = up.end;
    if (up.pts.empty()) pl.hi_end.point = origin;
    return pl;
}

double distance_to_polyline(const Polyline& pl, Point p, Point* nearest) {
    double best = std::numeric_limits<double>::infinity();
    Point bp = p;
    const auto& pts = pl.points;
    const std::size_t m = pts.size();
    if (m == 1) {
        best = std::hypot(p.x - pts[0].x, p.y - pts[0].y);
        bp = pts[0];
    }
    const std::size_t segs = pl.closed ? m : (m > 0 ? m - 1 : 0);
    for (std::size_t k = 0; k < segs && m > 1; ++k) {
        const Point a = pts[k], b = pts[(k + 1) % m];
        const double dx = b.x - a.x, dy = b.y - a.y;
        const double len2 = dx * dx + dy * dy;
        const double t = len2 > 0 ? std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0) : 0.0;
        const Point q{a.x + t * dx, a.y + t * dy};
        const double d = std::hypot(p.x - q.x, p.y - q.y);
        if (d < best) {
            best = d;
            bp = q;
        }
    }
    if (nearest) *nearest = bp;
    return best;
}

ClickHit locate_click(const std::vector<Polyline>& polylines, Point p, double tol) {
    if (!(tol > 0)) throw ParameterError("hit tolerance must be positive");
    ClickHit hit;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < polylines.size(); ++k) {
        if (polylines[k].kind != PolyKind::Gradient) continue;
        Point q;
        const double d = distance_to_polyline(polylines[k], p, &q);
        if (d <= tol && d < best) {
            best = d;
            hit = {true, static_cast<int>(k), q, d};
        }
    }
    return hit;
}

bool point_at_level(const ScalarField& f, const Polyline& g, double level, Point& out) {
    const auto& pts = g.points;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        const double fa = eval(f, pts[k]), fb = eval(f, pts[k + 1]);
        if (!(fa <= level && level <= fb)) continue;
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            const Point q{pts[k].x + mid * (pts[k + 1].x - pts[k].x), pts[k].y + mid * (pts[k + 1].y - pts[k].y)};
            (eval(f, q) < level ? lo : hi) = mid;
        }
        out = {pts[k].x + hi * (pts[k + 1].x - pts[k].x), pts[k].y + hi * (pts[k + 1].y - pts[k].y)};
        return true;
    }
    return false;
}

nlohmann::json polyline_to_json(const Polyline& pl) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : pl.points) pts.push_back({p.x, p.y});
    nlohmann::json j = {{"id", pl.id},
                        {"kind", pl.kind == PolyKind::Gradient ? "gradient" : "isoline"},
                        {"origin", {pl.origin.x, pl.origin.y}},
                        {"points", std::move(pts)}};
    if (pl.kind == PolyKind::Isoline) {
        j["level"] = pl.level;
        j["closed"] = pl.closed;
    } else {
        auto ep = [](const Endpoint& e) {
            return nlohmann::json{{"kind", e.kind == Endpoint::Kind::Boundary ? "boundary" : "extremum"},
                                  {"point", {e.point.x, e.point.y}}};
        };
        j["endpoints"] = {ep(pl.lo_end), ep(pl.hi_end)};
    }
    return j;
}

}  // namespace recon

#include "recon/field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include <Eigen/Dense>

#include "recon/errors.hpp"
#include "recon/rng.hpp"

namespace recon {

ScalarField::ScalarField(int n, std::vector<double> values, double corr_length,
                         std::uint64_t seed, bool window_applied)
    : n_(n), values_(std::move(values)), corr_length_(corr_length), seed_(seed),
      window_applied_(window_applied) {
    if (n < 2 || values_.size() != static_cast<std::size_t>(n) * n)
        throw ParameterError("field grid size mismatch");
}

ScalarField generate_grf(int n, double d, std::uint64_t seed) {
    if (n < 64) throw ParameterError("grid size must be >= 64");
    if (!(d > 0.0 && d <= 1.0)) throw ParameterError("correlation length must be in (0, 1]");

    // The squared-exponential covariance factorizes over the axes, so the
    // field is B W B^T with W an iid standard normal matrix and B B^T the
    // 1-D covariance matrix. Numerically null directions are dropped.
    const double h = 1.0 / (n - 1);
    Eigen::MatrixXd k(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const double r = (a - b) * h;
            k(a, b) = std::exp(-r * r / (2.0 * d * d));
        }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    const Eigen::VectorXd& lam = es.eigenvalues();
    const double cutoff = 1e-12 * lam(n - 1);
    int rank = 0;
    while (rank < n && lam(n - 1 - rank) > cutoff) ++rank;
    Eigen::MatrixXd basis(n, rank);
    for (int c = 0; c < rank; ++c) {
        Eigen::VectorXd v = es.eigenvectors().col(n - 1 - c);
        // Fix the eigenvector sign so the draw does not depend on the solver.
        Eigen::Index arg;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) v = -v;
        basis.col(c) = v * std::sqrt(lam(n - 1 - c));
    }

    Rng rng(seed);
    Eigen::MatrixXd w(rank, rank);
    for (int r = 0; r < rank; ++r)
        for (int c = 0; c < rank; ++c) w(r, c) = rng.normal();
    const Eigen::MatrixXd g = basis * w * basis.transpose();

    std::vector<double> values(static_cast<std::size_t>(n) * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) values[static_cast<std::size_t>(j) * n + i] = g(j, i);
    return ScalarField(n, std::move(values), d, seed, false);
}

double window_weight(double t) {
    const double taper = 0.5 * (1.0 - kWindowFlatFraction);
    const double s = std::min(t, 1.0 - t);
    if (s <= 0.0) return 0.0;
    if (s >= taper) return 1.0;
    return 0.5 * (1.0 - std::cos(std::numbers::pi * s / taper));
}

ScalarField apply_boundary_window(const ScalarField& raw) {
    const int n = raw.n();
    const auto& v = raw.values();
    const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    const double lo = *lo_it;
    const double span = *hi_it - lo;
    // Lift the raw field above zero so the tapered boundary is the unique
    // minimum; the small margin keeps interior minima off the boundary level.
    const double lift = -lo + 0.05 * span;

    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) w[i] = window_weight(i * raw.spacing());

    std::vector<double> out(v.size());
    double top = 0.0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const std::size_t k = static_cast<std::size_t>(j) * n + i;
            out[k] = w[i] * w[j] * (v[k] + lift);
            top = std::max(top, out[k]);
        }
    if (top > 0.0)
        for (auto& x : out) x /= top;
    return ScalarField(n, std::move(out), raw.corr_length(), raw.seed(), true);
}

ScalarField make_field(int n, double d, std::uint64_t seed) {
    return apply_boundary_window(generate_grf(n, d, seed));
}

bool in_domain(Point p) {
    constexpr double eps = 1e-12;
    return p.x >= -eps && p.x <= 1.0 + eps && p.y >= -eps && p.y <= 1.0 + eps;
}

namespace {

struct CellPos {
    int i, j;
    double fx, fy;
};

CellPos locate(const ScalarField& f, Point p) {
    if (!in_domain(p)) throw DomainError("point outside the unit square");
    const int n = f.n();
    const double u = std::clamp(p.x, 0.0, 1.0) * (n - 1);
    const double v = std::clamp(p.y, 0.0, 1.0) * (n - 1);
    const int i = std::min(static_cast<int>(u), n - 2);
    const int j = std::min(static_cast<int>(v), n - 2);
    return {i, j, u - i, v - j};
}

double dfdx_cell(const ScalarField& f, int i, int j, double fy) {
    return (1.0 - fy) * (f.at(i + 1, j) - f.at(i, j)) + fy * (f.at(i + 1, j + 1) - f.at(i, j + 1));
}

double dfdy_cell(const ScalarField& f, int i, int j, double fx) {
    return (1.0 - fx) * (f.at(i, j + 1) - f.at(i, j)) + fx * (f.at(i + 1, j + 1) - f.at(i + 1, j));
}

}  // namespace

double eval(const ScalarField& f, Point p) {
    const CellPos c = locate(f, p);
    const double f00 = f.at(c.i, c.j), f10 = f.at(c.i + 1, c.j);
    const double f01 = f.at(c.i, c.j + 1), f11 = f.at(c.i + 1, c.j + 1);
    return (1.0 - c.fy) * ((1.0 - c.fx) * f00 + c.fx * f10) + c.fy * ((1.0 - c.fx) * f01 + c.fx * f11);
}

Vec2 grad(const ScalarField& f, Point p) {
    const CellPos c = locate(f, p);
    const double scale = f.n() - 1;
    double gx = dfdx_cell(f, c.i, c.j, c.fy);
    double gy = dfdy_cell(f, c.i, c.j, c.fx);
    if (c.fx == 0.0 && c.i > 0) gx = 0.5 * (gx + dfdx_cell(f, c.i - 1, c.j, c.fy));
    if (c.fy == 0.0 && c.j > 0) gy = 0.5 * (gy + dfdy_cell(f, c.i, c.j - 1, c.fx));
    return {gx * scale, gy * scale};
}

namespace {

constexpr char kMagic[4] = {'R', 'F', 'L', 'D'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& os, T v) {
    static_assert(std::endian::native == std::endian::little, "archive assumes little-endian host");
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw IoError("truncated field archive");
    return v;
}

}  // namespace

void save_field(const ScalarField& f, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    os.write(kMagic, 4);
    put<std::uint32_t>(os, kVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(f.n()));
    put<double>(os, f.corr_length());
    put<std::uint64_t>(os, f.seed());
    put<std::uint8_t>(os, f.window_applied() ? 1 : 0);
    os.write(reinterpret_cast<const char*>(f.values().data()),
             static_cast<std::streamsize>(f.values().size() * sizeof(double)));
    if (!os) throw IoError("write failed for " + path.string());
}

ScalarField load_field(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) throw IoError("not a field archive: " + path.string());
    if (get<std::uint32_t>(is) != kVersion) throw IoError("unsupported archive version");
    const auto n = static_cast<int>(get<std::uint32_t>(is));
    const double d = get<double>(is);
    const auto seed = get<std::uint64_t>(is);
    const bool windowed = get<std::uint8_t>(is) != 0;
    if (n < 2 || n > 8192) throw IoError("bad grid size in archive");
    std::vector<double> values(static_cast<std::size_t>(n) * n);
    is.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!is) throw IoError("truncated field archive");
    return ScalarField(n, std::move(values), d, seed, windowed);
}

nlohmann::json field_to_json(const ScalarField& f, int max_side) {
    const int side = std::min(f.n(), max_side);
    nlohmann::json rows = nlohmann::json::array();
    for (int j = 0; j < side; ++j) {
        nlohmann::json row = nlohmann::json::array();
        const double y = side == 1 ? 0.0 : static_cast<double>(j) / (side - 1);
        for (int i = 0; i < side; ++i) {
            const double x = side == 1 ? 0.0 : static_cast<double>(i) / (side - 1);
            row.push_back(std::round(eval(f, {x, y}) * 1e4) / 1e4);
        }
        rows.push_back(std::move(row));
    }
    return {{"n", f.n()}, {"side", side}, {"d", f.corr_length()}, {"seed", f.seed()},
            {"window", f.window_applied()}, {"values", std::move(rows)}};
}

}  // namespace recon

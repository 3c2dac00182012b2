#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace recon {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

// Gridded scalar field on the unit square. Node (i, j) sits at
// (i / (n-1), j / (n-1)); storage is row-major with rows along y.
class ScalarField {
public:
    ScalarField() = default;
    ScalarField(int n, std::vector<double> values, double corr_length, std::uint64_t seed,
                bool window_applied);

    int n() const { return n_; }
    double spacing() const { return 1.0 / (n_ - 1); }
    double at(int i, int j) const { return values_[static_cast<std::size_t>(j) * n_ + i]; }
    double at(std::size_t idx) const { return values_[idx]; }
    const std::vector<double>& values() const { return values_; }
    double corr_length() const { return corr_length_; }
    std::uint64_t seed() const { return seed_; }
    bool window_applied() const { return window_applied_; }

    Point node_point(int i, int j) const { return {i * spacing(), j * spacing()}; }

private:
    int n_ = 0;
    std::vector<double> values_;
    double corr_length_ = 0.0;
    std::uint64_t seed_ = 0;
    bool window_applied_ = false;
};

// Stationary zero-mean unit-variance Gaussian field with covariance
// exp(-|dr|^2 / (2 d^2)), sampled exactly through the separable
// eigendecomposition of the per-axis covariance.
ScalarField generate_grf(int n, double d, std::uint64_t seed);

// Taper to zero at the boundary with a separable raised-cosine window
// (flat on the central 70%), then rescale to [0, 1].
ScalarField apply_boundary_window(const ScalarField& raw);

// generate_grf followed by apply_boundary_window.
ScalarField make_field(int n, double d, std::uint64_t seed);

constexpr double kWindowFlatFraction = 0.70;

double window_weight(double t);

// Bilinear interpolation. Throws DomainError outside the unit square.
double eval(const ScalarField& f, Point p);

// Gradient of the bilinear interpolant. On grid lines, where the interpolant
// has a kink, the two one-sided derivatives are averaged.
Vec2 grad(const ScalarField& f, Point p);

bool in_domain(Point p);

// Binary archive: magic, n, d, seed, window flag, then n*n little-endian doubles.
void save_field(const ScalarField& f, const std::filesystem::path& path);
ScalarField load_field(const std::filesystem::path& path);

// Downsampled (<= max_side per axis) grid with values rounded to 4 decimals.
nlohmann::json field_to_json(const ScalarField& f, int max_side = 128);

}  // namespace recon

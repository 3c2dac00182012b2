#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "recon/field.hpp"
#include "recon/topology.hpp"

namespace recon::test {

// Sum of Gaussian bumps {cx, cy, width, amplitude} on a small tilted
// pedestal, tapered to zero at the boundary like the generated fields. The
// tilt breaks mirror symmetries that would produce exact ties.
inline ScalarField bumps(int n, const std::vector<std::array<double, 4>>& spec) {
    std::vector<double> v(static_cast<std::size_t>(n) * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double x = i / double(n - 1), y = j / double(n - 1);
            double s = 0.05 + 1e-3 * (0.31 * x + 0.17 * y);
            for (const auto& [cx, cy, w, a] : spec)
                s += a * std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (2 * w * w));
            v[static_cast<std::size_t>(j) * n + i] = s * window_weight(x) * window_weight(y);
        }
    return ScalarField(n, v, 0.5, 0, true);
}

template <class F>
ScalarField from_fn(int n, F fn) {
    std::vector<double> v(static_cast<std::size_t>(n) * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(j) * n + i] = fn(i / double(n - 1), j / double(n - 1));
    return ScalarField(n, std::move(v), 0.5, 0, false);
}

inline ScalarField two_bumps(int n = 129) { return bumps(n, {{0.3, 0.5, 0.1, 1.0}, {0.72, 0.5, 0.1, 0.8}}); }

// B and C merge first, A joins at a lower saddle: the tree has an arc
// between two saddles.
inline ScalarField three_bumps(int n = 129) {
    return bumps(n, {{0.25, 0.5, 0.09, 1.0}, {0.7, 0.33, 0.08, 0.9}, {0.7, 0.67, 0.08, 0.85}});
}

inline std::vector<int> nodes_of_kind(const ContourTree& tree, NodeKind kind) {
    std::vector<int> out;
    for (std::size_t k = 0; k < tree.nodes().size(); ++k)
        if (tree.nodes()[k].kind == kind) out.push_back(static_cast<int>(k));
    return out;
}

}  // namespace recon::test

#pragma once

// Reference computations that share no code with the library under test.

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "cfptas/lattice.hpp"
#include "cfptas/model.hpp"

namespace oracle {

inline cfptas::LatticeRegion box(std::int64_t rows, std::int64_t cols) {
    const std::int64_t e[] = {rows, cols};
    return cfptas::LatticeRegion::box(e);
}

/// Classical energy of a spin configuration on a 2d box with every site outside the box
/// fixed to `outer`: sum of phi over the region plus (phi - e0) over the outer shell.
/// Patterns are (centre, +x, -x, +y, -y).
inline double classical_energy(const cfptas::Model& m, std::int64_t rows, std::int64_t cols,
                               const std::vector<int>& spins, int outer) {
    auto spin = [&](std::int64_t r, std::int64_t c) {
        if (r < 0 || c < 0 || r >= rows || c >= cols) return outer;
        return spins[static_cast<std::size_t>(r * cols + c)];
    };
    auto phi = [&](std::int64_t r, std::int64_t c) {
        const std::vector<int> p{spin(r, c), spin(r + 1, c), spin(r - 1, c), spin(r, c + 1), spin(r, c - 1)};
        return m.phi_of(p);
    };
    double e = 0.0;
    for (std::int64_t r = -1; r <= rows; ++r) {
        for (std::int64_t c = -1; c <= cols; ++c) {
            const bool inside = r >= 0 && c >= 0 && r < rows && c < cols;
            if (inside) {
                e += phi(r, c);
                continue;
            }
            const bool touches = (r >= 0 && r < rows && (c == -1 || c == cols)) ||
                                 (c >= 0 && c < cols && (r == -1 || r == rows));
            if (touches) e += phi(r, c) - m.e0;
        }
    }
    return e;
}

/// Z = sum over classical configurations of exp(-beta E).
inline double classical_partition(const cfptas::Model& m, std::int64_t rows, std::int64_t cols, int outer,
                                  double beta) {
    const auto n = static_cast<std::size_t>(rows * cols);
    std::vector<int> spins(n, 0);
    double z = 0.0;
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= static_cast<std::size_t>(m.d);
    for (std::size_t code = 0; code < total; ++code) {
        std::size_t rest = code;
        for (std::size_t i = 0; i < n; ++i) {
            spins[i] = static_cast<int>(rest % m.d);
            rest /= m.d;
        }
        z += std::exp(-beta * classical_energy(m, rows, cols, spins, outer));
    }
    return z;
}

/// Signed count of spanning connected edge subsets by direct enumeration of all 2^|E| subsets.
inline double brute_spanning_connected(int n, const std::vector<std::pair<int, int>>& edges) {
    double total = 0.0;
    const std::size_t count = edges.size();
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << count); ++mask) {
        std::vector<int> parent(n);
        for (int i = 0; i < n; ++i) parent[i] = i;
        auto find = [&](int x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        int parts = n, used = 0;
        for (std::size_t e = 0; e < count; ++e) {
            if (!(mask >> e & 1U)) continue;
            ++used;
            const int a = find(edges[e].first), b = find(edges[e].second);
            if (a != b) {
                parent[a] = b;
                --parts;
            }
        }
        if (parts == 1) total += (used % 2 == 0) ? 1.0 : -1.0;
    }
    return total;
}

}  // namespace oracle

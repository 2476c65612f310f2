#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cfptas/contour.hpp"
#include "cfptas/lattice.hpp"

namespace cfptas {

/// Simple undirected graph on at most 32 vertices, adjacency as bitmasks.
struct SmallGraph {
    int n = 0;
    std::vector<std::uint32_t> adj;

    explicit SmallGraph(int vertices = 0) : n(vertices), adj(static_cast<std::size_t>(vertices), 0U) {}
    void add_edge(int a, int b) {
        adj[a] |= 1U << b;
        adj[b] |= 1U << a;
    }
    bool connected() const;
};

/// Signed count of spanning connected edge subsets, sum (-1)^{|E'|}.
double spanning_connected_sum(const SmallGraph& h);

/// Ursell function phi(H) = spanning_connected_sum(H) / |V(H)|!. Zero for disconnected H.
double ursell(const SmallGraph& h);

/// Unordered multiset of contours with connected incompatibility graph.
/// `coefficient` = c(H) / prod(multiplicity!) so that summing coefficient * prod(w) over
/// multisets equals the ordered-tuple sum of phi(H) * prod(w).
struct Cluster {
    std::vector<std::size_t> members;  // indices into the contour list, sorted
    std::size_t size = 0;              // total support size
    double coefficient = 0.0;
};

/// Incompatible partners of every contour in the list (each contour includes itself).
std::vector<std::vector<std::size_t>> incompatibility_lists(const SpaceTimeRegion& st, std::span<const Contour> contours);

/// All clusters with total size < n drawn from the contours with `allowed[i]` set (all when
/// `allowed` is empty). Sorted by (size, members).
std::vector<Cluster> enumerate_clusters(std::span<const Contour> contours,
                                        const std::vector<std::vector<std::size_t>>& incompatible, std::size_t n,
                                        std::span<const char> allowed = {});

std::vector<Cluster> enumerate_clusters(const SpaceTimeRegion& st, std::span<const Contour> contours, std::size_t n);

}  // namespace cfptas

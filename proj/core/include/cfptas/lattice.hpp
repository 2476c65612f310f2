#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace cfptas {

inline constexpr int kMaxDim = 6;

/// A point of Z^nu; coordinates past the region dimension are zero.
using Coord = std::array<std::int64_t, kMaxDim>;

/// Nearest-neighbour edge {a, b} with b = a + e_direction.
struct LatticeEdge {
    std::size_t a;
    std::size_t b;
    int direction;
};

/// A finite induced subgraph of Z^nu. Immutable after construction.
class LatticeRegion {
public:
    LatticeRegion(int nu, std::vector<Coord> vertices);

    /// Rectangular block [0, extents[0]) x ... x [0, extents[nu-1]).
    static LatticeRegion box(std::span<const std::int64_t> extents);

    int dimension() const noexcept { return nu_; }
    std::size_t size() const noexcept { return vertices_.size(); }
    const Coord& vertex(std::size_t i) const { return vertices_.at(i); }
    const std::vector<Coord>& vertices() const noexcept { return vertices_; }
    const std::vector<LatticeEdge>& edges() const noexcept { return edges_; }

    std::optional<std::size_t> index_of(const Coord& c) const;

    /// Index of v + sign * e_direction, or -1 when that point lies outside the region.
    long neighbor(std::size_t v, int direction, int sign) const {
        return neighbor_[v * 2 * nu_ + 2 * direction + (sign > 0 ? 0 : 1)];
    }

    /// Exterior boundary of the whole region, sorted.
    std::vector<Coord> outer_shell() const;

    /// True when every outer-shell vertex touches at most one region vertex and
    /// Z^nu minus the region is connected (no holes).
    bool is_boundary_simple() const;

    /// Connectivity of the induced subgraph on `subset` (vertex indices). Empty is connected.
    bool is_connected(std::span<const std::size_t> subset) const;

private:
    int nu_;
    std::vector<Coord> vertices_;
    std::vector<std::size_t> sorted_;  // permutation sorting vertices_ lexicographically
    std::vector<LatticeEdge> edges_;
    std::vector<long> neighbor_;
};

Coord shifted(const Coord& c, int direction, int sign);

struct BoundarySets {
    /// Edges of Z^nu with exactly one endpoint in U, as (inside, outside) pairs.
    std::vector<std::pair<Coord, Coord>> edges;
    std::vector<Coord> interior;  // vertices of U with a neighbour outside U
    std::vector<Coord> exterior;  // vertices outside U with a neighbour in U
};

/// Boundary of U (indices into `region`) taken in the infinite lattice Z^nu.
BoundarySets boundary_sets(const LatticeRegion& region, std::span<const std::size_t> subset);

/// A vertex of Z^nu x (Z / mZ).
struct SpaceTimePoint {
    Coord x{};
    int t = 0;
    auto operator<=>(const SpaceTimePoint&) const = default;
};

/// Complement of a finite set in Z^nu_m split into the finite (interior) components and
/// the unique infinite one. The exterior is materialized inside the bounding box of the
/// set grown by one layer in every spatial direction.
struct ComponentSplit {
    std::vector<std::vector<SpaceTimePoint>> interior;
    std::vector<SpaceTimePoint> exterior;
};

/// m = 1 is the plain lattice Z^nu (no temporal edges).
ComponentSplit complement_components(int nu, int m, std::span<const SpaceTimePoint> set);

/// The space-time lattice V x Z/mZ with periodic temporal edges.
/// Cell ids are t * |V| + v for t in [0, m).
class SpaceTimeRegion {
public:
    SpaceTimeRegion(LatticeRegion base, int m);

    const LatticeRegion& base() const noexcept { return base_; }
    int slices() const noexcept { return m_; }
    std::size_t size() const noexcept { return base_.size() * static_cast<std::size_t>(m_); }
    std::size_t cell(std::size_t v, int t) const { return static_cast<std::size_t>(t) * base_.size() + v; }
    std::size_t site(std::size_t cell) const { return cell % base_.size(); }
    int slice(std::size_t cell) const { return static_cast<int>(cell / base_.size()); }
    SpaceTimePoint point(std::size_t cell) const { return {base_.vertex(site(cell)), slice(cell)}; }
    std::optional<std::size_t> index_of(const SpaceTimePoint& p) const;

    /// Deduplicated neighbours (spatial, then temporal).
    const std::vector<std::size_t>& neighbors(std::size_t cell) const { return adjacency_[cell]; }

    std::size_t spatial_edge_count() const noexcept { return base_.edges().size() * m_; }
    /// One temporal edge {(v,t),(v,t+1 mod m)} per cell for m >= 2, none for m = 1.
    std::size_t temporal_edge_count() const noexcept { return m_ >= 2 ? size() : 0; }

    bool is_connected(std::span<const std::size_t> cells) const;

    /// Interior components (in Z^nu_m) of a set of cells, as sorted cell-id lists.
    /// Throws ComputationError when an interior point falls outside the region.
    std::vector<std::vector<std::size_t>> interior_components(std::span<const std::size_t> cells) const;

private:
    LatticeRegion base_;
    int m_;
    std::vector<std::vector<std::size_t>> adjacency_;
};

}  // namespace cfptas

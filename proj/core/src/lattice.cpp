#include "cfptas/lattice.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <string>

#include "cfptas/errors.hpp"

namespace cfptas {
namespace {

constexpr std::int64_t kCoordLimit = std::int64_t{1} << 60;

bool less_in_dim(const Coord& a, const Coord& b) { return a < b; }

}  // namespace

Coord shifted(const Coord& c, int direction, int sign) {
    Coord out = c;
    out[direction] += sign;
    return out;
}

LatticeRegion::LatticeRegion(int nu, std::vector<Coord> vertices) : nu_(nu), vertices_(std::move(vertices)) {
    if (nu < 2) throw ValidationError("lattice dimension must be at least 2, got " + std::to_string(nu));
    if (nu > kMaxDim) throw ValidationError("lattice dimension above supported maximum " + std::to_string(kMaxDim));
    for (const auto& c : vertices_) {
        for (int k = 0; k < kMaxDim; ++k) {
            if (k >= nu && c[k] != 0) throw ValidationError("coordinate beyond lattice dimension is non-zero");
            if (c[k] > kCoordLimit || c[k] < -kCoordLimit) throw ValidationError("coordinate out of range");
        }
    }
    sorted_.resize(vertices_.size());
    std::iota(sorted_.begin(), sorted_.end(), std::size_t{0});
    std::sort(sorted_.begin(), sorted_.end(),
              [&](std::size_t a, std::size_t b) { return less_in_dim(vertices_[a], vertices_[b]); });
    for (std::size_t i = 1; i < sorted_.size(); ++i) {
        if (vertices_[sorted_[i]] == vertices_[sorted_[i - 1]]) throw ValidationError("duplicate vertex in region");
    }

    neighbor_.assign(vertices_.size() * 2 * nu_, -1);
    for (std::size_t v = 0; v < vertices_.size(); ++v) {
        for (int k = 0; k < nu_; ++k) {
            for (int sign : {+1, -1}) {
                if (auto j = index_of(shifted(vertices_[v], k, sign))) {
                    neighbor_[v * 2 * nu_ + 2 * k + (sign > 0 ? 0 : 1)] = static_cast<long>(*j);
                    if (sign > 0) edges_.push_back({v, *j, k});
                }
            }
        }
    }
}

LatticeRegion LatticeRegion::box(std::span<const std::int64_t> extents) {
    const int nu = static_cast<int>(extents.size());
    std::size_t total = 1;
    for (auto e : extents) {
        if (e <= 0) throw ValidationError("box extents must be positive");
        total *= static_cast<std::size_t>(e);
    }
    std::vector<Coord> vs;
    vs.reserve(total);
    for (std::size_t flat = 0; flat < total; ++flat) {
        Coord c{};
        std::size_t rest = flat;
        for (int k = nu - 1; k >= 0; --k) {
            c[k] = static_cast<std::int64_t>(rest % static_cast<std::size_t>(extents[k]));
            rest /= static_cast<std::size_t>(extents[k]);
        }
        vs.push_back(c);
    }
    return LatticeRegion(nu, std::move(vs));
}

std::optional<std::size_t> LatticeRegion::index_of(const Coord& c) const {
    auto it = std::lower_bound(sorted_.begin(), sorted_.end(), c,
                               [&](std::size_t idx, const Coord& key) { return less_in_dim(vertices_[idx], key); });
    if (it != sorted_.end() && vertices_[*it] == c) return *it;
    return std::nullopt;
}

std::vector<Coord> LatticeRegion::outer_shell() const {
    std::set<Coord> shell;
    for (std::size_t v = 0; v < size(); ++v) {
        for (int k = 0; k < nu_; ++k) {
            for (int sign : {+1, -1}) {
                if (neighbor(v, k, sign) < 0) shell.insert(shifted(vertices_[v], k, sign));
            }
        }
    }
    return {shell.begin(), shell.end()};
}

bool LatticeRegion::is_boundary_simple() const {
    std::map<Coord, int> touches;
    for (std::size_t v = 0; v < size(); ++v) {
        for (int k = 0; k < nu_; ++k) {
            for (int sign : {+1, -1}) {
                if (neighbor(v, k, sign) < 0 && ++touches[shifted(vertices_[v], k, sign)] > 1) return false;
            }
        }
    }
    std::vector<SpaceTimePoint> pts;
    pts.reserve(size());
    for (const auto& c : vertices_) pts.push_back({c, 0});
    return complement_components(nu_, 1, pts).interior.empty();
}

bool LatticeRegion::is_connected(std::span<const std::size_t> subset) const {
    if (subset.empty()) return true;
    std::vector<char> in(size(), 0), seen(size(), 0);
    for (auto v : subset) in[v] = 1;
    std::vector<std::size_t> stack{subset.front()};
    seen[subset.front()] = 1;
    std::size_t reached = 0;
    while (!stack.empty()) {
        auto v = stack.back();
        stack.pop_back();
        ++reached;
        for (int k = 0; k < nu_; ++k) {
            for (int sign : {+1, -1}) {
                long u = neighbor(v, k, sign);
                if (u >= 0 && in[u] && !seen[u]) {
                    seen[u] = 1;
                    stack.push_back(static_cast<std::size_t>(u));
                }
            }
        }
    }
    return reached == subset.size();
}

BoundarySets boundary_sets(const LatticeRegion& region, std::span<const std::size_t> subset) {
    BoundarySets out;
    std::set<Coord> members;
    for (auto v : subset) members.insert(region.vertex(v));
    std::set<Coord> interior, exterior;
    for (const auto& c : members) {
        for (int k = 0; k < region.dimension(); ++k) {
            for (int sign : {+1, -1}) {
                Coord n = shifted(c, k, sign);
                if (!members.contains(n)) {
                    out.edges.emplace_back(c, n);
                    interior.insert(c);
                    exterior.insert(n);
                }
            }
        }
    }
    out.interior.assign(interior.begin(), interior.end());
    out.exterior.assign(exterior.begin(), exterior.end());
    return out;
}

ComponentSplit complement_components(int nu, int m, std::span<const SpaceTimePoint> set) {
    ComponentSplit out;
    if (set.empty()) return out;
    Coord lo = set.front().x, hi = set.front().x;
    for (const auto& p : set) {
        for (int k = 0; k < nu; ++k) {
            lo[k] = std::min(lo[k], p.x[k]);
            hi[k] = std::max(hi[k], p.x[k]);
        }
    }
    std::array<std::size_t, kMaxDim> ext{}, stride{};
    std::size_t volume = static_cast<std::size_t>(m);
    for (int k = nu - 1; k >= 0; --k) {
        ext[k] = static_cast<std::size_t>(hi[k] - lo[k] + 3);
        stride[k] = volume;
        volume *= ext[k];
    }
    // flat = t + m * (mixed radix spatial index); spatial coordinate shifted by lo - 1
    auto flat_of = [&](const Coord& x, int t) {
        std::size_t f = static_cast<std::size_t>(t);
        for (int k = 0; k < nu; ++k) f += static_cast<std::size_t>(x[k] - lo[k] + 1) * stride[k];
        return f;
    };
    auto point_of = [&](std::size_t f) {
        SpaceTimePoint p;
        p.t = static_cast<int>(f % static_cast<std::size_t>(m));
        for (int k = 0; k < nu; ++k) {
            p.x[k] = static_cast<std::int64_t>((f / stride[k]) % ext[k]) + lo[k] - 1;
        }
        return p;
    };
    std::vector<int> label(volume, -1);
    for (const auto& p : set) label[flat_of(p.x, p.t)] = -2;

    auto on_box_boundary = [&](std::size_t f) {
        for (int k = 0; k < nu; ++k) {
            auto c = (f / stride[k]) % ext[k];
            if (c == 0 || c + 1 == ext[k]) return true;
        }
        return false;
    };

    std::vector<std::vector<std::size_t>> comps;
    std::vector<char> is_exterior;
    std::vector<std::size_t> stack;
    for (std::size_t f0 = 0; f0 < volume; ++f0) {
        if (label[f0] != -1) continue;
        const int id = static_cast<int>(comps.size());
        comps.emplace_back();
        bool exterior = false;
        label[f0] = id;
        stack.assign(1, f0);
        while (!stack.empty()) {
            auto f = stack.back();
            stack.pop_back();
            comps.back().push_back(f);
            if (on_box_boundary(f)) exterior = true;
            auto visit = [&](std::size_t g) {
                if (label[g] == -1) {
                    label[g] = id;
                    stack.push_back(g);
                }
            };
            for (int k = 0; k < nu; ++k) {
                auto c = (f / stride[k]) % ext[k];
                if (c > 0) visit(f - stride[k]);
                if (c + 1 < ext[k]) visit(f + stride[k]);
            }
            if (m >= 2) {
                auto t = f % static_cast<std::size_t>(m);
                auto base = f - t;
                visit(base + (t + 1) % m);
                visit(base + (t + m - 1) % m);
            }
        }
        is_exterior.push_back(exterior ? 1 : 0);
    }
    // Every box-boundary cell belongs to the complement and the boundary layer is connected,
    // so exactly one component is flagged exterior.
    for (std::size_t i = 0; i < comps.size(); ++i) {
        std::vector<SpaceTimePoint> pts;
        pts.reserve(comps[i].size());
        for (auto f : comps[i]) pts.push_back(point_of(f));
        std::sort(pts.begin(), pts.end());
        if (is_exterior[i]) {
            out.exterior = std::move(pts);
        } else {
            out.interior.push_back(std::move(pts));
        }
    }
    std::sort(out.interior.begin(), out.interior.end());
    return out;
}

SpaceTimeRegion::SpaceTimeRegion(LatticeRegion base, int m) : base_(std::move(base)), m_(m) {
    if (m < 1) throw ValidationError("number of time slices must be at least 1");
    adjacency_.resize(size());
    const auto n = base_.size();
    for (int t = 0; t < m_; ++t) {
        for (std::size_t v = 0; v < n; ++v) {
            auto& adj = adjacency_[cell(v, t)];
            for (int k = 0; k < base_.dimension(); ++k) {
                for (int sign : {+1, -1}) {
                    long u = base_.neighbor(v, k, sign);
                    if (u >= 0) adj.push_back(cell(static_cast<std::size_t>(u), t));
                }
            }
            if (m_ >= 2) {
                adj.push_back(cell(v, (t + 1) % m_));
                if (m_ > 2) adj.push_back(cell(v, (t + m_ - 1) % m_));
            }
        }
    }
}

std::optional<std::size_t> SpaceTimeRegion::index_of(const SpaceTimePoint& p) const {
    if (p.t < 0 || p.t >= m_) return std::nullopt;
    auto v = base_.index_of(p.x);
    if (!v) return std::nullopt;
    return cell(*v, p.t);
}

bool SpaceTimeRegion::is_connected(std::span<const std::size_t> cells) const {
    if (cells.empty()) return true;
    std::vector<char> in(size(), 0), seen(size(), 0);
    for (auto c : cells) in[c] = 1;
    std::vector<std::size_t> stack{cells.front()};
    seen[cells.front()] = 1;
    std::size_t reached = 0;
    while (!stack.empty()) {
        auto c = stack.back();
        stack.pop_back();
        ++reached;
        for (auto u : adjacency_[c]) {
            if (in[u] && !seen[u]) {
                seen[u] = 1;
                stack.push_back(u);
            }
        }
    }
    return reached == cells.size();
}

std::vector<std::vector<std::size_t>> SpaceTimeRegion::interior_components(std::span<const std::size_t> cells) const {
    std::vector<SpaceTimePoint> pts;
    pts.reserve(cells.size());
    for (auto c : cells) pts.push_back(point(c));
    auto split = complement_components(base_.dimension(), m_, pts);
    std::vector<std::vector<std::size_t>> out;
    out.reserve(split.interior.size());
    for (const auto& comp : split.interior) {
        std::vector<std::size_t> ids;
        ids.reserve(comp.size());
        for (const auto& p : comp) {
            auto id = index_of(p);
            if (!id) throw ComputationError("contour interior leaves the region; region must be hole-free");
            ids.push_back(*id);
        }
        std::sort(ids.begin(), ids.end());
        out.push_back(std::move(ids));
    }
    return out;
}

}  // namespace cfptas

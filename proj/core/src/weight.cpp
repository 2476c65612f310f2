#include "cfptas/weight.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <set>
#include <string>

#include "cfptas/errors.hpp"

namespace cfptas {
namespace {

constexpr int kUnset = -2;

std::size_t power_of(int d, std::size_t k, std::size_t cap) {
    std::size_t dim = 1;
    for (std::size_t i = 0; i < k; ++i) {
        dim *= static_cast<std::size_t>(d);
        if (dim > cap) throw ComputationError("transfer block dimension exceeds cap " + std::to_string(cap));
    }
    return dim;
}

// Spin at a lattice point for one slice: hole spins come from `hole_config`, region spins
// from `slice_spins`, everything outside the region is `outer_spin`.
struct SliceView {
    const LatticeRegion& region;
    std::span<const int> slice_spins;
    int outer_spin;
    std::span<const long> hole_pos;  // per region vertex, position in the hole list or -1

    int spin(long v, std::span<const int> hole_config) const {
        if (v < 0) return outer_spin;
        if (hole_pos[v] >= 0) return hole_config[hole_pos[v]];
        const int s = slice_spins[v];
        if (s < 0) throw ComputationError("transfer block conditioning is incomplete");
        return s;
    }
};

double phi_at_vertex(const Model& model, const SliceView& view, std::size_t v, std::span<const int> config,
                     std::vector<int>& pattern) {
    pattern[0] = view.spin(static_cast<long>(v), config);
    for (int k = 0; k < model.nu; ++k) {
        pattern[1 + 2 * k] = view.spin(view.region.neighbor(v, k, +1), config);
        pattern[2 + 2 * k] = view.spin(view.region.neighbor(v, k, -1), config);
    }
    return model.phi_of(pattern);
}

double phi_at_shell(const Model& model, const SliceView& view, const Coord& c, std::span<const int> config,
                    std::vector<int>& pattern) {
    auto at = [&](const Coord& p) {
        auto idx = view.region.index_of(p);
        return view.spin(idx ? static_cast<long>(*idx) : -1, config);
    };
    pattern[0] = view.outer_spin;
    for (int k = 0; k < model.nu; ++k) {
        pattern[1 + 2 * k] = at(shifted(c, k, +1));
        pattern[2 + 2 * k] = at(shifted(c, k, -1));
    }
    return model.phi_of(pattern) - model.e0;
}

// Operator on the hole space acting as `op` (d^2 x d^2 on (low, high)) on positions i, j.
ComplexMatrix embed_pair(const ComplexMatrix& op, int d, std::size_t k, std::size_t i, std::size_t j) {
    const std::size_t dim = power_of(d, k, SIZE_MAX);
    std::vector<std::size_t> stride(k, 1);
    for (std::size_t p = 1; p < k; ++p) stride[p] = stride[p - 1] * static_cast<std::size_t>(d);
    ComplexMatrix out = ComplexMatrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (std::size_t col = 0; col < dim; ++col) {
        const int si = static_cast<int>((col / stride[i]) % d), sj = static_cast<int>((col / stride[j]) % d);
        const std::size_t rest = col - si * stride[i] - sj * stride[j];
        for (int ti = 0; ti < d; ++ti) {
            for (int tj = 0; tj < d; ++tj) {
                const Complex amp = op(ti * d + tj, si * d + sj);
                if (amp != Complex{0.0, 0.0}) out(rest + ti * stride[i] + tj * stride[j], col) += amp;
            }
        }
    }
    return out;
}

ComplexMatrix embed_single(const ComplexMatrix& op, int d, std::size_t k, std::size_t i) {
    const std::size_t dim = power_of(d, k, SIZE_MAX);
    std::size_t stride = 1;
    for (std::size_t p = 0; p < i; ++p) stride *= static_cast<std::size_t>(d);
    ComplexMatrix out = ComplexMatrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (std::size_t col = 0; col < dim; ++col) {
        const int s = static_cast<int>((col / stride) % d);
        const std::size_t rest = col - s * stride;
        for (int t = 0; t < d; ++t) {
            if (op(t, s) != Complex{0.0, 0.0}) out(rest + t * stride, col) += op(t, s);
        }
    }
    return out;
}

// Sum over U' of (-1)^{|U \ U'|} exp(-beta_hat (D + lambda sum_{e in E(U')} Psi_e)) for one
// connected group of holes; E(U') holds the edges whose region endpoints all lie in U'.
ComplexMatrix block_matrix(const Model& model, const LatticeRegion& region, std::span<const std::size_t> holes,
                           std::span<const int> slice_spins, int outer_spin, double beta_hat) {
    const std::size_t k = holes.size();
    const int d = model.d;
    const std::size_t dim = power_of(d, k, kDefaultMatrixCap);
    if (k > 20) throw ComputationError("too many quantum sites in one transfer block");

    std::vector<long> hole_pos(region.size(), -1);
    for (std::size_t i = 0; i < k; ++i) hole_pos[holes[i]] = static_cast<long>(i);
    const SliceView view{region, slice_spins, outer_spin, hole_pos};

    // N[U] inside the region and on the shell.
    std::set<std::size_t> inner;
    std::set<Coord> shell;
    for (auto v : holes) {
        inner.insert(v);
        for (int dir = 0; dir < model.nu; ++dir) {
            for (int sign : {+1, -1}) {
                const long u = region.neighbor(v, dir, sign);
                if (u >= 0) {
                    inner.insert(static_cast<std::size_t>(u));
                } else {
                    shell.insert(shifted(region.vertex(v), dir, sign));
                }
            }
        }
    }
    Eigen::VectorXd diag(static_cast<Eigen::Index>(dim));
    std::vector<int> config(k), pattern(model.pattern_size());
    for (std::size_t idx = 0; idx < dim; ++idx) {
        std::size_t rest = idx;
        for (auto& s : config) {
            s = static_cast<int>(rest % d);
            rest /= d;
        }
        double e = 0.0;
        for (auto x : inner) e += phi_at_vertex(model, view, x, config, pattern);
        for (const auto& c : shell) e += phi_at_shell(model, view, c, config, pattern);
        diag(static_cast<Eigen::Index>(idx)) = e;
    }

    // Edges with a nonzero operator, each with the mask of holes it touches.
    std::vector<ComplexMatrix> ops;
    std::vector<std::uint32_t> touch;
    if (model.lambda != Complex{0.0, 0.0}) {
        for (const auto& e : region.edges()) {
            if (hole_pos[e.a] < 0 || hole_pos[e.b] < 0) continue;
            const auto& psi = model.psi[e.direction];
            if (psi.isZero(0.0)) continue;
            ops.push_back(embed_pair(psi, d, k, hole_pos[e.a], hole_pos[e.b]));
            touch.push_back((1U << hole_pos[e.a]) | (1U << hole_pos[e.b]));
        }
        for (std::size_t i = 0; i < k; ++i) {
            for (int dir = 0; dir < model.nu; ++dir) {
                for (int sign : {+1, -1}) {
                    if (region.neighbor(holes[i], dir, sign) >= 0) continue;
                    const ComplexMatrix partial = model.psi_partial(dir, sign > 0, outer_spin);
                    if (partial.isZero(0.0)) continue;
                    ops.push_back(embed_single(partial, d, k, i));
                    touch.push_back(1U << i);
                }
            }
        }
    }
    if (ops.size() > 62) throw ComputationError("too many perturbation edges in one transfer block");

    const Eigen::Index n = static_cast<Eigen::Index>(dim);
    ComplexMatrix base = ComplexMatrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) base(i, i) = std::exp(-beta_hat * diag(i));

    std::map<std::uint64_t, ComplexMatrix> by_edges;
    ComplexMatrix total = ComplexMatrix::Zero(n, n);
    const std::uint32_t full = k == 32 ? ~0U : ((1U << k) - 1U);
    for (std::uint32_t sub = 0;; sub = (sub - full) & full) {
        std::uint64_t mask = 0;
        for (std::size_t e = 0; e < ops.size(); ++e) {
            if ((touch[e] & ~sub) == 0) mask |= std::uint64_t{1} << e;
        }
        auto it = by_edges.find(mask);
        if (it == by_edges.end()) {
            ComplexMatrix value;
            if (mask == 0) {
                value = base;
            } else {
                ComplexMatrix h = ComplexMatrix::Zero(n, n);
                for (std::size_t e = 0; e < ops.size(); ++e) {
                    if (mask >> e & 1U) h += ops[e];
                }
                h *= model.lambda;
                h.diagonal() += diag.cast<Complex>();
                value = matrix_exponential(-beta_hat * h);
            }
            it = by_edges.emplace(mask, std::move(value)).first;
        }
        const int missing = static_cast<int>(k) - std::popcount(sub);
        if (missing % 2 == 0) {
            total += it->second;
        } else {
            total -= it->second;
        }
        if (sub == full) break;
    }
    return total;
}

// Connected components of holes under N[u] cap N[v] nonempty (L1 distance <= 2).
std::vector<std::vector<std::size_t>> hole_groups(const LatticeRegion& region, std::span<const std::size_t> holes) {
    const std::size_t k = holes.size();
    auto close = [&](std::size_t a, std::size_t b) {
        const auto& x = region.vertex(holes[a]);
        const auto& y = region.vertex(holes[b]);
        std::int64_t dist = 0;
        for (int i = 0; i < region.dimension(); ++i) dist += std::llabs(x[i] - y[i]);
        return dist <= 2;
    };
    std::vector<int> comp(k, -1);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t s = 0; s < k; ++s) {
        if (comp[s] >= 0) continue;
        const int id = static_cast<int>(out.size());
        out.emplace_back();
        std::vector<std::size_t> stack{s};
        comp[s] = id;
        while (!stack.empty()) {
            const auto a = stack.back();
            stack.pop_back();
            out[id].push_back(holes[a]);
            for (std::size_t b = 0; b < k; ++b) {
                if (comp[b] < 0 && close(a, b)) {
                    comp[b] = id;
                    stack.push_back(b);
                }
            }
        }
        std::sort(out[id].begin(), out[id].end());
    }
    return out;
}

}  // namespace

TransferBlock transfer_block(const Model& model, const LatticeRegion& region, std::span<const std::size_t> holes,
                             std::span<const int> slice_spins, int outer_spin, double beta_hat) {
    TransferBlock out;
    out.holes.assign(holes.begin(), holes.end());
    const std::size_t k = holes.size();
    const std::size_t dim = power_of(model.d, k, kDefaultMatrixCap);
    out.matrix = ComplexMatrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    if (k == 0) return out;

    std::vector<long> pos(region.size(), -1);
    for (std::size_t i = 0; i < k; ++i) pos[holes[i]] = static_cast<long>(i);
    std::vector<std::size_t> stride(k, 1);
    for (std::size_t i = 1; i < k; ++i) stride[i] = stride[i - 1] * static_cast<std::size_t>(model.d);

    for (const auto& group : hole_groups(region, holes)) {
        const ComplexMatrix b = block_matrix(model, region, group, slice_spins, outer_spin, beta_hat);
        // Lift the group block to the full hole space.
        ComplexMatrix lifted = ComplexMatrix::Zero(out.matrix.rows(), out.matrix.cols());
        for (std::size_t row = 0; row < dim; ++row) {
            for (std::size_t col = 0; col < dim; ++col) {
                std::size_t br = 0, bc = 0, mult = 1;
                bool same_elsewhere = true;
                for (std::size_t i = 0; i < k; ++i) {
                    const auto sr = (row / stride[i]) % model.d, sc = (col / stride[i]) % model.d;
                    const auto it = std::find(group.begin(), group.end(), holes[i]);
                    if (it == group.end()) {
                        same_elsewhere = same_elsewhere && sr == sc;
                    }
                }
                if (!same_elsewhere) continue;
                for (auto v : group) {
                    const auto i = static_cast<std::size_t>(pos[v]);
                    br += ((row / stride[i]) % model.d) * mult;
                    bc += ((col / stride[i]) % model.d) * mult;
                    mult *= static_cast<std::size_t>(model.d);
                }
                lifted(row, col) = b(br, bc);
            }
        }
        out.matrix = lifted * out.matrix;
    }
    return out;
}

WeightEngine::WeightEngine(const Model& model, const SpaceTimeRegion& st, double beta_hat, std::size_t cap)
    : model_(model), st_(st), beta_hat_(beta_hat), cap_(cap) {
    if (!(beta_hat > 0.0)) throw ValidationError("beta_hat must be positive");
    if (st.base().dimension() != model.nu) throw ValidationError("region dimension differs from model dimension");
    if (!st.base().is_boundary_simple()) {
        throw ComputationError("contour weights need a region whose outer shell touches each boundary site once");
    }
    quantum_ = model.lambda != Complex{0.0, 0.0} && !model.psi_is_zero();
}

std::size_t WeightEngine::memo_size() const {
    std::lock_guard lock(mutex_);
    return weights_.size();
}

ComplexMatrix WeightEngine::component_block(std::span<const std::size_t> holes, std::span<const int> slice_spins,
                                            int outer_spin) {
    const auto& region = st_.base();
    const int nu = region.dimension();
    const Coord anchor = region.vertex(holes.front());
    // Key: relative positions of the holes and of every point within distance 2 of them,
    // with its spin (-1 hole, -2 outside the region).
    std::set<Coord> near;
    for (auto v : holes) {
        const Coord& c = region.vertex(v);
        near.insert(c);
        for (int a = 0; a < nu; ++a) {
            for (int sa : {+1, -1}) {
                const Coord c1 = shifted(c, a, sa);
                near.insert(c1);
                for (int b = 0; b < nu; ++b) {
                    for (int sb : {+1, -1}) near.insert(shifted(c1, b, sb));
                }
            }
        }
    }
    std::vector<long> hole_pos(region.size(), -1);
    for (auto v : holes) hole_pos[v] = 0;
    std::vector<std::int64_t> key{outer_spin, static_cast<std::int64_t>(holes.size())};
    for (const auto& c : near) {
        for (int i = 0; i < nu; ++i) key.push_back(c[i] - anchor[i]);
        const auto idx = region.index_of(c);
        key.push_back(!idx ? -2 : hole_pos[*idx] >= 0 ? -1 : slice_spins[*idx]);
    }
    {
        std::lock_guard lock(mutex_);
        if (auto it = blocks_.find(key); it != blocks_.end()) return it->second;
    }
    ComplexMatrix b = block_matrix(model_, region, holes, slice_spins, outer_spin, beta_hat_);
    std::lock_guard lock(mutex_);
    return blocks_.emplace(std::move(key), std::move(b)).first->second;
}

std::vector<std::int64_t> WeightEngine::key(std::span<const std::size_t> support, const CellLabelling& labels) const {
    if (support.empty()) return {labels.shell_label};
    const auto& region = st_.base();
    const int nu = region.dimension();
    Coord anchor = region.vertex(st_.site(support.front()));
    for (auto c : support) {
        const auto& x = region.vertex(st_.site(c));
        for (int i = 0; i < nu; ++i) anchor[i] = std::min(anchor[i], x[i]);
    }
    std::vector<std::vector<std::int64_t>> rows;
    for (auto c : support) {
        std::vector<std::int64_t> row{0, st_.slice(c)};
        const auto v = st_.site(c);
        for (int i = 0; i < nu; ++i) row.push_back(region.vertex(v)[i] - anchor[i]);
        std::int64_t mask = 0;
        for (int k = 0; k < nu; ++k) {
            if (region.neighbor(v, k, +1) < 0) mask |= std::int64_t{1} << (2 * k);
            if (region.neighbor(v, k, -1) < 0) mask |= std::int64_t{1} << (2 * k + 1);
        }
        row.push_back(mask);
        rows.push_back(std::move(row));
    }
    for (const auto& [c, label] : labels.neighbors) {
        std::vector<std::int64_t> row{1, st_.slice(c)};
        for (int i = 0; i < nu; ++i) row.push_back(region.vertex(st_.site(c))[i] - anchor[i]);
        row.push_back(label);
        rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end());
    std::vector<std::int64_t> out{labels.shell_label};
    for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
    return out;
}

Complex WeightEngine::weight(std::span<const std::size_t> support, const CellLabelling& labels) {
    if (support.empty()) return {1.0, 0.0};
    if (support.size() > cap_) {
        throw ComputationError("contour of size " + std::to_string(support.size()) + " exceeds the weight cap");
    }
    auto key = this->key(support, labels);
    {
        std::lock_guard lock(mutex_);
        if (auto it = weights_.find(key); it != weights_.end()) return it->second;
    }
    const Complex w = compute(support, labels);
    std::lock_guard lock(mutex_);
    weights_.emplace(std::move(key), w);
    return w;
}

Complex WeightEngine::compute(std::span<const std::size_t> support_in, const CellLabelling& labels) {
    const auto& region = st_.base();
    const int nu = region.dimension();
    const int m = st_.slices();
    const int d = model_.d;
    const std::size_t nv = region.size();
    std::vector<std::size_t> support(support_in.begin(), support_in.end());
    std::sort(support.begin(), support.end());
    const std::size_t n = support.size();

    if (labels.shell_label < 0 || labels.shell_label >= static_cast<int>(model_.ground_states.size())) {
        throw ValidationError("contour label out of range");
    }
    const int outer_spin = model_.ground_states[labels.shell_label];
    // Per cell: position in support, or the fixed spin of a labelled neighbour.
    std::vector<long> pos(st_.size(), -1);
    for (std::size_t i = 0; i < n; ++i) pos[support[i]] = static_cast<long>(i);
    std::vector<int> fixed(st_.size(), kUnset);
    for (const auto& [c, label] : labels.neighbors) {
        if (label < 0 || label >= static_cast<int>(model_.ground_states.size())) {
            throw ValidationError("contour label out of range");
        }
        fixed[c] = model_.ground_states[label];
    }

    // Allowed values per support cell before mutual constraints; kHole marks a quantum site.
    std::vector<std::vector<int>> options(n);
    std::vector<std::vector<std::size_t>> temporal(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = support[i];
        const auto v = st_.site(c);
        const int t = st_.slice(c);
        int forced = kUnset;
        bool conflict = false;
        for (int k = 0; k < nu; ++k) {
            for (int sign : {+1, -1}) {
                const long u = region.neighbor(v, k, sign);
                if (u < 0) continue;
                const auto cu = st_.cell(static_cast<std::size_t>(u), t);
                if (pos[cu] >= 0) continue;
                if (fixed[cu] == kUnset) throw ComputationError("contour labelling misses a neighbouring cell");
                if (forced != kUnset && forced != fixed[cu]) conflict = true;
                forced = fixed[cu];
            }
        }
        if (conflict) return {0.0, 0.0};
        std::vector<int> temporal_spins;
        if (m >= 2) {
            for (int dt : {+1, -1}) {
                const auto cu = st_.cell(v, (t + dt + m) % m);
                if (pos[cu] >= 0) {
                    temporal[i].push_back(cu);
                } else {
                    if (fixed[cu] == kUnset) throw ComputationError("contour labelling misses a neighbouring cell");
                    temporal_spins.push_back(fixed[cu]);
                }
            }
        }
        if (quantum_ && forced == kUnset) options[i].push_back(kHole);
        for (int s = 0; s < d; ++s) {
            if (forced != kUnset && s != forced) continue;
            if (std::any_of(temporal_spins.begin(), temporal_spins.end(), [s](int x) { return x != s; })) continue;
            options[i].push_back(s);
        }
        if (options[i].empty()) return {0.0, 0.0};
    }

    std::vector<int> sigma(n, kUnset);
    auto spin_of_cell = [&](std::size_t c) -> int { return pos[c] >= 0 ? sigma[pos[c]] : fixed[c]; };

    auto excited = [&](std::size_t i) {
        const auto v = st_.site(support[i]);
        const int t = st_.slice(support[i]);
        std::vector<int> spins{sigma[i]};
        for (int k = 0; k < nu; ++k) {
            for (int sign : {+1, -1}) {
                const long u = region.neighbor(v, k, sign);
                spins.push_back(u < 0 ? outer_spin : spin_of_cell(st_.cell(static_cast<std::size_t>(u), t)));
            }
        }
        if (std::find(spins.begin(), spins.end(), kHole) != spins.end()) return true;
        return is_excited(spins, model_);
    };

    std::vector<int> pattern(model_.pattern_size());
    Complex total{0.0, 0.0};

    auto evaluate = [&]() {
        std::vector<std::vector<std::size_t>> holes(m);
        std::vector<std::vector<char>> is_hole(m, std::vector<char>(nv, 0));
        for (std::size_t i = 0; i < n; ++i) {
            if (sigma[i] == kHole) {
                holes[st_.slice(support[i])].push_back(st_.site(support[i]));
                is_hole[st_.slice(support[i])][st_.site(support[i])] = 1;
            }
        }
        // Bond sites between slice t-1 and t: holes in both.
        std::vector<std::vector<std::size_t>> bond(m);
        for (int t = 0; t < m; ++t) {
            const int prev = (t - 1 + m) % m;
            for (auto v : holes[t]) {
                if (is_hole[prev][v]) bond[t].push_back(v);
            }
        }
        ComplexMatrix product;
        for (int t = 0; t < m; ++t) {
            std::vector<int> slice_spins(nv, -1);
            for (std::size_t v = 0; v < nv; ++v) {
                const int s = spin_of_cell(st_.cell(v, t));
                if (s >= 0) slice_spins[v] = s;
            }
            // Classical diagonal outside N[U_t], including outer-shell sites next to the support.
            std::vector<char> near_hole(nv, 0);
            for (auto v : holes[t]) {
                near_hole[v] = 1;
                for (int k = 0; k < nu; ++k) {
                    for (int sign : {+1, -1}) {
                        const long u = region.neighbor(v, k, sign);
                        if (u >= 0) near_hole[u] = 1;
                    }
                }
            }
            double energy = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (st_.slice(support[i]) != t) continue;
                const auto v = st_.site(support[i]);
                if (sigma[i] == kHole) continue;
                if (!near_hole[v]) {
                    pattern[0] = sigma[i];
                    for (int k = 0; k < nu; ++k) {
                        for (int s = 0; s < 2; ++s) {
                            const long u = region.neighbor(v, k, s == 0 ? +1 : -1);
                            pattern[1 + 2 * k + s] = u < 0 ? outer_spin : slice_spins[u];
                        }
                    }
                    energy += model_.phi_of(pattern);
                }
                for (int k = 0; k < nu; ++k) {
                    for (int s = 0; s < 2; ++s) {
                        if (region.neighbor(v, k, s == 0 ? +1 : -1) >= 0) continue;
                        // Shell site: its only region neighbour is v, in the opposite slot.
                        std::fill(pattern.begin(), pattern.end(), outer_spin);
                        pattern[1 + 2 * k + (1 - s)] = sigma[i];
                        energy += model_.phi_of(pattern) - model_.e0;
                    }
                }
            }
            const Complex diag_factor = std::exp(-beta_hat_ * energy);

            const auto& in_bond = bond[t];
            const auto& out_bond = bond[(t + 1) % m];
            const std::size_t rows = power_of(d, in_bond.size(), kDefaultMatrixCap);
            const std::size_t cols = power_of(d, out_bond.size(), kDefaultMatrixCap);
            ComplexMatrix mt = ComplexMatrix::Constant(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols),
                                                       diag_factor);
            const int prev = (t - 1 + m) % m;
            const int next = (t + 1) % m;
            for (const auto& group : hole_groups(region, holes[t])) {
                const ComplexMatrix b = component_block(group, slice_spins, outer_spin);
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t col = 0; col < cols; ++col) {
                        std::size_t br = 0, bc = 0, mult = 1;
                        for (auto v : group) {
                            int sb, sk;
                            auto ib = std::find(in_bond.begin(), in_bond.end(), v);
                            if (ib != in_bond.end()) {
                                std::size_t p = static_cast<std::size_t>(ib - in_bond.begin());
                                std::size_t idx = r;
                                for (std::size_t q = 0; q < p; ++q) idx /= d;
                                sb = static_cast<int>(idx % d);
                            } else {
                                sb = spin_of_cell(st_.cell(v, prev));
                            }
                            auto ik = std::find(out_bond.begin(), out_bond.end(), v);
                            if (ik != out_bond.end()) {
                                std::size_t p = static_cast<std::size_t>(ik - out_bond.begin());
                                std::size_t idx = col;
                                for (std::size_t q = 0; q < p; ++q) idx /= d;
                                sk = static_cast<int>(idx % d);
                            } else {
                                sk = spin_of_cell(st_.cell(v, next));
                            }
                            if (sb < 0 || sk < 0) throw ComputationError("temporal neighbour of a quantum site is unset");
                            br += static_cast<std::size_t>(sb) * mult;
                            bc += static_cast<std::size_t>(sk) * mult;
                            mult *= static_cast<std::size_t>(d);
                        }
                        mt(r, col) *= b(br, bc);
                    }
                }
            }
            product = t == 0 ? mt : ComplexMatrix(product * mt);
        }
        total += product.trace();
    };

    // Excitation of cell j is decided once its whole spatial closed neighbourhood is set.
    std::vector<std::vector<std::size_t>> decided_at(n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto v = st_.site(support[j]);
        const int t = st_.slice(support[j]);
        std::size_t last = j;
        for (int k = 0; k < nu; ++k) {
            for (int sign : {+1, -1}) {
                const long u = region.neighbor(v, k, sign);
                if (u < 0) continue;
                const long p = pos[st_.cell(static_cast<std::size_t>(u), t)];
                if (p >= 0) last = std::max(last, static_cast<std::size_t>(p));
            }
        }
        decided_at[last].push_back(j);
    }

    // Depth-first assignment with temporal constancy between classical support cells.
    auto dfs = [&](auto&& self, std::size_t i) -> void {
        if (i == n) {
            evaluate();
            return;
        }
        for (int s : options[i]) {
            if (s != kHole) {
                bool ok = true;
                for (auto cu : temporal[i]) {
                    const int other = sigma[pos[cu]];
                    if (other >= 0 && other != s) ok = false;
                }
                if (!ok) continue;
            }
            sigma[i] = s;
            if (std::all_of(decided_at[i].begin(), decided_at[i].end(), excited)) self(self, i + 1);
        }
        sigma[i] = kUnset;
    };
    dfs(dfs, 0);

    return std::exp(beta_hat_ * model_.e0 * static_cast<double>(n)) * total;
}

Complex contour_weight(const Model& model, const SpaceTimeRegion& st, const Contour& contour, double beta_hat) {
    WeightEngine engine(model, st, beta_hat);
    return engine.weight(contour);
}

DecayCheck weight_decay_check(const Model& model, Complex weight, std::size_t support_size, double beta_hat,
                              double alpha) {
    DecayCheck out;
    out.abs_weight = std::abs(weight);
    const double base = model.d * (std::exp(-alpha / (2.0 * model.nu)) + std::exp(-beta_hat * model.alpha0));
    out.bound = std::pow(base, static_cast<double>(support_size));
    const double limit = std::exp(-2.0 * (alpha + 1.0)) / (2.0 * model.nu + 1.0);
    if (beta_hat * std::abs(model.lambda) > limit) {
        out.status = DecayStatus::HypothesisUnmet;
    } else {
        out.status = out.abs_weight <= out.bound * (1.0 + 1e-9) ? DecayStatus::Pass : DecayStatus::Fail;
    }
    return out;
}

}  // namespace cfptas

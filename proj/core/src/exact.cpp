#include "cfptas/exact.hpp"

#include <cmath>
#include <string>

#include "cfptas/errors.hpp"

namespace cfptas {
namespace {

std::size_t hilbert_dimension(const Model& model, const LatticeRegion& region, std::size_t cap) {
    std::size_t dim = 1;
    for (std::size_t i = 0; i < region.size(); ++i) {
        dim *= static_cast<std::size_t>(model.d);
        if (dim > cap) {
            throw ComputationError("Hilbert space dimension d^|V| exceeds cap " + std::to_string(cap));
        }
    }
    return dim;
}

int ground_spin(const Model& model, int g) {
    if (g < 0 || g >= static_cast<int>(model.ground_states.size())) {
        throw ValidationError("boundary ground state index out of range");
    }
    return model.ground_states[g];
}

// Outer-shell vertex together with the region vertices adjacent to it, one slot per
// pattern position (-1 when that position lies outside the region).
struct ShellSite {
    std::vector<long> slots;
};

std::vector<ShellSite> shell_sites(const LatticeRegion& region) {
    std::vector<ShellSite> out;
    for (const auto& u : region.outer_shell()) {
        ShellSite site;
        site.slots.push_back(-1);
        for (int k = 0; k < region.dimension(); ++k) {
            for (int sign : {+1, -1}) {
                auto idx = region.index_of(shifted(u, k, sign));
                site.slots.push_back(idx ? static_cast<long>(*idx) : -1);
            }
        }
        out.push_back(std::move(site));
    }
    return out;
}

}  // namespace

double boundary_energy(const Model& model, const LatticeRegion& region, int g, std::span<const int> spins) {
    const int gs = ground_spin(model, g);
    const int nu = region.dimension();
    std::vector<int> pattern(model.pattern_size());
    double energy = 0.0;
    for (std::size_t v = 0; v < region.size(); ++v) {
        pattern[0] = spins[v];
        for (int k = 0; k < nu; ++k) {
            for (int s = 0; s < 2; ++s) {
                long u = region.neighbor(v, k, s == 0 ? +1 : -1);
                pattern[1 + 2 * k + s] = u >= 0 ? spins[u] : gs;
            }
        }
        energy += model.phi_of(pattern);
    }
    for (const auto& site : shell_sites(region)) {
        for (std::size_t i = 0; i < site.slots.size(); ++i) pattern[i] = site.slots[i] >= 0 ? spins[site.slots[i]] : gs;
        energy += model.phi_of(pattern) - model.e0;
    }
    return energy;
}

ComplexMatrix build_hamiltonian(const Model& model, const LatticeRegion& region, int g, std::size_t cap) {
    if (region.dimension() != model.nu) throw ValidationError("region dimension differs from model dimension");
    const std::size_t dim = hilbert_dimension(model, region, cap);
    const int gs = ground_spin(model, g);
    const int d = model.d;
    const std::size_t n = region.size();
    ComplexMatrix h = ComplexMatrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));

    std::vector<std::size_t> power(n + 1, 1);
    for (std::size_t i = 0; i < n; ++i) power[i + 1] = power[i] * static_cast<std::size_t>(d);
    auto spin_at = [&](std::size_t state, std::size_t v) {
        return static_cast<int>((state / power[v]) % static_cast<std::size_t>(d));
    };

    std::vector<int> spins(n);
    for (std::size_t state = 0; state < dim; ++state) {
        for (std::size_t v = 0; v < n; ++v) spins[v] = spin_at(state, v);
        h(state, state) = boundary_energy(model, region, g, spins);
    }
    if (model.lambda == Complex{0.0, 0.0}) return h;

    // Interior edges: Psi acts on (low, high) endpoints.
    for (const auto& e : region.edges()) {
        const auto& psi = model.psi[e.direction];
        for (std::size_t state = 0; state < dim; ++state) {
            const int sa = spin_at(state, e.a), sb = spin_at(state, e.b);
            const std::size_t rest = state - sa * power[e.a] - sb * power[e.b];
            for (int ta = 0; ta < d; ++ta) {
                for (int tb = 0; tb < d; ++tb) {
                    const Complex amp = psi(ta * d + tb, sa * d + sb);
                    if (amp == Complex{0.0, 0.0}) continue;
                    h(rest + ta * power[e.a] + tb * power[e.b], state) += model.lambda * amp;
                }
            }
        }
    }
    // Edges crossing the region boundary: partial expectation in the outside ground spin.
    for (std::size_t v = 0; v < n; ++v) {
        for (int k = 0; k < region.dimension(); ++k) {
            for (int sign : {+1, -1}) {
                if (region.neighbor(v, k, sign) >= 0) continue;
                const ComplexMatrix op = model.psi_partial(k, sign > 0, gs);
                if (op.isZero(0.0)) continue;
                for (std::size_t state = 0; state < dim; ++state) {
                    const int s = spin_at(state, v);
                    const std::size_t rest = state - s * power[v];
                    for (int t = 0; t < d; ++t) {
                        if (op(t, s) != Complex{0.0, 0.0}) h(rest + t * power[v], state) += model.lambda * op(t, s);
                    }
                }
            }
        }
    }
    return h;
}

Complex exact_log_partition(const Model& model, const LatticeRegion& region, int g, double beta, std::size_t cap) {
    if (!(beta > 0.0)) throw ValidationError("beta must be positive");
    ComplexMatrix h = build_hamiltonian(model, region, g, cap);
    const double shift = model.e0 * static_cast<double>(region.size());
    h.diagonal().array() -= shift;
    const Complex trace = matrix_exponential(-beta * h, cap).trace();
    return -beta * shift + std::log(trace);
}

Complex exact_partition(const Model& model, const LatticeRegion& region, int g, double beta, std::size_t cap) {
    return std::exp(exact_log_partition(model, region, g, beta, cap));
}

Complex exact_partition_eigen(const Model& model, const LatticeRegion& region, int g, double beta, std::size_t cap) {
    if (!(beta > 0.0)) throw ValidationError("beta must be positive");
    if (model.lambda.imag() != 0.0) throw ValidationError("eigendecomposition route needs real lambda");
    const ComplexMatrix h = build_hamiltonian(model, region, g, cap);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(h, Eigen::EigenvaluesOnly);
    double z = 0.0;
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) z += std::exp(-beta * eig.eigenvalues()(i));
    return {z, 0.0};
}

}  // namespace cfptas

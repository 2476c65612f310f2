#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfptas/linalg.hpp"

namespace cfptas {

/// Marks a quantum excitation in a local pattern.
inline constexpr int kHole = -1;

inline constexpr std::size_t kDefaultPhiCap = 100000;

/// Spins on a closed neighbourhood, ordered (centre, +x1, -x1, ..., +x_nu, -x_nu).
using LocalConfig = std::vector<int>;

/// A stable quantum perturbation H = H_phi + lambda H_psi of a translation-invariant
/// classical spin system with constant ground states.
struct Model {
    std::string name;
    int d = 2;
    int nu = 2;
    /// phi[code] with code = sum_i spin_i d^i over the 2nu+1 pattern positions.
    std::vector<double> phi;
    /// One d^2 x d^2 operator per direction; basis index s_low * d + s_high where `low` is
    /// the endpoint with the smaller coordinate along that direction.
    std::vector<ComplexMatrix> psi;
    Complex lambda{0.0, 0.0};
    /// Spin value of each constant ground state.
    std::vector<int> ground_states;
    double e0 = 0.0;
    double alpha0 = 0.0;
    /// Stable hash of the defining document; keys persisted caches.
    std::uint64_t fingerprint = 0;

    int pattern_size() const noexcept { return 2 * nu + 1; }
    std::size_t pattern_count() const noexcept { return phi.size(); }
    std::size_t encode(std::span<const int> pattern) const;
    LocalConfig decode(std::size_t code) const;
    double phi_of(std::span<const int> pattern) const { return phi[encode(pattern)]; }
    /// Index into ground_states of the state with this spin value, or -1.
    int ground_index_of_spin(int spin) const;
    /// True when every Psi(e) vanishes identically.
    bool psi_is_zero() const;
    /// Partial expectation <g| Psi(direction) |g> over the endpoint `outside_is_high`,
    /// leaving a d x d operator on the other endpoint.
    ComplexMatrix psi_partial(int direction, bool outside_is_high, int outside_spin) const;
};

/// Builds and validates a model from its JSON document. Throws ValidationError.
Model load_model(const nlohmann::json& document);

/// Validates an already populated model in place and fills e0 / alpha0.
void finalize_model(Model& model);

/// Ising ferromagnet phi = 1/2 #{disagreeing neighbours} (scaled by 1 + tilt on spin 0
/// centres), Psi = sigma^x (x) sigma^x in every direction.
Model ising_model(int nu, Complex lambda = {0.0, 0.0}, double tilt = 0.0);

/// q-state Potts analogue with phi = 1/2 #{disagreeing neighbours}; Psi = 0.
Model potts_model(int nu, int q);

/// True iff the pattern differs from every ground state somewhere; holes never match.
bool is_excited(std::span<const int> pattern, const Model& model);

/// Minimum of phi - e0 over excited patterns. Throws ValidationError when it is <= 0.
double peierls_constant(const Model& model);

/// Common phi of the constant ground-state patterns. Throws when they disagree.
double ground_energy(const Model& model);

}  // namespace cfptas

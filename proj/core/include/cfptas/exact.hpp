#pragma once

#include <cstddef>

#include "cfptas/lattice.hpp"
#include "cfptas/linalg.hpp"
#include "cfptas/model.hpp"

namespace cfptas {

inline constexpr std::size_t kDefaultContourSumCap = 18;

/// Classical energy of a configuration (spin per region vertex) with every vertex outside
/// the region fixed to ground state `g`. Region vertices contribute phi, outer-shell
/// vertices contribute phi - e0.
double boundary_energy(const Model& model, const LatticeRegion& region, int g, std::span<const int> spins);

/// H_G^g on the tensor product of the region's sites; basis index sum_v s_v d^v.
ComplexMatrix build_hamiltonian(const Model& model, const LatticeRegion& region, int g,
                                std::size_t cap = kDefaultMatrixCap);

/// Tr exp(-beta H_G^g) via the matrix exponential.
Complex exact_partition(const Model& model, const LatticeRegion& region, int g, double beta,
                        std::size_t cap = kDefaultMatrixCap);

/// log Z_G^g with the ground-energy shift -beta e0 |V| pulled out before exponentiating.
Complex exact_log_partition(const Model& model, const LatticeRegion& region, int g, double beta,
                            std::size_t cap = kDefaultMatrixCap);

/// Same quantity through a Hermitian eigendecomposition; requires real lambda.
Complex exact_partition_eigen(const Model& model, const LatticeRegion& region, int g, double beta,
                              std::size_t cap = kDefaultMatrixCap);

/// e^{-beta e0 |V|} times the sum over every matching contour family of type g in V x [m]
/// of the product of contour weights. Families are found by scanning all subsets of
/// space-time cells as candidate excited sets.
Complex exact_contour_sum(const Model& model, const LatticeRegion& region, int g, double beta, int m,
                          std::size_t cap = kDefaultContourSumCap);

}  // namespace cfptas

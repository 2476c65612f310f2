#pragma once

#include <complex>
#include <cstddef>

#include <Eigen/Dense>

namespace cfptas {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;

inline constexpr std::size_t kDefaultMatrixCap = 4096;

/// exp(A) by scaling and squaring with a degree-13 Pade approximant.
/// Throws ComputationError for non-square input, dimension above `cap`, or non-finite entries.
ComplexMatrix matrix_exponential(const ComplexMatrix& a, std::size_t cap = kDefaultMatrixCap);

/// Kronecker product; (A (x) B)[(i,k),(j,l)] = A[i,j] B[k,l].
ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b, std::size_t cap = kDefaultMatrixCap);

/// Spectral norm: SVD up to dimension 64, eigenvalues of A^dagger A beyond that.
double operator_norm_upper(const ComplexMatrix& a);

bool is_hermitian(const ComplexMatrix& a, double tol = 1e-10);
bool all_finite(const ComplexMatrix& a);

}  // namespace cfptas

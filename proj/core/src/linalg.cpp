#include "cfptas/linalg.hpp"

#include <cmath>
#include <string>

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "cfptas/errors.hpp"

namespace cfptas {

bool all_finite(const ComplexMatrix& a) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const auto z = a.data()[i];
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    }
    return true;
}

bool is_hermitian(const ComplexMatrix& a, double tol) {
    if (a.rows() != a.cols()) return false;
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol * scale;
}

ComplexMatrix matrix_exponential(const ComplexMatrix& a, std::size_t cap) {
    if (a.rows() != a.cols()) throw ComputationError("matrix exponential of a non-square matrix");
    if (static_cast<std::size_t>(a.rows()) > cap) {
        throw ComputationError("matrix dimension " + std::to_string(a.rows()) + " exceeds cap " + std::to_string(cap));
    }
    if (!all_finite(a)) throw ComputationError("matrix exponential of non-finite input");
    if (a.rows() == 0) return a;
    ComplexMatrix out = a.exp();
    if (!all_finite(out)) throw ComputationError("matrix exponential overflowed");
    return out;
}

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b, std::size_t cap) {
    const auto rows = static_cast<std::size_t>(a.rows()) * static_cast<std::size_t>(b.rows());
    const auto cols = static_cast<std::size_t>(a.cols()) * static_cast<std::size_t>(b.cols());
    if (rows > cap || cols > cap) throw ComputationError("Kronecker product exceeds dimension cap");
    return Eigen::kroneckerProduct(a, b).eval();
}

double operator_norm_upper(const ComplexMatrix& a) {
    if (a.size() == 0) return 0.0;
    if (a.rows() <= 64 && a.cols() <= 64) {
        Eigen::JacobiSVD<ComplexMatrix> svd(a);
        return svd.singularValues()(0);
    }
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(a.adjoint() * a, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(eig.eigenvalues().maxCoeff(), 0.0));
}

}  // namespace cfptas

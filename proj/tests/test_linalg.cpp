#include <doctest.h>

#include <cmath>
#include <random>

#include "cfptas/errors.hpp"
#include "cfptas/linalg.hpp"

using namespace cfptas;

namespace {

ComplexMatrix random_matrix(int n, double scale, std::mt19937& rng) {
    std::normal_distribution<double> g(0.0, scale);
    ComplexMatrix a(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) a(i, j) = {g(rng), g(rng)};
    }
    return a;
}

// Plain Taylor series; accurate for small norms.
ComplexMatrix taylor_exp(const ComplexMatrix& a, int terms = 60) {
    ComplexMatrix sum = ComplexMatrix::Identity(a.rows(), a.cols());
    ComplexMatrix term = sum;
    for (int k = 1; k < terms; ++k) {
        term = term * a / static_cast<double>(k);
        sum += term;
    }
    return sum;
}

}  // namespace

TEST_CASE("matrix exponential against oracles") {
    std::mt19937 rng(7);
    SUBCASE("zero and diagonal") {
        CHECK(matrix_exponential(ComplexMatrix::Zero(3, 3)).isApprox(ComplexMatrix::Identity(3, 3), 1e-15));
        ComplexMatrix d = ComplexMatrix::Zero(2, 2);
        d(0, 0) = {1.0, 0.0};
        d(1, 1) = {-2.0, 0.5};
        const auto e = matrix_exponential(d);
        CHECK(std::abs(e(0, 0) - std::exp(Complex{1.0, 0.0})) < 1e-14);
        CHECK(std::abs(e(1, 1) - std::exp(Complex{-2.0, 0.5})) < 1e-14);
        CHECK(std::abs(e(0, 1)) < 1e-15);
    }
    SUBCASE("small random matrices match the Taylor series") {
        for (int trial = 0; trial < 10; ++trial) {
            const auto a = random_matrix(5, 0.3, rng);
            CHECK((matrix_exponential(a) - taylor_exp(a)).norm() < 1e-12);
        }
    }
    SUBCASE("Hermitian matrices match the eigendecomposition") {
        for (int trial = 0; trial < 5; ++trial) {
            const auto b = random_matrix(6, 2.0, rng);
            const ComplexMatrix h = (b + b.adjoint()) / 2.0;
            Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
            const ComplexMatrix ref =
                es.eigenvectors() * es.eigenvalues().array().exp().matrix().cast<Complex>().asDiagonal() *
                es.eigenvectors().adjoint();
            CHECK((matrix_exponential(h) - ref).norm() / ref.norm() < 1e-12);
        }
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(matrix_exponential(ComplexMatrix::Zero(2, 3)), ComputationError);
        CHECK_THROWS_AS(matrix_exponential(ComplexMatrix::Zero(8, 8), 4), ComputationError);
        ComplexMatrix bad = ComplexMatrix::Zero(2, 2);
        bad(0, 1) = {std::nan(""), 0.0};
        CHECK_THROWS_AS(matrix_exponential(bad), ComputationError);
    }
}

TEST_CASE("Kronecker product layout") {
    ComplexMatrix a(2, 2), b(2, 2);
    a << 1.0, 2.0, 3.0, 4.0;
    b << 0.0, 1.0, 1.0, 0.0;
    const auto k = kron(a, b);
    REQUIRE(k.rows() == 4);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            for (int p = 0; p < 2; ++p) {
                for (int q = 0; q < 2; ++q) CHECK(k(i * 2 + p, j * 2 + q) == a(i, j) * b(p, q));
            }
        }
    }
    CHECK_THROWS_AS(kron(ComplexMatrix::Identity(4, 4), ComplexMatrix::Identity(4, 4), 8), ComputationError);
}

TEST_CASE("operator norm") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        const auto b = random_matrix(4, 1.0, rng);
        const ComplexMatrix h = (b + b.adjoint()) / 2.0;
        Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
        const double spectral = es.eigenvalues().cwiseAbs().maxCoeff();
        CHECK(operator_norm_upper(h) == doctest::Approx(spectral).epsilon(1e-10));
        CHECK(operator_norm_upper(b) <= b.norm() + 1e-12);
    }
    ComplexMatrix sx = ComplexMatrix::Zero(4, 4);
    sx(0, 3) = sx(3, 0) = sx(1, 2) = sx(2, 1) = 1.0;
    CHECK(operator_norm_upper(sx) == doctest::Approx(1.0));
    CHECK(is_hermitian(sx));
    sx(0, 1) = {0.0, 1.0};
    CHECK_FALSE(is_hermitian(sx));
    CHECK(all_finite(sx));
}

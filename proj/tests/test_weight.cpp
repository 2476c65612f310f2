#include <doctest.h>

#include <cmath>

#include "cfptas/errors.hpp"
#include "cfptas/exact.hpp"
#include "cfptas/weight.hpp"
#include "oracles.hpp"

using namespace cfptas;

namespace {

// exp(-b H) for Hermitian H through its eigendecomposition.
ComplexMatrix hermitian_exp(const ComplexMatrix& h, double b) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
    const Eigen::VectorXd e = (-b * es.eigenvalues().array()).exp();
    return es.eigenvectors() * e.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
}

Contour single(std::vector<std::size_t> support, int type) {
    Contour c;
    c.support = std::move(support);
    c.type = type;
    return c;
}

}  // namespace

TEST_CASE("two-site transfer block against a direct evaluation") {
    const double beta_hat = 0.7;
    for (double lambda : {0.05, 0.3}) {
        const auto m = ising_model(2, {lambda, 0.0}, 0.4);
        const auto region = oracle::box(1, 2);
        for (int outer : {0, 1}) {
            const std::vector<std::size_t> holes{0, 1};
            const std::vector<int> spins{0, 0};
            const auto block = transfer_block(m, region, holes, spins, outer, beta_hat);
            REQUIRE(block.matrix.rows() == 4);

            // Basis s_0 + 2 s_1; the diagonal is the full classical energy of the pair.
            ComplexMatrix d = ComplexMatrix::Zero(4, 4);
            for (int s = 0; s < 4; ++s) {
                d(s, s) = oracle::classical_energy(m, 1, 2, {s & 1, s >> 1}, outer);
            }
            ComplexMatrix psi = ComplexMatrix::Zero(4, 4);
            psi(0, 3) = psi(3, 0) = psi(1, 2) = psi(2, 1) = 1.0;
            const ComplexMatrix ref = hermitian_exp(d + lambda * psi, beta_hat) - hermitian_exp(d, beta_hat);
            CHECK((block.matrix - ref).norm() < 1e-13);
        }
    }
}

TEST_CASE("blocks vanish without a perturbation") {
    const auto m = ising_model(2, {0.0, 0.0}, 0.2);
    const auto region = oracle::box(2, 3);
    const std::vector<int> spins{0, 1, 0, 0, 1, 1};
    for (std::uint32_t mask = 1; mask < 64; ++mask) {
        std::vector<std::size_t> holes;
        for (std::size_t v = 0; v < 6; ++v) {
            if (mask >> v & 1U) holes.push_back(v);
        }
        if (holes.size() > 4) continue;
        const auto block = transfer_block(m, region, holes, spins, 0, 1.3);
        CHECK(block.matrix.cwiseAbs().maxCoeff() <= 1e-12);
    }
    const auto empty = transfer_block(m, region, {}, spins, 0, 1.3);
    CHECK(empty.matrix.rows() == 1);
    CHECK(empty.matrix(0, 0) == Complex{1.0, 0.0});
}

TEST_CASE("isolated holes give nothing when the partial expectation vanishes") {
    const auto m = ising_model(2, {0.2, 0.0});
    const auto region = oracle::box(1, 3);
    const std::vector<int> spins{0, 0, 0};
    CHECK(transfer_block(m, region, std::vector<std::size_t>{1}, spins, 0, 1.0).matrix.norm() < 1e-14);
    // Holes at distance two interact only through the shared neighbour's energy.
    CHECK(transfer_block(m, region, std::vector<std::size_t>{0, 2}, spins, 0, 1.0).matrix.norm() < 1e-14);
}

TEST_CASE("classical contour weights") {
    const auto m = ising_model(2);
    const double beta_hat = 1.1;
    SUBCASE("single flipped site") {
        const SpaceTimeRegion st(oracle::box(1, 1), 1);
        for (int type : {0, 1}) {
            const auto w = contour_weight(m, st, single({0}, type), beta_hat);
            CHECK(std::abs(w - std::exp(-4.0 * beta_hat)) < 1e-15);
        }
    }
    SUBCASE("two sites: every configuration that excites both") {
        const SpaceTimeRegion st(oracle::box(1, 2), 1);
        double ref = 0.0;
        for (int s = 0; s < 4; ++s) {
            const std::vector<int> spins{s & 1, s >> 1};
            // Each site neighbours the other, so one flipped spin excites both.
            if (s != 0) ref += std::exp(-beta_hat * oracle::classical_energy(m, 1, 2, spins, 0));
        }
        CHECK(std::abs(contour_weight(m, st, single({0, 1}, 0), beta_hat) - ref) < 1e-15);
    }
}

TEST_CASE("engine memo and translation invariance") {
    const auto m = ising_model(2, {0.1, 0.0});
    const SpaceTimeRegion st(oracle::box(3, 5), 2);
    WeightEngine engine(m, st, 0.8);
    auto at = [&](int a, int b) {
        Coord x{};
        x[0] = a;
        x[1] = b;
        return *st.base().index_of(x);
    };
    const auto c1 = single({st.cell(at(1, 1), 0), st.cell(at(1, 1), 1)}, 0);
    const auto c2 = single({st.cell(at(1, 3), 0), st.cell(at(1, 3), 1)}, 0);
    const auto edge = single({st.cell(at(0, 2), 0), st.cell(at(0, 2), 1)}, 0);
    const auto l1 = cell_labelling(st, c1), l2 = cell_labelling(st, c2), l3 = cell_labelling(st, edge);
    CHECK(engine.key(c1.support, l1) == engine.key(c2.support, l2));
    CHECK(engine.key(c1.support, l1) != engine.key(edge.support, l3));
    const auto w1 = engine.weight(c1);
    CHECK(engine.weight(c2) == w1);
    CHECK(engine.memo_size() == 1);
    CHECK(std::abs(contour_weight(m, st, c1, 0.8) - w1) < 1e-15);
    CHECK(engine.weight({}, CellLabelling{}) == Complex{1.0, 0.0});
}

TEST_CASE("family sum reproduces Z in a quantum case") {
    const auto m = ising_model(2, {0.2, 0.0}, 0.5);
    const auto region = oracle::box(2, 2);
    for (int slices : {1, 2}) {
        const SpaceTimeRegion st(region, slices);
        WeightEngine engine(m, st, 1.2 / slices);
        std::vector<std::size_t> all(st.size());
        for (std::size_t c = 0; c < all.size(); ++c) all[c] = c;
        for (int g : {0, 1}) {
            const auto z = exact_partition(m, region, g, 1.2);
            CHECK(std::abs(contour_family_sum(engine, all, g, 20) - z) / std::abs(z) < 1e-10);
        }
    }
}

TEST_CASE("engine preconditions") {
    const auto m = ising_model(2);
    std::vector<Coord> ring;
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            Coord x{};
            x[0] = a;
            x[1] = b;
            if (a != 1 || b != 1) ring.push_back(x);
        }
    }
    const SpaceTimeRegion holed(LatticeRegion(2, ring), 1);
    CHECK_THROWS_AS(WeightEngine(m, holed, 1.0), ComputationError);

    const SpaceTimeRegion st(oracle::box(2, 2), 1);
    WeightEngine engine(m, st, 1.0, 2);
    const auto big = single({0, 1, 2}, 0);
    CHECK_THROWS_AS(engine.weight(big), ComputationError);
}

TEST_CASE("weight decay check") {
    const auto m = ising_model(2, {1e-3, 0.0});
    const double alpha = 1.0, beta_hat = 3.0;
    const double base = 2.0 * (std::exp(-alpha / 4.0) + std::exp(-beta_hat * 0.5));
    auto ok = weight_decay_check(m, {1e-6, 0.0}, 3, beta_hat, alpha);
    CHECK(ok.status == DecayStatus::Pass);
    CHECK(ok.bound == doctest::Approx(std::pow(base, 3)));
    CHECK(weight_decay_check(m, {100.0, 0.0}, 1, beta_hat, alpha).status == DecayStatus::Fail);
    const auto loud = ising_model(2, {0.5, 0.0});
    CHECK(weight_decay_check(loud, {1e-6, 0.0}, 1, beta_hat, alpha).status == DecayStatus::HypothesisUnmet);
}

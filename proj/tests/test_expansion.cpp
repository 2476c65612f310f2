#include <doctest.h>

#include <bit>
#include <cmath>
#include <filesystem>

#include "cfptas/errors.hpp"
#include "cfptas/exact.hpp"
#include "cfptas/expansion.hpp"
#include "oracles.hpp"

using namespace cfptas;

namespace {

// Three spins, ground states 0 and 1. Spin 2 is cheap next to 1 and expensive next to 0.
Model asymmetric_model() {
    Model m;
    m.name = "asymmetric";
    m.d = 3;
    m.nu = 2;
    m.ground_states = {0, 1};
    m.phi.resize(243);
    for (std::size_t code = 0; code < m.phi.size(); ++code) {
        const auto p = m.decode(code);
        double e = 0.0;
        if (p[0] == 2) {
            e = 0.2;
            for (int i = 1; i < 5; ++i) e += p[i] == 1 ? 0.3 : (p[i] == 0 ? 1.0 : 0.0);
        } else {
            for (int i = 1; i < 5; ++i) e += 0.5 * (p[i] != p[0]);
        }
        m.phi[code] = e;
    }
    m.psi.assign(2, ComplexMatrix::Zero(9, 9));
    finalize_model(m);
    return m;
}

// Sum over pairwise compatible families of type-g contours of the product of dressed weights.
Complex dressed_gas(const ContourExpansion& ex, int g) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ex.contours().size(); ++i) {
        if (ex.contours()[i].type == g) idx.push_back(i);
    }
    Complex z{0.0, 0.0};
    std::vector<std::size_t> chosen;
    auto visit = [&](auto&& self, std::size_t from, Complex prod) -> void {
        z += prod;
        for (std::size_t k = from; k < idx.size(); ++k) {
            bool ok = true;
            for (auto c : chosen) {
                const auto& l = ex.incompatible()[c];
                if (std::binary_search(l.begin(), l.end(), idx[k])) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            chosen.push_back(idx[k]);
            self(self, k + 1, prod * ex.dressed()[idx[k]].value);
            chosen.pop_back();
        }
    };
    visit(visit, 0, {1.0, 0.0});
    return z;
}

}  // namespace

TEST_CASE("parameter selection") {
    CHECK(truncation_order(9, 2, 0.05, 1.0) == 8);
    CHECK(truncation_order(9, 1, 0.05, 1.0) == 7);
    for (double eps : {0.5, 0.1, 0.05, 0.01}) {
        const int n = truncation_order(9, 2, eps, 1.0);
        CHECK(18.0 * std::exp(-static_cast<double>(n)) <= eps / 4.0);
        CHECK((n == 1 || 18.0 * std::exp(-static_cast<double>(n - 1)) > eps / 4.0));
        const int halved = truncation_order(9, 2, eps / 2.0, 1.0);
        CHECK(halved - n >= 0);
        CHECK(halved - n <= 1);
        const int fast = truncation_order(9, 2, eps, 2.0);
        CHECK(std::abs(2 * fast - n) <= 2);
    }
    CHECK(truncation_order(1, 1, 0.99, 50.0) == 1);
    CHECK_THROWS_AS(truncation_order(9, 1, 0.0, 1.0), ValidationError);

    auto s = choose_time_slices(10.0, 3.0);
    CHECK(s.m == 3);
    CHECK(s.beta_hat == doctest::Approx(10.0 / 3.0));
    CHECK(s.certified);
    CHECK(choose_time_slices(3.0, 3.0).m == 1);
    s = choose_time_slices(6.1, 3.0);
    CHECK(s.m == 2);
    CHECK(s.beta_hat == doctest::Approx(3.05));
    s = choose_time_slices(1.0, 3.0);
    CHECK(s.m == 1);
    CHECK_FALSE(s.certified);
}

TEST_CASE("convergence constants") {
    const auto m = ising_model(2);
    const auto c = convergence_constants(m, 5.0);
    const double target = std::exp(-(5.0 + 6.0));
    // Each addend takes half of the allowance.
    CHECK(2.0 * std::exp(-c.alpha / 4.0) == doctest::Approx(target / 2.0));
    CHECK(2.0 * std::exp(-c.beta_star * 0.5) == doctest::Approx(target / 2.0));
    CHECK(c.lambda_star == doctest::Approx(std::exp(-2.0 * (c.alpha + 1.0)) / (5.0 * 2.0 * c.beta_star)));

    const auto bigger = convergence_constants(m, 6.0);
    CHECK(bigger.beta_star > c.beta_star);
    CHECK(bigger.lambda_star < c.lambda_star);

    Model stiff = m;
    for (auto& e : stiff.phi) e *= 2.0;
    finalize_model(stiff);
    CHECK(convergence_constants(stiff, 5.0).beta_star == doctest::Approx(c.beta_star / 2.0));
    CHECK_THROWS_AS(convergence_constants(m, 0.0), ValidationError);
}

TEST_CASE("small truncation orders") {
    const auto m = ising_model(2, {0.0, 0.0}, 0.3);
    const SpaceTimeRegion st(oracle::box(1, 1), 1);
    ContourExpansion ex(m, st, 1.5, 3);
    // n = 1: the volume term only; e0 = 0 here.
    CHECK(ex.log_partition(0, 1) == Complex{0.0, 0.0});
    // One contour of each type fits: T_2 = w.
    REQUIRE(ex.contours().size() == 2);
    const auto w = ex.dressed()[0].value;
    CHECK(ex.log_partition(0, 2) == w);
    CHECK(truncated_expansion({}, {}, -2.5, 4) == Complex{-2.5, 0.0});
    CHECK_THROWS_AS(ex.log_partition(0, 4), ValidationError);
    CHECK_THROWS_AS(ex.log_partition(2, 2), ValidationError);
}

TEST_CASE("full-order expansion against the exact partition function") {
    SUBCASE("classical 2x2 at beta = 4") {
        const auto m = ising_model(2);
        const auto region = oracle::box(2, 2);
        const SpaceTimeRegion st(region, 1);
        ContourExpansion ex(m, st, 4.0, 5);
        const double exact = exact_log_partition(m, region, 0, 4.0).real();
        double previous = 1.0;
        for (int n = 1; n <= 5; ++n) {
            const double err = std::abs(ex.log_partition(0, n).real() - exact);
            CHECK(err <= previous + 1e-10);
            previous = err;
        }
        CHECK(previous <= 1e-3);
    }
    SUBCASE("instances with |V| m <= 10") {
        for (double lambda : {0.0, 1e-3}) {
            const auto m = ising_model(2, {lambda, 0.0});
            for (auto [rows, cols, slices] : {std::tuple{2, 2, 1}, {2, 2, 2}, {2, 3, 1}}) {
                const auto region = oracle::box(rows, cols);
                const SpaceTimeRegion st(region, slices);
                const double beta = 3.0;
                ContourExpansion ex(m, st, beta / slices, static_cast<int>(st.size()) + 1);
                for (int g : {0, 1}) {
                    const auto z = exact_partition(m, region, g, beta);
                    CHECK(std::abs(std::exp(ex.log_partition(g)) - z) / std::abs(z) <= 1e-6);
                }
            }
        }
    }
}

TEST_CASE("dressed polymer gas reproduces Z in an asymmetric model") {
    const auto m = asymmetric_model();
    const SpaceTimeRegion st(oracle::box(3, 3), 1);
    for (bool exact_interiors : {false, true}) {
        ExpansionSettings settings;
        settings.exact_interiors = exact_interiors;
        ContourExpansion ex(m, st, 0.7, 10, settings);
        for (int g : {0, 1}) {
            const double ref = oracle::classical_partition(m, 3, 3, m.ground_states[g], 0.7);
            CHECK(std::abs(dressed_gas(ex, g).real() - ref) / ref < 1e-12);
        }
    }
}

TEST_CASE("interior partition functions") {
    const auto m = asymmetric_model();
    const SpaceTimeRegion st(oracle::box(7, 7), 1);
    const double beta_hat = 2.0;
    // The central 5x5 block; its core is the 3x3 block.
    std::vector<std::size_t> block, core;
    for (std::size_t v = 0; v < 49; ++v) {
        const auto& x = st.base().vertex(v);
        if (x[0] >= 1 && x[0] <= 5 && x[1] >= 1 && x[1] <= 5) block.push_back(v);
        if (x[0] >= 2 && x[0] <= 4 && x[1] >= 2 && x[1] <= 4) core.push_back(v);
    }
    CHECK(interior_core(st, block) == core);

    // Configurations on the core whose excitations stay inside it, everything else at h.
    auto reference = [&](int h) {
        const int spin_h = m.ground_states[h];
        double z = 0.0;
        for (int code = 0; code < 19683; ++code) {
            std::vector<int> grid(49, spin_h);
            int rest = code;
            for (auto v : core) {
                grid[v] = rest % 3;
                rest /= 3;
            }
            auto spin = [&](std::int64_t a, std::int64_t b) {
                if (a < 0 || b < 0 || a > 6 || b > 6) return spin_h;
                return grid[static_cast<std::size_t>(a * 7 + b)];
            };
            double energy = 0.0;
            bool inside = true;
            for (std::size_t v = 0; v < 49 && inside; ++v) {
                const auto& x = st.base().vertex(v);
                const std::vector<int> p{spin(x[0], x[1]), spin(x[0] + 1, x[1]), spin(x[0] - 1, x[1]),
                                         spin(x[0], x[1] + 1), spin(x[0], x[1] - 1)};
                const bool excited = is_excited(p, m);
                if (excited && std::find(core.begin(), core.end(), v) == core.end()) inside = false;
                energy += m.phi_of(p) - m.e0;
            }
            if (inside) z += std::exp(-beta_hat * energy);
        }
        return z;
    };

    WeightEngine engine(m, st, beta_hat);
    ContourExpansion ex(m, st, beta_hat, 6);
    for (int h : {0, 1}) {
        const double ref = reference(h);
        CHECK(std::abs(contour_family_sum(engine, core, h, 20).real() - ref) / ref < 1e-12);
        CHECK(std::abs(ex.interior_log_partition(block, h).real() - std::log(ref)) < 1e-5);
    }
    // Spin 2 is cheap inside a sea of 1, so the 1-interior is heavier.
    CHECK(reference(1) > reference(0) * (1.0 + 1e-4));
    CHECK(ex.interior_memo_size() == 2);
}

TEST_CASE("dressed weights under spin-flip symmetry") {
    const auto m = ising_model(2, {0.0, 0.0});
    const SpaceTimeRegion st(oracle::box(3, 3), 1);
    ContourExpansion ex(m, st, 1.0, 9);
    std::size_t nested = 0;
    for (std::size_t i = 0; i < ex.contours().size(); ++i) {
        const auto& c = ex.contours()[i];
        const auto& d = ex.dressed()[i];
        CHECK(std::abs(d.ratio - Complex{1.0, 0.0}) <= 1e-10);
        if (!c.has_interior()) {
            CHECK(d.ratio == Complex{1.0, 0.0});
            CHECK(d.error_bound == 0.0);
            CHECK(d.value == d.bare);
            const auto entries = stability_diagnostic(ex, c, StabilityEvaluator::Exact);
            for (const auto& e : entries) {
                CHECK(e.interior_size == 0);
                CHECK(e.stable);
                CHECK(e.abs_ratio == 1.0);
            }
            continue;
        }
        ++nested;
        for (auto evaluator : {StabilityEvaluator::Exact, StabilityEvaluator::Expansion}) {
            for (const auto& e : stability_diagnostic(ex, c, evaluator)) {
                CHECK(e.stable);
                CHECK(e.abs_ratio == doctest::Approx(1.0).epsilon(1e-10));
                if (e.interior_size > 0) CHECK(e.limit == std::exp(4.0 * static_cast<double>(e.boundary_edges)));
            }
        }
    }
    CHECK(nested > 0);
    CHECK(stable_truncated_log_partition(ex, 0, StabilityEvaluator::Exact) == ex.log_partition(0));
}

TEST_CASE("Kotecky-Preiss diagnostic") {
    const auto m = ising_model(2);
    const SpaceTimeRegion st(oracle::box(2, 2), 1);
    ContourExpansion cold(m, st, 6.0, 5);
    CHECK(kp_diagnostic(cold, 0).pass);
    CHECK(kp_diagnostic(cold, 0).max_rate > 0.0);
    ContourExpansion hot(m, st, 0.5, 5);
    CHECK_FALSE(kp_diagnostic(hot, 0).pass);
    ContourExpansion empty(m, st, 0.5, 1);
    CHECK(empty.contours().empty());
    CHECK(kp_diagnostic(empty, 0).pass);
    CHECK(kp_diagnostic(empty, 0).worst_ratio == 0.0);
}

TEST_CASE("end-to-end estimates") {
    const auto region = oracle::box(3, 3);
    for (double lambda : {0.0, 1e-3}) {
        const auto m = ising_model(2, {lambda, 0.0});
        const double exact = exact_log_partition(m, region, 0, 5.0).real();
        int previous_n = 0;
        for (double eps : {0.5, 0.05}) {
            ExpansionOptions o;
            o.epsilon = eps;
            const auto r = fptas_log_partition(m, region, 0, 5.0, o);
            CHECK(std::abs(r.log_z.real() - exact) <= eps);
            CHECK(r.n_used >= previous_n);
            previous_n = r.n_used;
            CHECK(r.m_used == 1);
            CHECK_FALSE(r.certified);
            CHECK(r.status == "outside certified regime");
            CHECK(r.budget.truncation == eps / 4.0);
            CHECK(r.budget.weights == eps / 4.0);
            CHECK(r.budget.slack == eps / 2.0);
        }
    }
    SUBCASE("two time slices with a perturbation") {
        const auto m = ising_model(2, {1e-3, 0.0});
        ExpansionOptions o;
        o.epsilon = 0.05;
        o.m = 2;
        const auto r = fptas_log_partition(m, oracle::box(2, 2), 1, 5.0, o);
        CHECK(r.m_used == 2);
        CHECK(std::abs(r.log_z.real() - exact_log_partition(m, oracle::box(2, 2), 1, 5.0).real()) <= 0.05);
    }
    SUBCASE("rejected arguments") {
        const auto m = ising_model(2);
        ExpansionOptions o;
        o.epsilon = 0.0;
        CHECK_THROWS_AS(fptas_log_partition(m, region, 0, 5.0, o), ValidationError);
        o.epsilon = 0.1;
        CHECK_THROWS_AS(fptas_log_partition(m, region, 0, -1.0, o), ValidationError);
        CHECK_THROWS_AS(fptas_log_partition(m, region, 3, 1.0, o), ValidationError);
    }
}

TEST_CASE("error budget bookkeeping") {
    const auto m = ising_model(2, {1e-3, 0.0});
    const auto region = oracle::box(3, 3);
    const double eps = 0.1;
    const SpaceTimeRegion st(region, 1);
    const int n = truncation_order(region.size(), 1, eps, 1.0);
    ExpansionSettings settings;
    settings.epsilon = eps;
    ContourExpansion ex(m, st, 5.0, n, settings);
    for (std::size_t i = 0; i < ex.contours().size(); ++i) {
        const auto& d = ex.dressed()[i];
        std::size_t interior = 0;
        for (const auto& part : ex.contours()[i].interiors) interior += part.size();
        CHECK(d.budget == doctest::Approx(eps * static_cast<double>(interior) / 9.0));
        CHECK(d.error_bound <= d.budget);
    }
    CHECK(ex.weight_error(0) <= eps / 4.0);
}

TEST_CASE("results do not depend on the worker count or the cache") {
    const auto m = ising_model(2, {1e-3, 0.0}, 0.2);
    const auto region = oracle::box(3, 3);
    ExpansionOptions o;
    o.epsilon = 0.1;
    o.m = 1;
    o.n = 9;
    const auto one = fptas_log_partition(m, region, 1, 4.0, o);
    o.threads = 4;
    const auto four = fptas_log_partition(m, region, 1, 4.0, o);
    CHECK(std::bit_cast<std::uint64_t>(one.log_z.real()) == std::bit_cast<std::uint64_t>(four.log_z.real()));
    CHECK(one.clusters == four.clusters);
    CHECK(one.budget.weight_error_spent == four.budget.weight_error_spent);

    const auto dir = std::filesystem::temp_directory_path() / "cfptas-test-cache";
    std::filesystem::remove_all(dir);
    o.cache_dir = dir.string();
    const auto cold = fptas_log_partition(m, region, 1, 4.0, o);
    CHECK_FALSE(std::filesystem::is_empty(dir));
    const auto warm = fptas_log_partition(m, region, 1, 4.0, o);
    CHECK(std::bit_cast<std::uint64_t>(cold.log_z.real()) == std::bit_cast<std::uint64_t>(one.log_z.real()));
    CHECK(std::bit_cast<std::uint64_t>(warm.log_z.real()) == std::bit_cast<std::uint64_t>(one.log_z.real()));
    std::filesystem::remove_all(dir);
}

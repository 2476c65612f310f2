#include <doctest.h>

#include <fstream>

#include "cfptas/errors.hpp"
#include "cfptas/model.hpp"

using namespace cfptas;
using nlohmann::json;

namespace {

json load_file(const std::string& name) {
    std::ifstream in(std::string(CFPTAS_MODELS_DIR) + "/" + name);
    return json::parse(in);
}

json explicit_ising(double psi_scale) {
    json doc{{"schema", 1}, {"nu", 2}, {"d", 2}, {"ground_states", {0, 1}}};
    doc["phi"] = json::array();
    for (int code = 0; code < 32; ++code) {
        std::vector<int> p(5);
        int disagree = 0;
        for (int i = 0; i < 5; ++i) p[i] = code >> i & 1;
        for (int i = 1; i < 5; ++i) disagree += p[i] != p[0];
        doc["phi"].push_back({{"pattern", p}, {"energy", 0.5 * disagree}});
    }
    json sx = json::array();
    for (int r = 0; r < 4; ++r) {
        json row = json::array();
        for (int c = 0; c < 4; ++c) row.push_back({r + c == 3 ? psi_scale : 0.0, 0.0});
        sx.push_back(row);
    }
    doc["psi"] = {{"dir1", sx}, {"dir2", sx}};
    doc["lambda"] = {{"re", 0.01}, {"im", 0.0}};
    return doc;
}

}  // namespace

TEST_CASE("builtin Ising") {
    const auto m = ising_model(2);
    CHECK(m.d == 2);
    CHECK(m.pattern_count() == 32);
    CHECK(m.e0 == 0.0);
    CHECK(m.alpha0 == 0.5);
    CHECK(m.phi_of(std::vector<int>{0, 0, 0, 0, 0}) == 0.0);
    CHECK(m.phi_of(std::vector<int>{1, 0, 0, 0, 0}) == 2.0);
    CHECK(m.phi_of(std::vector<int>{0, 1, 1, 0, 0}) == 1.0);
    CHECK(m.ground_index_of_spin(1) == 1);
    CHECK(m.ground_index_of_spin(5) == -1);
    CHECK_FALSE(m.psi_is_zero());
    CHECK(ising_model(2, {0.0, 0.0}).lambda == Complex{0.0, 0.0});

    const auto tilted = ising_model(2, {0.0, 0.0}, 1.0);
    CHECK(tilted.phi_of(std::vector<int>{0, 1, 0, 0, 0}) == 1.0);
    CHECK(tilted.phi_of(std::vector<int>{1, 0, 1, 1, 1}) == 0.5);
}

TEST_CASE("pattern codes round trip") {
    const auto m = potts_model(2, 3);
    CHECK(m.pattern_count() == 243);
    for (std::size_t code = 0; code < m.pattern_count(); ++code) CHECK(m.encode(m.decode(code)) == code);
    CHECK(m.ground_states.size() == 3);
    CHECK(m.psi_is_zero());
}

TEST_CASE("excitation and Peierls constant") {
    const auto m = ising_model(2);
    CHECK_FALSE(is_excited(std::vector<int>{1, 1, 1, 1, 1}, m));
    CHECK(is_excited(std::vector<int>{1, 1, 1, 1, 0}, m));
    CHECK(is_excited(std::vector<int>{kHole, 0, 0, 0, 0}, m));
    CHECK(peierls_constant(m) == 0.5);
    CHECK(ground_energy(m) == 0.0);
}

TEST_CASE("partial expectation of sigma^x (x) sigma^x vanishes") {
    const auto m = ising_model(2, {0.1, 0.0});
    for (int dir = 0; dir < 2; ++dir) {
        for (bool high : {false, true}) {
            for (int s : {0, 1}) CHECK(m.psi_partial(dir, high, s).norm() == 0.0);
        }
    }
}

TEST_CASE("explicit partial expectation layout") {
    auto doc = explicit_ising(1.0);
    // Psi = |0><0| (x) |1><1|: low endpoint 0 and high endpoint 1.
    json proj = json::array();
    for (int r = 0; r < 4; ++r) {
        json row = json::array();
        for (int c = 0; c < 4; ++c) row.push_back({r == 1 && c == 1 ? 1.0 : 0.0, 0.0});
        proj.push_back(row);
    }
    doc["psi"] = {{"dir1", proj}};
    const auto m = load_model(doc);
    // Outside endpoint high with spin 1 leaves |0><0| on the low endpoint.
    const auto low = m.psi_partial(0, true, 1);
    CHECK(low(0, 0) == Complex{1.0, 0.0});
    CHECK(low(1, 1) == Complex{0.0, 0.0});
    CHECK(m.psi_partial(0, true, 0).norm() == 0.0);
    const auto high = m.psi_partial(0, false, 0);
    CHECK(high(1, 1) == Complex{1.0, 0.0});
    CHECK(m.psi[1].norm() == 0.0);
}

TEST_CASE("model documents") {
    SUBCASE("builtin file") {
        const auto m = load_model(load_file("ising.json"));
        CHECK(m.name == "ising");
        CHECK(m.fingerprint != 0);
    }
    SUBCASE("explicit table equals the builtin") {
        const auto m = load_model(explicit_ising(1.0));
        const auto b = ising_model(2, {0.01, 0.0});
        CHECK(m.phi == b.phi);
        CHECK(m.psi[0].isApprox(b.psi[0]));
        CHECK(m.lambda == b.lambda);
    }
    SUBCASE("operator norm above one") {
        try {
            load_model(load_file("bad_psi.json"));
            FAIL("expected a validation error");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("operator norm exceeds 1") != std::string::npos);
        }
    }
    SUBCASE("malformed documents") {
        auto doc = explicit_ising(1.0);
        doc["phi"].erase(doc["phi"].begin());
        CHECK_THROWS_AS(load_model(doc), ValidationError);

        doc = explicit_ising(1.0);
        doc["phi"][0]["energy"] = 1.0;  // ground state 0 no longer minimal among grounds
        CHECK_THROWS_AS(load_model(doc), ValidationError);

        doc = explicit_ising(1.0);
        doc["ground_states"] = {0, 0};
        CHECK_THROWS_AS(load_model(doc), ValidationError);

        CHECK_THROWS_AS(load_model(json{{"builtin", "heisenberg"}}), ValidationError);
        CHECK_THROWS_AS(load_model(json{{"schema", 2}, {"builtin", "ising"}}), ValidationError);
        CHECK_THROWS_AS(load_model(json::array()), ValidationError);
        CHECK_THROWS_AS(load_model(json{{"builtin", "ising"}, {"nu", 1}}), ValidationError);
    }
    SUBCASE("Peierls condition") {
        auto doc = explicit_ising(1.0);
        // An excited pattern at the ground energy.
        for (auto& e : doc["phi"]) {
            if (e["pattern"] == std::vector<int>{1, 0, 0, 0, 0}) e["energy"] = 0.0;
        }
        CHECK_THROWS_AS(load_model(doc), ValidationError);
    }
}

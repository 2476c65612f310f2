#include "cfptas/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "cfptas/errors.hpp"

namespace cfptas {
namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::size_t checked_pattern_count(int d, int nu) {
    std::size_t count = 1;
    for (int i = 0; i < 2 * nu + 1; ++i) {
        count *= static_cast<std::size_t>(d);
        if (count > kDefaultPhiCap) {
            throw ValidationError("phi table with d^(2nu+1) entries exceeds the cap of " + std::to_string(kDefaultPhiCap));
        }
    }
    return count;
}

Complex parse_complex(const nlohmann::json& j) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2) return {j[0].get<double>(), j[1].get<double>()};
    if (j.is_object()) return {j.value("re", 0.0), j.value("im", 0.0)};
    throw ValidationError("complex entries must be numbers, [re, im] pairs or {re, im} objects");
}

// Accepts row-major flat lists of dim^2 entries or nested rows.
ComplexMatrix parse_matrix(const nlohmann::json& j, int dim) {
    ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
    const auto n = static_cast<std::size_t>(dim);
    if (!j.is_array()) throw ValidationError("psi matrices must be arrays");
    if (j.size() == n * n) {
        for (int r = 0; r < dim; ++r) {
            for (int c = 0; c < dim; ++c) m(r, c) = parse_complex(j[r * dim + c]);
        }
        return m;
    }
    if (j.size() != n) throw ValidationError("psi matrix must be " + std::to_string(dim) + " x " + std::to_string(dim));
    for (int r = 0; r < dim; ++r) {
        if (!j[r].is_array() || j[r].size() != n) throw ValidationError("psi matrix rows have the wrong length");
        for (int c = 0; c < dim; ++c) m(r, c) = parse_complex(j[r][c]);
    }
    return m;
}

ComplexMatrix sigma_x_pair() {
    ComplexMatrix sx(2, 2);
    sx << 0, 1, 1, 0;
    return kron(sx, sx);
}

}  // namespace

std::size_t Model::encode(std::span<const int> pattern) const {
    std::size_t code = 0, mult = 1;
    for (int s : pattern) {
        code += static_cast<std::size_t>(s) * mult;
        mult *= static_cast<std::size_t>(d);
    }
    return code;
}

LocalConfig Model::decode(std::size_t code) const {
    LocalConfig out(pattern_size());
    for (auto& s : out) {
        s = static_cast<int>(code % static_cast<std::size_t>(d));
        code /= static_cast<std::size_t>(d);
    }
    return out;
}

int Model::ground_index_of_spin(int spin) const {
    for (std::size_t i = 0; i < ground_states.size(); ++i) {
        if (ground_states[i] == spin) return static_cast<int>(i);
    }
    return -1;
}

bool Model::psi_is_zero() const {
    return std::all_of(psi.begin(), psi.end(), [](const ComplexMatrix& m) { return m.isZero(0.0); });
}

ComplexMatrix Model::psi_partial(int direction, bool outside_is_high, int outside_spin) const {
    const auto& full = psi.at(direction);
    ComplexMatrix out(d, d);
    for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) {
            out(a, b) = outside_is_high ? full(a * d + outside_spin, b * d + outside_spin)
                                        : full(outside_spin * d + a, outside_spin * d + b);
        }
    }
    return out;
}

bool is_excited(std::span<const int> pattern, const Model& model) {
    for (int g : model.ground_states) {
        if (std::all_of(pattern.begin(), pattern.end(), [g](int s) { return s == g; })) return false;
    }
    return true;
}

double ground_energy(const Model& model) {
    if (model.ground_states.empty()) throw ValidationError("ground state list is empty");
    const LocalConfig first(model.pattern_size(), model.ground_states.front());
    const double e0 = model.phi_of(first);
    for (int g : model.ground_states) {
        const LocalConfig pattern(model.pattern_size(), g);
        if (model.phi_of(pattern) != e0) throw ValidationError("ground states have different energies");
    }
    return e0;
}

double peierls_constant(const Model& model) {
    const double e0 = ground_energy(model);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t code = 0; code < model.pattern_count(); ++code) {
        const auto pattern = model.decode(code);
        if (model.phi[code] < e0) throw ValidationError("a configuration has energy below the ground energy");
        if (is_excited(pattern, model)) best = std::min(best, model.phi[code] - e0);
    }
    if (!(best > 0.0)) throw ValidationError("Peierls condition violated: an excited configuration has energy e0");
    return best;
}

void finalize_model(Model& model) {
    if (model.d < 2) throw ValidationError("local dimension d must be at least 2");
    if (model.nu < 2) throw ValidationError("lattice dimension must be at least 2");
    if (model.phi.size() != checked_pattern_count(model.d, model.nu)) throw ValidationError("phi table incomplete");
    for (double e : model.phi) {
        if (!std::isfinite(e)) throw ValidationError("phi energies must be finite");
    }
    if (model.ground_states.empty()) throw ValidationError("ground state list is empty");
    std::set<int> seen;
    for (int g : model.ground_states) {
        if (g < 0 || g >= model.d) throw ValidationError("ground state spin out of range");
        if (!seen.insert(g).second) throw ValidationError("duplicate ground state");
    }
    if (static_cast<int>(model.psi.size()) != model.nu) throw ValidationError("one psi operator per direction required");
    const int dim = model.d * model.d;
    for (const auto& m : model.psi) {
        if (m.rows() != dim || m.cols() != dim) throw ValidationError("psi operators must be d^2 x d^2");
        if (!all_finite(m)) throw ValidationError("psi entries must be finite");
        if (!is_hermitian(m)) throw ValidationError("psi operator is not Hermitian");
        if (operator_norm_upper(m) > 1.0 + 1e-9) throw ValidationError("psi operator norm exceeds 1; rescale lambda");
    }
    if (!std::isfinite(model.lambda.real()) || !std::isfinite(model.lambda.imag())) {
        throw ValidationError("lambda must be finite");
    }
    model.e0 = ground_energy(model);
    model.alpha0 = peierls_constant(model);
}

Model ising_model(int nu, Complex lambda, double tilt) {
    Model m;
    m.name = "ising";
    m.d = 2;
    m.nu = nu;
    m.lambda = lambda;
    m.ground_states = {0, 1};
    m.phi.resize(checked_pattern_count(2, nu));
    for (std::size_t code = 0; code < m.phi.size(); ++code) {
        const auto p = m.decode(code);
        int disagree = 0;
        for (std::size_t i = 1; i < p.size(); ++i) disagree += p[i] != p[0];
        m.phi[code] = 0.5 * disagree * (p[0] == 0 ? 1.0 + tilt : 1.0);
    }
    m.psi.assign(nu, sigma_x_pair());
    nlohmann::json doc = {{"builtin", "ising"}, {"nu", nu}, {"tilt", tilt},
                          {"lambda", {lambda.real(), lambda.imag()}}};
    m.fingerprint = fnv1a(doc.dump());
    finalize_model(m);
    return m;
}

Model potts_model(int nu, int q) {
    Model m;
    m.name = "potts";
    m.d = q;
    m.nu = nu;
    for (int g = 0; g < q; ++g) m.ground_states.push_back(g);
    m.phi.resize(checked_pattern_count(q, nu));
    for (std::size_t code = 0; code < m.phi.size(); ++code) {
        const auto p = m.decode(code);
        int disagree = 0;
        for (std::size_t i = 1; i < p.size(); ++i) disagree += p[i] != p[0];
        m.phi[code] = 0.5 * disagree;
    }
    m.psi.assign(nu, ComplexMatrix::Zero(q * q, q * q));
    nlohmann::json doc = {{"builtin", "potts"}, {"nu", nu}, {"q", q}};
    m.fingerprint = fnv1a(doc.dump());
    finalize_model(m);
    return m;
}

Model load_model(const nlohmann::json& doc) {
    try {
        if (!doc.is_object()) throw ValidationError("model document must be a JSON object");
        if (doc.contains("schema") && doc["schema"].get<int>() != 1) throw ValidationError("unsupported model schema");
        const int nu = doc.value("nu", 2);
        if (nu < 2) throw ValidationError("lattice dimension nu must be at least 2");
        Complex lambda{0.0, 0.0};
        if (doc.contains("lambda")) lambda = parse_complex(doc["lambda"]);

        Model m;
        if (doc.contains("builtin")) {
            const auto name = doc["builtin"].get<std::string>();
            if (name == "ising") {
                if (doc.value("d", 2) != 2) throw ValidationError("builtin ising has d = 2");
                m = ising_model(nu, lambda, doc.value("tilt", 0.0));
            } else if (name == "potts") {
                const int q = doc.value("q", doc.value("d", 3));
                m = potts_model(nu, q);
                m.lambda = lambda;
            } else {
                throw ValidationError("unknown builtin model '" + name + "'");
            }
            m.fingerprint = fnv1a(doc.dump());
            return m;
        }

        m.name = doc.value("name", std::string("custom"));
        m.nu = nu;
        m.d = doc.value("d", 2);
        if (m.d < 2) throw ValidationError("local dimension d must be at least 2");
        m.lambda = lambda;
        const auto count = checked_pattern_count(m.d, nu);
        if (!doc.contains("phi") || !doc["phi"].is_array()) throw ValidationError("phi table missing");
        std::vector<double> phi(count, 0.0);
        std::vector<char> have(count, 0);
        for (const auto& entry : doc["phi"]) {
            const auto pattern = entry.at("pattern").get<std::vector<int>>();
            if (static_cast<int>(pattern.size()) != 2 * nu + 1) {
                throw ValidationError("phi pattern must have 2nu+1 spins");
            }
            for (int s : pattern) {
                if (s < 0 || s >= m.d) throw ValidationError("phi pattern spin out of range");
            }
            const auto code = m.encode(pattern);
            if (have[code]) throw ValidationError("phi pattern listed twice");
            have[code] = 1;
            phi[code] = entry.at("energy").get<double>();
        }
        if (std::find(have.begin(), have.end(), 0) != have.end()) throw ValidationError("phi table incomplete");
        m.phi = std::move(phi);

        const int dim = m.d * m.d;
        m.psi.assign(nu, ComplexMatrix::Zero(dim, dim));
        if (doc.contains("psi")) {
            for (int k = 0; k < nu; ++k) {
                const auto key = "dir" + std::to_string(k + 1);
                if (doc["psi"].contains(key)) m.psi[k] = parse_matrix(doc["psi"][key], dim);
            }
        }
        m.ground_states = doc.value("ground_states", std::vector<int>{});
        m.fingerprint = fnv1a(doc.dump());
        finalize_model(m);
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed model document: ") + e.what());
    }
}

}  // namespace cfptas

#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfptas/cluster.hpp"
#include "cfptas/contour.hpp"
#include "cfptas/errors.hpp"
#include "cfptas/exact.hpp"
#include "cfptas/expansion.hpp"
#include "cfptas/lattice.hpp"
#include "cfptas/model.hpp"
#include "cfptas/weight.hpp"

namespace cfptas::cli {
namespace {

using nlohmann::json;

struct Common {
    std::string model_path;
    std::string region;
    std::string region_file;
    std::string boundary = "plus";
    double beta = 1.0;
    std::optional<double> lambda;
};

struct ApproxFlags {
    double epsilon = 0.1;
    double mu_star = 5.0;
    double delta = 1.0;
    std::optional<int> m;
    std::optional<int> n;
    int threads = 1;
};

json complex_json(Complex z) { return {{"re", z.real()}, {"im", z.imag()}}; }

json read_document(const Common& c) {
    json doc;
    try {
        if (c.model_path == "-") {
            doc = json::parse(std::cin);
        } else {
            std::ifstream in(c.model_path);
            if (!in) throw ValidationError("cannot open model file '" + c.model_path + "'");
            doc = json::parse(in);
        }
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("model is not valid JSON: ") + e.what());
    }
    return doc;
}

Model model_with(json doc, std::optional<double> lambda) {
    if (lambda) doc["lambda"] = {*lambda, 0.0};
    return load_model(doc);
}

Model read_model(const Common& c) { return model_with(read_document(c), c.lambda); }

LatticeRegion read_region(const Common& c, const Model& model) {
    if (!c.region_file.empty()) {
        std::ifstream in(c.region_file);
        if (!in) throw ValidationError("cannot open region file '" + c.region_file + "'");
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ValidationError(std::string("region file is not valid JSON: ") + e.what());
        }
        if (!doc.is_array() || doc.empty()) throw ValidationError("region file must be a non-empty list of coordinates");
        std::vector<Coord> vertices;
        for (const auto& p : doc) {
            const auto xs = p.get<std::vector<std::int64_t>>();
            if (static_cast<int>(xs.size()) != model.nu) throw ValidationError("coordinate length differs from model dimension");
            Coord x{};
            std::copy(xs.begin(), xs.end(), x.begin());
            vertices.push_back(x);
        }
        return LatticeRegion(model.nu, std::move(vertices));
    }
    if (c.region.empty()) throw ValidationError("either --region or --region-file is required");
    std::vector<std::int64_t> extents;
    std::stringstream ss(c.region);
    for (std::string part; std::getline(ss, part, 'x');) {
        char* end = nullptr;
        const long v = std::strtol(part.c_str(), &end, 10);
        if (part.empty() || *end != '\0' || v < 1) throw ValidationError("malformed region '" + c.region + "'");
        extents.push_back(v);
    }
    if (static_cast<int>(extents.size()) != model.nu) {
        throw ValidationError("region '" + c.region + "' has " + std::to_string(extents.size()) +
                              " extents but the model has dimension " + std::to_string(model.nu));
    }
    return LatticeRegion::box(extents);
}

int read_boundary(const std::string& text, const Model& model) {
    const int count = static_cast<int>(model.ground_states.size());
    int g = -1;
    if (text == "plus") {
        g = 0;
    } else if (text == "minus") {
        g = count >= 2 ? 1 : -1;
    } else {
        char* end = nullptr;
        const long v = std::strtol(text.c_str(), &end, 10);
        if (!text.empty() && *end == '\0') g = static_cast<int>(v);
    }
    if (g < 0 || g >= count) throw ValidationError("boundary '" + text + "' does not name a ground state");
    return g;
}

void require_positive(double value, const char* what) {
    if (!(value > 0.0) || !std::isfinite(value)) throw ValidationError(std::string(what) + " must be positive");
}

json point_json(const SpaceTimeRegion& st, std::size_t cell) {
    json p = json::array();
    p.push_back(st.slice(cell));
    const auto& x = st.base().vertex(st.site(cell));
    for (int i = 0; i < st.base().dimension(); ++i) p.push_back(x[i]);
    return p;
}

json header(const char* command, const Model& model, const LatticeRegion& region, int g) {
    return {{"schema", 1},
            {"command", command},
            {"model", model.name},
            {"sites", region.size()},
            {"boundary", g}};
}

ExpansionOptions expansion_options(const ApproxFlags& f) {
    ExpansionOptions o;
    o.epsilon = f.epsilon;
    o.mu_star = f.mu_star;
    o.delta = f.delta;
    o.m = f.m;
    o.n = f.n;
    o.threads = f.threads;
    if (const char* dir = std::getenv("CONTOUR_FPTAS_CACHE_DIR")) o.cache_dir = dir;
    return o;
}

json result_json(const ExpansionResult& r) {
    return {{"log_Z", complex_json(r.log_z)},
            {"n_used", r.n_used},
            {"m_used", r.m_used},
            {"beta_hat", r.beta_hat},
            {"epsilon", r.epsilon},
            {"certified", r.certified},
            {"status", r.status},
            {"budget",
             {{"truncation", r.budget.truncation},
              {"weights", r.budget.weights},
              {"slack", r.budget.slack},
              {"weight_error_spent", r.budget.weight_error_spent}}},
            {"constants",
             {{"mu_star", r.constants.mu_star},
              {"alpha", r.constants.alpha},
              {"beta_star", r.constants.beta_star},
              {"lambda_star", r.constants.lambda_star}}},
            {"kp", {{"max_rate", r.kp.max_rate}, {"worst_ratio", r.kp.worst_ratio}, {"pass", r.kp.pass}}},
            {"counts", {{"contours", r.contours}, {"clusters", r.clusters}, {"interiors", r.interiors}}}};
}

std::vector<double> parse_sweep(const std::string& text) {
    std::vector<double> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) {
        char* end = nullptr;
        const double v = std::strtod(p.c_str(), &end);
        if (p.empty() || *end != '\0') throw ValidationError("malformed sweep '" + text + "'");
        parts.push_back(v);
    }
    if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) {
        throw ValidationError("sweep must be start:stop:step with step > 0 and stop >= start");
    }
    std::vector<double> out;
    const auto steps = static_cast<long>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
    for (long i = 0; i <= steps; ++i) out.push_back(parts[0] + static_cast<double>(i) * parts[2]);
    return out;
}

void add_common(CLI::App* sub, Common& c, bool with_beta) {
    sub->add_option("model", c.model_path, "Model JSON file ('-' for stdin)")->required();
    sub->add_option("--region", c.region, "Box extents such as 3x3");
    sub->add_option("--region-file", c.region_file, "JSON list of vertex coordinates");
    sub->add_option("--boundary", c.boundary, "plus, minus, or a ground-state index");
    if (with_beta) sub->add_option("--beta", c.beta, "Inverse temperature");
    sub->add_option("--lambda", c.lambda, "Override the perturbation strength (real)");
}

void add_approx(CLI::App* sub, ApproxFlags& f) {
    sub->add_option("--epsilon", f.epsilon, "Additive error target for log Z");
    sub->add_option("--mu-star", f.mu_star, "Decay constant for the convergence thresholds");
    sub->add_option("--delta", f.delta, "Assumed truncation decay rate");
    sub->add_option("--m", f.m, "Number of time slices");
    sub->add_option("--n", f.n, "Truncation order");
    sub->add_option("--threads", f.threads, "Worker threads")->check(CLI::PositiveNumber);
}

void print(std::ostream& out, const json& doc) { out << doc.dump(2) << '\n'; }

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Cluster-expansion approximation of quantum spin partition functions", "contour-fptas"};
    app.require_subcommand(1);

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Check a model document");
    validate->add_option("model", validate_path, "Model JSON file")->required();

    Common exact_c;
    auto* exact = app.add_subcommand("exact", "Exact log Z by matrix exponential");
    add_common(exact, exact_c, true);

    Common approx_c;
    ApproxFlags approx_f;
    auto* approx = app.add_subcommand("approx", "Truncated cluster expansion estimate of log Z");
    add_common(approx, approx_c, true);
    add_approx(approx, approx_f);

    Common contours_c;
    int contours_m = 1;
    std::size_t max_size = 2;
    std::optional<double> contours_beta;
    auto* contours = app.add_subcommand("contours", "List contours up to a support size");
    add_common(contours, contours_c, false);
    contours->add_option("--m", contours_m, "Number of time slices")->check(CLI::PositiveNumber);
    contours->add_option("--max-size", max_size, "Largest support size");
    contours->add_option("--beta", contours_beta, "Also report weights at this inverse temperature");

    Common clusters_c;
    int clusters_m = 1;
    std::size_t order = 3;
    auto* clusters = app.add_subcommand("clusters", "List clusters of total size below an order");
    add_common(clusters, clusters_c, false);
    clusters->add_option("--m", clusters_m, "Number of time slices")->check(CLI::PositiveNumber);
    clusters->add_option("--order", order, "Clusters have total size < order");

    Common check_c;
    ApproxFlags check_f;
    auto* check = app.add_subcommand("check", "Convergence, stability and weight-decay diagnostics");
    add_common(check, check_c, true);
    add_approx(check, check_f);

    Common compare_c;
    ApproxFlags compare_f;
    std::string beta_sweep, lambda_sweep;
    auto* compare = app.add_subcommand("compare", "CSV table of exact and approximate log Z over a sweep");
    add_common(compare, compare_c, true);
    add_approx(compare, compare_f);
    auto* bs = compare->add_option("--beta-sweep", beta_sweep, "start:stop:step");
    compare->add_option("--lambda-sweep", lambda_sweep, "start:stop:step")->excludes(bs);

    auto report = [&](const char* kind, const std::string& message, int code) {
        err << json{{"schema", 1}, {"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
        return code;
    };

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        return report("usage", e.what(), kUsage);
    }

    try {
        if (validate->parsed()) {
            Common c;
            c.model_path = validate_path;
            const Model model = read_model(c);
            print(out, {{"schema", 1},
                        {"command", "validate"},
                        {"valid", true},
                        {"model", model.name},
                        {"nu", model.nu},
                        {"d", model.d},
                        {"ground_states", model.ground_states},
                        {"e0", model.e0},
                        {"alpha0", model.alpha0},
                        {"lambda", complex_json(model.lambda)}});
        } else if (exact->parsed()) {
            const Model model = read_model(exact_c);
            const auto region = read_region(exact_c, model);
            const int g = read_boundary(exact_c.boundary, model);
            require_positive(exact_c.beta, "beta");
            auto doc = header("exact", model, region, g);
            doc["beta"] = exact_c.beta;
            doc["log_Z"] = complex_json(exact_log_partition(model, region, g, exact_c.beta));
            print(out, doc);
        } else if (approx->parsed()) {
            const Model model = read_model(approx_c);
            const auto region = read_region(approx_c, model);
            const int g = read_boundary(approx_c.boundary, model);
            require_positive(approx_c.beta, "beta");
            const auto r = fptas_log_partition(model, region, g, approx_c.beta, expansion_options(approx_f));
            auto doc = header("approx", model, region, g);
            doc["beta"] = approx_c.beta;
            doc.update(result_json(r));
            print(out, doc);
        } else if (contours->parsed()) {
            const Model model = read_model(contours_c);
            const auto region = read_region(contours_c, model);
            const SpaceTimeRegion st(region, contours_m);
            const auto list = enumerate_contours(st, max_size, static_cast<int>(model.ground_states.size()));
            std::unique_ptr<WeightEngine> engine;
            if (contours_beta) {
                require_positive(*contours_beta, "beta");
                engine = std::make_unique<WeightEngine>(model, st, *contours_beta / contours_m,
                                                        std::max<std::size_t>(kDefaultWeightCap, max_size));
            }
            json items = json::array();
            for (const auto& c : list) {
                json item{{"type", c.type}, {"level", c.level}, {"size", c.size()}};
                item["support"] = json::array();
                for (auto cell : c.support) item["support"].push_back(point_json(st, cell));
                item["interiors"] = json::array();
                for (std::size_t k = 0; k < c.interiors.size(); ++k) {
                    json cells = json::array();
                    for (auto cell : c.interiors[k]) cells.push_back(point_json(st, cell));
                    item["interiors"].push_back({{"label", c.interior_labels[k]}, {"cells", cells}});
                }
                if (engine) item["weight"] = complex_json(engine->weight(c));
                items.push_back(std::move(item));
            }
            auto doc = header("contours", model, region, 0);
            doc.erase("boundary");
            doc["m"] = contours_m;
            doc["max_size"] = max_size;
            doc["count"] = list.size();
            doc["contours"] = std::move(items);
            print(out, doc);
        } else if (clusters->parsed()) {
            const Model model = read_model(clusters_c);
            const auto region = read_region(clusters_c, model);
            const int g = read_boundary(clusters_c.boundary, model);
            const SpaceTimeRegion st(region, clusters_m);
            std::vector<Contour> list;
            if (order > 1) list = enumerate_contours(st, order - 1, static_cast<int>(model.ground_states.size()));
            const auto incompatible = incompatibility_lists(st, list);
            std::vector<char> allowed(list.size(), 0);
            for (std::size_t i = 0; i < list.size(); ++i) allowed[i] = list[i].type == g;
            const auto found = enumerate_clusters(list, incompatible, order, allowed);
            json items = json::array();
            for (const auto& cl : found) {
                items.push_back({{"members", cl.members}, {"size", cl.size}, {"coefficient", cl.coefficient}});
            }
            auto doc = header("clusters", model, region, g);
            doc["m"] = clusters_m;
            doc["order"] = order;
            doc["contours"] = list.size();
            doc["count"] = found.size();
            doc["clusters"] = std::move(items);
            print(out, doc);
        } else if (check->parsed()) {
            const Model model = read_model(check_c);
            const auto region = read_region(check_c, model);
            const int g = read_boundary(check_c.boundary, model);
            require_positive(check_c.beta, "beta");
            const auto opts = expansion_options(check_f);
            const auto constants = convergence_constants(model, opts.mu_star);
            const auto slices = opts.m ? SliceChoice{*opts.m, check_c.beta / *opts.m, false}
                                       : choose_time_slices(check_c.beta, constants.beta_star);
            if (slices.m < 1) throw ValidationError("number of time slices must be positive");
            const int n = opts.n ? *opts.n : truncation_order(region.size(), slices.m, opts.epsilon, opts.delta);
            const SpaceTimeRegion st(region, slices.m);
            ExpansionSettings settings;
            settings.epsilon = opts.epsilon;
            settings.delta = opts.delta;
            settings.threads = opts.threads;
            settings.cache_dir = opts.cache_dir;
            ContourExpansion ex(model, st, slices.beta_hat, n, settings);
            const auto kp = kp_diagnostic(ex, g);

            std::size_t checked = 0, unstable = 0, decay_checked = 0, violations = 0, unmet = 0;
            for (std::size_t i = 0; i < ex.contours().size(); ++i) {
                const auto& c = ex.contours()[i];
                const auto d = weight_decay_check(model, ex.dressed()[i].bare, c.size(), slices.beta_hat,
                                                  constants.alpha);
                ++decay_checked;
                violations += d.status == DecayStatus::Fail;
                unmet += d.status == DecayStatus::HypothesisUnmet;
                if (c.type != g || !c.has_interior()) continue;
                ++checked;
                const auto entries = stability_diagnostic(ex, c, StabilityEvaluator::Expansion);
                unstable += std::any_of(entries.begin(), entries.end(), [](const auto& e) { return !e.stable; });
            }
            auto doc = header("check", model, region, g);
            doc["beta"] = check_c.beta;
            doc["m"] = slices.m;
            doc["n"] = n;
            doc["kp"] = {{"max_rate", kp.max_rate}, {"worst_ratio", kp.worst_ratio}, {"pass", kp.pass}};
            doc["stability"] = {{"checked", checked}, {"unstable", unstable}};
            doc["weight_decay"] = {{"checked", decay_checked}, {"violations", violations}, {"hypothesis_unmet", unmet}};
            doc["stable_log_Z"] = complex_json(stable_truncated_log_partition(ex, g, StabilityEvaluator::Expansion));
            print(out, doc);
        } else if (compare->parsed()) {
            const json document = read_document(compare_c);
            const Model base = model_with(document, compare_c.lambda);
            const auto region = read_region(compare_c, base);
            const int g = read_boundary(compare_c.boundary, base);
            const bool sweep_lambda = !lambda_sweep.empty();
            if (!sweep_lambda && beta_sweep.empty()) throw ValidationError("compare needs --beta-sweep or --lambda-sweep");
            const auto values = parse_sweep(sweep_lambda ? lambda_sweep : beta_sweep);
            const auto opts = expansion_options(compare_f);
            std::ostringstream csv;
            csv << std::setprecision(17);
            csv << (sweep_lambda ? "lambda" : "beta") << ",exact_logZ,approx_logZ,abs_err,certified\n";
            for (double v : values) {
                Model model = base;
                double beta = compare_c.beta;
                if (sweep_lambda) {
                    model = model_with(document, v);
                } else {
                    beta = v;
                }
                require_positive(beta, "beta");
                const double exact_v = exact_log_partition(model, region, g, beta).real();
                const auto r = fptas_log_partition(model, region, g, beta, opts);
                csv << v << ',' << exact_v << ',' << r.log_z.real() << ',' << std::abs(r.log_z.real() - exact_v) << ','
                    << (r.certified ? "true" : "false") << '\n';
            }
            out << csv.str();
        }
    } catch (const ValidationError& e) {
        return report("validation", e.what(), kValidation);
    } catch (const ComputationError& e) {
        return report("computation", e.what(), kComputation);
    } catch (const json::exception& e) {
        return report("validation", e.what(), kValidation);
    } catch (const std::bad_alloc&) {
        return report("computation", "out of memory", kComputation);
    }
    return kOk;
}

}  // namespace cfptas::cli

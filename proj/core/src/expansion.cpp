#include "cfptas/expansion.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cfptas/errors.hpp"

namespace cfptas {
namespace {

// Runs fn(i) for i in [0, count). Results must be written to per-index slots.
template <class F>
void parallel_for(std::size_t count, int threads, F&& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, count); ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

ConvergenceConstants convergence_constants(const Model& model, double mu_star) {
    if (!(mu_star > 0.0)) throw ValidationError("mu_star must be positive");
    if (!(model.alpha0 > 0.0)) throw ValidationError("Peierls constant must be positive");
    ConvergenceConstants c;
    c.mu_star = mu_star;
    const double nu = model.nu;
    // Each addend d e^{-x} <= (1/2) e^{-(mu* + 2(nu+1))}.
    const double threshold = mu_star + 2.0 * (nu + 1.0) + std::log(2.0 * model.d);
    c.alpha = 2.0 * nu * threshold;
    c.beta_star = threshold / model.alpha0;
    c.lambda_star = std::exp(-2.0 * (c.alpha + 1.0)) / ((2.0 * nu + 1.0) * 2.0 * c.beta_star);
    return c;
}

SliceChoice choose_time_slices(double beta, double beta_star) {
    if (!(beta > 0.0) || !(beta_star > 0.0)) throw ValidationError("beta and beta_star must be positive");
    if (beta < beta_star) return {1, beta, false};
    const int m = static_cast<int>(std::floor(beta / beta_star));
    return {std::max(1, m), beta / std::max(1, m), true};
}

int truncation_order(std::size_t volume, int m, double epsilon, double delta) {
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
    if (!(delta > 0.0)) throw ValidationError("delta must be positive");
    const double scale = static_cast<double>(volume) * m;
    auto ok = [&](int n) { return scale * std::exp(-delta * n) <= epsilon / 4.0; };
    int n = std::max(1, static_cast<int>(std::ceil(std::log(4.0 * scale / epsilon) / delta)));
    while (n > 1 && ok(n - 1)) --n;
    while (!ok(n)) ++n;
    return n;
}

Complex truncated_expansion(std::span<const Cluster> clusters, std::span<const Complex> weights,
                            double volume_term, std::size_t n) {
    Complex total{volume_term, 0.0};
    for (const auto& c : clusters) {
        if (c.size >= n) continue;
        Complex term{c.coefficient, 0.0};
        for (auto i : c.members) term *= weights[i];
        total += term;
    }
    return total;
}

std::vector<std::size_t> interior_core(const SpaceTimeRegion& st, std::span<const std::size_t> cells) {
    CellSet in(st.size(), cells);
    std::vector<std::size_t> out;
    for (auto c : cells) {
        const auto& nb = st.neighbors(c);
        if (std::all_of(nb.begin(), nb.end(), [&](std::size_t u) { return in.contains(u); })) out.push_back(c);
    }
    std::sort(out.begin(), out.end());
    return out;
}

ContourExpansion::ContourExpansion(const Model& model, const SpaceTimeRegion& st, double beta_hat, int n,
                                   ExpansionSettings settings)
    : model_(model), st_(st), beta_hat_(beta_hat), n_(n), settings_(std::move(settings)) {
    if (n < 1) throw ValidationError("truncation order must be at least 1");
    engine_ = std::make_unique<WeightEngine>(model, st, beta_hat, std::max<std::size_t>(kDefaultWeightCap, n));
    if (n > 1) contours_ = enumerate_contours(st, static_cast<std::size_t>(n - 1), static_cast<int>(model.ground_states.size()));
    incompatible_ = incompatibility_lists(st, contours_);
    load_cache();
    compute_dressed();
    save_cache();
}

ContourExpansion::~ContourExpansion() = default;

std::vector<std::int64_t> ContourExpansion::interior_key(std::span<const std::size_t> cells, int h) const {
    const auto& region = st_.base();
    const int nu = region.dimension();
    const int m = st_.slices();
    Coord anchor = region.vertex(st_.site(cells.front()));
    for (auto c : cells) {
        const auto& x = region.vertex(st_.site(c));
        for (int i = 0; i < nu; ++i) anchor[i] = std::min(anchor[i], x[i]);
    }
    std::vector<std::int64_t> best;
    for (int shift = 0; shift < m; ++shift) {
        std::vector<std::vector<std::int64_t>> rows;
        for (auto c : cells) {
            std::vector<std::int64_t> row{(st_.slice(c) + shift) % m};
            for (int i = 0; i < nu; ++i) row.push_back(region.vertex(st_.site(c))[i] - anchor[i]);
            rows.push_back(std::move(row));
        }
        std::sort(rows.begin(), rows.end());
        std::vector<std::int64_t> flat{h};
        for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
        if (best.empty() || flat < best) best = std::move(flat);
    }
    return best;
}

ContourExpansion::InteriorValue ContourExpansion::compute_interior(std::span<const std::size_t> cells, int h,
                                                                   int below_level) {
    const auto core = interior_core(st_, cells);
    InteriorValue out;
    if (settings_.exact_interiors) {
        out.log_sum = core.empty() ? Complex{0.0, 0.0}
                                   : std::log(contour_family_sum(*engine_, core, h, settings_.exact_interior_cap));
        return out;
    }
    CellSet inside(st_.size(), core);
    std::vector<char> allowed(contours_.size(), 0);
    for (std::size_t i = 0; i < contours_.size(); ++i) {
        const auto& c = contours_[i];
        if (c.type != h || c.support.size() > core.size()) continue;
        if (!std::all_of(c.support.begin(), c.support.end(), [&](std::size_t x) { return inside.contains(x); })) continue;
        if (c.level >= below_level) throw ComputationError("interior contour processed out of level order");
        allowed[i] = 1;
    }
    const auto clusters = enumerate_clusters(contours_, incompatible_, static_cast<std::size_t>(n_), allowed);
    for (const auto& cl : clusters) {
        Complex term{cl.coefficient, 0.0};
        double rel = 0.0;
        for (auto i : cl.members) {
            term *= dressed_[i].value;
            rel += dressed_[i].error_bound;
        }
        out.log_sum += term;
        out.error += std::abs(term) * rel;
    }
    out.error += static_cast<double>(cells.size()) * std::exp(-settings_.delta * n_);
    return out;
}

void ContourExpansion::compute_dressed() {
    const std::size_t count = contours_.size();
    dressed_.assign(count, {});
    const double volume = static_cast<double>(st_.base().size());

    // Bare weights: one evaluation per memo key, in list order.
    std::vector<CellLabelling> labels(count);
    std::map<std::vector<std::int64_t>, std::size_t> first;
    std::vector<std::size_t> rep(count);
    std::vector<std::size_t> reps;
    for (std::size_t i = 0; i < count; ++i) {
        labels[i] = cell_labelling(st_, contours_[i]);
        auto [it, inserted] = first.emplace(engine_->key(contours_[i].support, labels[i]), i);
        if (inserted) reps.push_back(i);
        rep[i] = it->second;
    }
    std::vector<Complex> bare(count);
    parallel_for(reps.size(), settings_.threads,
                 [&](std::size_t k) { bare[reps[k]] = engine_->weight(contours_[reps[k]].support, labels[reps[k]]); });
    for (std::size_t i = 0; i < count; ++i) {
        dressed_[i].contour = i;
        dressed_[i].bare = bare[rep[i]];
        dressed_[i].value = dressed_[i].bare;
        std::size_t interior = 0;
        for (const auto& comp : contours_[i].interiors) interior += comp.size();
        dressed_[i].budget = settings_.epsilon * static_cast<double>(interior) / volume;
    }

    // Levels are contiguous in the list.
    std::size_t begin = 0;
    while (begin < count) {
        const int level = contours_[begin].level;
        std::size_t end = begin;
        while (end < count && contours_[end].level == level) ++end;
        if (level > 0) {
            struct Task {
                std::vector<std::int64_t> key;
                const std::vector<std::size_t>* cells;
                int label;
            };
            std::vector<Task> tasks;
            std::set<std::vector<std::int64_t>> queued;
            for (std::size_t i = begin; i < end; ++i) {
                const auto& c = contours_[i];
                for (std::size_t k = 0; k < c.interiors.size(); ++k) {
                    if (c.interior_labels[k] == c.type) continue;
                    for (int h : {c.interior_labels[k], c.type}) {
                        auto key = interior_key(c.interiors[k], h);
                        if (interior_memo_.count(key) || !queued.insert(key).second) continue;
                        tasks.push_back({std::move(key), &c.interiors[k], h});
                    }
                }
            }
            std::vector<InteriorValue> values(tasks.size());
            parallel_for(tasks.size(), settings_.threads,
                         [&](std::size_t t) { values[t] = compute_interior(*tasks[t].cells, tasks[t].label, level); });
            for (std::size_t t = 0; t < tasks.size(); ++t) interior_memo_.emplace(tasks[t].key, values[t]);
            if (!tasks.empty()) cache_dirty_ = true;

            for (std::size_t i = begin; i < end; ++i) {
                const auto& c = contours_[i];
                auto& dw = dressed_[i];
                Complex exponent{0.0, 0.0};
                double error = 0.0;
                for (std::size_t k = 0; k < c.interiors.size(); ++k) {
                    if (c.interior_labels[k] == c.type) continue;
                    const auto& num = interior_memo_.at(interior_key(c.interiors[k], c.interior_labels[k]));
                    const auto& den = interior_memo_.at(interior_key(c.interiors[k], c.type));
                    exponent += num.log_sum - den.log_sum;
                    error += num.error + den.error;
                }
                dw.ratio = std::exp(exponent);
                dw.value = dw.bare * dw.ratio;
                dw.error_bound = error;
            }
        }
        begin = end;
    }
}

const std::vector<Cluster>& ContourExpansion::top_clusters(int g) {
    if (g < 0 || g >= static_cast<int>(model_.ground_states.size())) {
        throw ValidationError("boundary ground state index out of range");
    }
    auto it = top_.find(g);
    if (it == top_.end()) {
        std::vector<char> allowed(contours_.size(), 0);
        for (std::size_t i = 0; i < contours_.size(); ++i) allowed[i] = contours_[i].type == g;
        it = top_.emplace(g, enumerate_clusters(contours_, incompatible_, static_cast<std::size_t>(n_), allowed)).first;
    }
    return it->second;
}

Complex ContourExpansion::log_partition(int g, int order) {
    if (order < 1 || order > n_) throw ValidationError("order must lie in [1, n]");
    const auto& clusters = top_clusters(g);
    std::vector<Complex> values(dressed_.size());
    for (std::size_t i = 0; i < dressed_.size(); ++i) values[i] = dressed_[i].value;
    const double volume_term = -beta_hat_ * model_.e0 * static_cast<double>(st_.size());
    return truncated_expansion(clusters, values, volume_term, static_cast<std::size_t>(order));
}

double ContourExpansion::weight_error(int g) {
    double total = 0.0;
    for (const auto& cl : top_clusters(g)) {
        double term = std::abs(cl.coefficient), rel = 0.0;
        for (auto i : cl.members) {
            term *= std::abs(dressed_[i].value);
            rel += dressed_[i].error_bound;
        }
        total += term * rel;
    }
    return total;
}

std::size_t ContourExpansion::cluster_count(int g) { return top_clusters(g).size(); }

Complex ContourExpansion::interior_log_partition(std::span<const std::size_t> cells, int h) {
    const double volume_term = -beta_hat_ * model_.e0 * static_cast<double>(cells.size());
    if (cells.empty()) return {volume_term, 0.0};
    auto key = interior_key(cells, h);
    auto it = interior_memo_.find(key);
    if (it == interior_memo_.end()) {
        it = interior_memo_.emplace(std::move(key), compute_interior(cells, h, std::numeric_limits<int>::max())).first;
        cache_dirty_ = true;
    }
    return volume_term + it->second.log_sum;
}

std::string ContourExpansion::cache_file() const {
    if (settings_.cache_dir.empty()) return {};
    std::ostringstream id;
    id << model_.fingerprint << ':' << std::bit_cast<std::uint64_t>(beta_hat_) << ':' << st_.slices() << ':' << n_
       << ':' << std::bit_cast<std::uint64_t>(settings_.delta) << ':' << settings_.exact_interiors;
    std::ostringstream name;
    name << "interiors-" << std::hex << fnv1a(id.str()) << ".json";
    return (std::filesystem::path(settings_.cache_dir) / name.str()).string();
}

void ContourExpansion::load_cache() {
    const auto path = cache_file();
    if (path.empty() || !std::filesystem::exists(path)) return;
    try {
        std::ifstream in(path);
        const auto doc = nlohmann::json::parse(in);
        for (const auto& e : doc.at("entries")) {
            InteriorValue v{{e.at("re").get<double>(), e.at("im").get<double>()}, e.at("err").get<double>()};
            interior_memo_.emplace(e.at("key").get<std::vector<std::int64_t>>(), v);
        }
    } catch (const std::exception&) {
        // A damaged cache is ignored and rewritten.
        interior_memo_.clear();
        cache_dirty_ = true;
    }
}

void ContourExpansion::save_cache() const {
    const auto path = cache_file();
    if (path.empty() || !cache_dirty_) return;
    nlohmann::json doc;
    doc["schema"] = 1;
    doc["entries"] = nlohmann::json::array();
    for (const auto& [key, v] : interior_memo_) {
        doc["entries"].push_back({{"key", key}, {"re", v.log_sum.real()}, {"im", v.log_sum.imag()}, {"err", v.error}});
    }
    std::error_code ec;
    std::filesystem::create_directories(settings_.cache_dir, ec);
    const auto tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) return;
        out << doc.dump();
    }
    std::filesystem::rename(tmp, path, ec);
}

KpReport kp_diagnostic(const ContourExpansion& expansion, int g) {
    KpReport report;
    const auto& contours = expansion.contours();
    const auto& dressed = expansion.dressed();
    const auto& incompatible = expansion.incompatible();
    for (std::size_t i = 0; i < contours.size(); ++i) {
        if (contours[i].type != g) continue;
        const double size = static_cast<double>(contours[i].size());
        report.max_rate = std::max(report.max_rate, std::pow(std::abs(dressed[i].value), 1.0 / size));
        double sum = 0.0;
        for (auto j : incompatible[i]) {
            if (contours[j].type != g) continue;
            sum += std::abs(dressed[j].value) * std::exp(static_cast<double>(contours[j].size()));
        }
        report.worst_ratio = std::max(report.worst_ratio, sum / size);
    }
    report.pass = report.worst_ratio <= 1.0;
    return report;
}

std::vector<StabilityEntry> stability_diagnostic(ContourExpansion& expansion, const Contour& contour,
                                                 StabilityEvaluator evaluator) {
    const auto& st = expansion.region();
    const int labels = static_cast<int>(expansion.engine().model().ground_states.size());
    std::vector<StabilityEntry> out;
    for (int h = 0; h < labels; ++h) {
        if (h == contour.type) continue;
        const auto cells = contour.interior_with_label(h);
        StabilityEntry e;
        e.label = h;
        e.interior_size = cells.size();
        if (!cells.empty()) {
            CellSet in(st.size(), cells);
            for (auto c : cells) {
                for (auto u : st.neighbors(c)) e.boundary_edges += in.contains(u) ? 0 : 1;
            }
            Complex log_ratio;
            if (evaluator == StabilityEvaluator::Exact) {
                const auto core = interior_core(st, cells);
                auto& engine = expansion.engine();
                log_ratio = core.empty() ? Complex{0.0, 0.0}
                                         : std::log(contour_family_sum(engine, core, h, 24)) -
                                               std::log(contour_family_sum(engine, core, contour.type, 24));
            } else {
                log_ratio = expansion.interior_log_partition(cells, h) -
                            expansion.interior_log_partition(cells, contour.type);
            }
            e.abs_ratio = std::exp(log_ratio.real());
        }
        e.limit = std::exp(4.0 * static_cast<double>(e.boundary_edges));
        e.stable = e.abs_ratio <= e.limit;
        out.push_back(e);
    }
    return out;
}

Complex stable_truncated_log_partition(ContourExpansion& expansion, int g, StabilityEvaluator evaluator) {
    const auto& contours = expansion.contours();
    std::vector<char> allowed(contours.size(), 0);
    for (std::size_t i = 0; i < contours.size(); ++i) {
        if (contours[i].type != g) continue;
        const auto entries = stability_diagnostic(expansion, contours[i], evaluator);
        allowed[i] = std::all_of(entries.begin(), entries.end(), [](const StabilityEntry& e) { return e.stable; });
    }
    const auto clusters = enumerate_clusters(contours, expansion.incompatible(),
                                             static_cast<std::size_t>(expansion.order()), allowed);
    std::vector<Complex> values;
    for (const auto& d : expansion.dressed()) values.push_back(d.value);
    const auto& model = expansion.engine().model();
    const double volume_term = -expansion.beta_hat() * model.e0 * static_cast<double>(expansion.region().size());
    return truncated_expansion(clusters, values, volume_term, static_cast<std::size_t>(expansion.order()));
}

ExpansionResult fptas_log_partition(const Model& model, const LatticeRegion& region, int g, double beta,
                                    const ExpansionOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    if (!(beta > 0.0)) throw ValidationError("beta must be positive");
    if (!(options.epsilon > 0.0 && options.epsilon < 1.0)) throw ValidationError("epsilon must lie in (0, 1)");
    if (g < 0 || g >= static_cast<int>(model.ground_states.size())) {
        throw ValidationError("boundary ground state index out of range");
    }
    if (region.dimension() != model.nu) throw ValidationError("region dimension differs from model dimension");

    ExpansionResult r;
    r.epsilon = options.epsilon;
    r.constants = convergence_constants(model, options.mu_star);
    SliceChoice slices;
    if (options.m) {
        if (*options.m < 1) throw ValidationError("number of time slices must be positive");
        slices = {*options.m, beta / *options.m, beta / *options.m >= r.constants.beta_star};
    } else {
        slices = choose_time_slices(beta, r.constants.beta_star);
    }
    r.m_used = slices.m;
    r.beta_hat = slices.beta_hat;
    r.n_used = options.n ? *options.n : truncation_order(region.size(), slices.m, options.epsilon, options.delta);
    if (r.n_used < 1) throw ValidationError("truncation order must be at least 1");

    const SpaceTimeRegion st(region, slices.m);
    ExpansionSettings settings;
    settings.epsilon = options.epsilon;
    settings.delta = options.delta;
    settings.threads = options.threads;
    settings.cache_dir = options.cache_dir;
    ContourExpansion expansion(model, st, slices.beta_hat, r.n_used, settings);

    r.log_z = expansion.log_partition(g);
    r.contours = expansion.contours().size();
    r.clusters = expansion.cluster_count(g);
    r.interiors = expansion.interior_memo_size();
    r.kp = kp_diagnostic(expansion, g);
    r.budget.truncation = options.epsilon / 4.0;
    r.budget.weights = options.epsilon / 4.0;
    r.budget.slack = options.epsilon / 2.0;
    r.budget.weight_error_spent = expansion.weight_error(g);

    const double hypothesis = std::exp(-2.0 * (r.constants.alpha + 1.0)) / (2.0 * model.nu + 1.0);
    r.certified = slices.certified && r.beta_hat * std::abs(model.lambda) <= hypothesis && r.kp.pass &&
                  r.budget.weight_error_spent <= r.budget.weights;
    r.status = r.certified ? "certified" : "outside certified regime";
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

}  // namespace cfptas

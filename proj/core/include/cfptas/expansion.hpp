#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cfptas/cluster.hpp"
#include "cfptas/contour.hpp"
#include "cfptas/lattice.hpp"
#include "cfptas/linalg.hpp"
#include "cfptas/model.hpp"
#include "cfptas/weight.hpp"

namespace cfptas {

struct ConvergenceConstants {
    double mu_star = 0.0;
    double alpha = 0.0;
    double beta_star = 0.0;
    double lambda_star = 0.0;
};

/// Smallest alpha and beta* with d(e^{-alpha/2nu} + e^{-beta* alpha0}) <= e^{-(mu*+2(nu+1))},
/// each addend taking half; lambda* keeps beta_hat |lambda| <= e^{-2(alpha+1)}/(2nu+1) for
/// every beta_hat < 2 beta*.
ConvergenceConstants convergence_constants(const Model& model, double mu_star);

struct SliceChoice {
    int m = 1;
    double beta_hat = 0.0;
    bool certified = true;
};

/// m = floor(beta / beta*), so beta_hat lies in [beta*, 2 beta*); m = 1 (uncertified) when
/// beta < beta*.
SliceChoice choose_time_slices(double beta, double beta_star);

/// Smallest n >= 1 with volume * m * e^{-delta n} <= epsilon / 4.
int truncation_order(std::size_t volume, int m, double epsilon, double delta);

/// Sum of volume_term and coefficient * prod(weights) over clusters of total size < n, in order.
Complex truncated_expansion(std::span<const Cluster> clusters, std::span<const Complex> weights,
                            double volume_term, std::size_t n);

struct DressedWeight {
    std::size_t contour = 0;
    Complex bare{0.0, 0.0};
    Complex ratio{1.0, 0.0};
    Complex value{0.0, 0.0};
    double error_bound = 0.0;  // recorded relative error
    double budget = 0.0;       // epsilon |int| / |V|
};

struct ExpansionSettings {
    double epsilon = 0.1;
    double delta = 1.0;
    int threads = 1;
    /// Interior ratios from exhaustive contour sums instead of truncated expansions.
    bool exact_interiors = false;
    std::size_t exact_interior_cap = 20;
    /// Directory for the persisted interior memo; empty disables persistence.
    std::string cache_dir;
};

/// Contours of size < n on a space-time region together with their dressed weights,
/// computed level by level. Interior partition functions for an interior component
/// Lambda sum families whose supports avoid the cells of Lambda next to its complement.
class ContourExpansion {
public:
    ContourExpansion(const Model& model, const SpaceTimeRegion& st, double beta_hat, int n,
                     ExpansionSettings settings = {});
    ~ContourExpansion();
    ContourExpansion(const ContourExpansion&) = delete;
    ContourExpansion& operator=(const ContourExpansion&) = delete;

    int order() const noexcept { return n_; }
    double beta_hat() const noexcept { return beta_hat_; }
    const SpaceTimeRegion& region() const noexcept { return st_; }
    const std::vector<Contour>& contours() const noexcept { return contours_; }
    const std::vector<DressedWeight>& dressed() const noexcept { return dressed_; }
    const std::vector<std::vector<std::size_t>>& incompatible() const noexcept { return incompatible_; }
    WeightEngine& engine() noexcept { return *engine_; }

    /// T_order for the whole region with boundary g (order <= n).
    Complex log_partition(int g, int order);
    Complex log_partition(int g) { return log_partition(g, n_); }
    /// Propagated absolute error of the top-level sum from the dressed-weight error bounds.
    double weight_error(int g);
    std::size_t cluster_count(int g);

    /// Truncated log partition function of a finite set of cells with boundary label h,
    /// volume term included.
    Complex interior_log_partition(std::span<const std::size_t> cells, int h);
    std::size_t interior_memo_size() const noexcept { return interior_memo_.size(); }

private:
    struct InteriorValue {
        Complex log_sum{0.0, 0.0};  // cluster sum without the volume term
        double error = 0.0;
    };
    std::vector<std::int64_t> interior_key(std::span<const std::size_t> cells, int h) const;
    InteriorValue compute_interior(std::span<const std::size_t> cells, int h, int below_level);
    const std::vector<Cluster>& top_clusters(int g);
    void compute_dressed();
    void load_cache();
    void save_cache() const;
    std::string cache_file() const;

    const Model& model_;
    const SpaceTimeRegion& st_;
    double beta_hat_;
    int n_;
    ExpansionSettings settings_;
    std::unique_ptr<WeightEngine> engine_;
    std::vector<Contour> contours_;
    std::vector<std::vector<std::size_t>> incompatible_;
    std::vector<DressedWeight> dressed_;
    std::map<std::vector<std::int64_t>, InteriorValue> interior_memo_;
    std::map<int, std::vector<Cluster>> top_;
    bool cache_dirty_ = false;
};

/// Cells of `cells` all of whose neighbours also lie in `cells`.
std::vector<std::size_t> interior_core(const SpaceTimeRegion& st, std::span<const std::size_t> cells);

struct KpReport {
    double max_rate = 0.0;  // max |w|^{1/|support|}
    double worst_ratio = 0.0;  // max over gamma of sum_{incompatible} |w'| e^{|support'|} / |support|
    bool pass = true;
};

/// Empirical Kotecky-Preiss check over the contours of type g.
KpReport kp_diagnostic(const ContourExpansion& expansion, int g);

struct StabilityEntry {
    int label = 0;
    std::size_t interior_size = 0;
    std::size_t boundary_edges = 0;
    double abs_ratio = 1.0;
    double limit = 1.0;
    bool stable = true;
};

enum class StabilityEvaluator { Exact, Expansion };

/// |Z^{g'}_{int_{g'}} / Z^{g}_{int_{g'}}| <= e^{4 |boundary(int_{g'})|} for every g' != type.
std::vector<StabilityEntry> stability_diagnostic(ContourExpansion& expansion, const Contour& contour,
                                                 StabilityEvaluator evaluator);

/// Truncated partition function restricted to stable contours of type g: the volume term
/// plus the cluster sum over contours whose stability entries all pass.
Complex stable_truncated_log_partition(ContourExpansion& expansion, int g, StabilityEvaluator evaluator);

struct ExpansionOptions {
    double epsilon = 0.1;
    double mu_star = 5.0;
    double delta = 1.0;
    std::optional<int> m;
    std::optional<int> n;
    int threads = 1;
    std::string cache_dir;
};

struct ErrorBudget {
    double truncation = 0.0;
    double weights = 0.0;
    double slack = 0.0;
    double weight_error_spent = 0.0;
};

struct ExpansionResult {
    Complex log_z{0.0, 0.0};
    int n_used = 1;
    int m_used = 1;
    double beta_hat = 0.0;
    double epsilon = 0.0;
    ErrorBudget budget;
    ConvergenceConstants constants;
    KpReport kp;
    std::size_t contours = 0;
    std::size_t clusters = 0;
    std::size_t interiors = 0;
    double wall_time = 0.0;
    bool certified = false;
    std::string status;
};

/// End-to-end approximation of log Z_G^g(beta, lambda).
ExpansionResult fptas_log_partition(const Model& model, const LatticeRegion& region, int g, double beta,
                                    const ExpansionOptions& options = {});

}  // namespace cfptas

#pragma once

#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <vector>

#include "cfptas/contour.hpp"
#include "cfptas/lattice.hpp"
#include "cfptas/linalg.hpp"
#include "cfptas/model.hpp"

namespace cfptas {

inline constexpr std::size_t kDefaultWeightCap = 24;

/// Inclusion-exclusion transfer operator on the quantum sites U of one slice.
/// Basis index sum_i s_{holes[i]} d^i.
struct TransferBlock {
    std::vector<std::size_t> holes;
    ComplexMatrix matrix;
};

/// T_{N[U]}(U) with every spin outside U fixed: `slice_spins` gives a spin per region vertex
/// (entries at holes are ignored) and `outer_spin` is the spin on every vertex outside the
/// region. An empty U gives the 1 x 1 identity.
TransferBlock transfer_block(const Model& model, const LatticeRegion& region, std::span<const std::size_t> holes,
                             std::span<const int> slice_spins, int outer_spin, double beta_hat);

/// Computes contour weights on one space-time region, memoizing both weights (keyed by the
/// translated support and labelling) and transfer blocks. Safe to share between threads.
class WeightEngine {
public:
    WeightEngine(const Model& model, const SpaceTimeRegion& st, double beta_hat,
                 std::size_t cap = kDefaultWeightCap);

    /// Weight of the connected excited set `support` whose neighbouring cells outside it carry
    /// the given ground-state labels. Zero when no admissible configuration exists.
    Complex weight(std::span<const std::size_t> support, const CellLabelling& labels);
    Complex weight(const Contour& contour) { return weight(contour.support, cell_labelling(st_, contour)); }

    /// Memo key: support and labels up to spatial translation, with boundary exposure.
    std::vector<std::int64_t> key(std::span<const std::size_t> support, const CellLabelling& labels) const;

    const Model& model() const noexcept { return model_; }
    const SpaceTimeRegion& region() const noexcept { return st_; }
    double beta_hat() const noexcept { return beta_hat_; }
    std::size_t memo_size() const;

private:
    Complex compute(std::span<const std::size_t> support, const CellLabelling& labels);
    ComplexMatrix component_block(std::span<const std::size_t> holes, std::span<const int> slice_spins,
                                  int outer_spin);

    const Model& model_;
    const SpaceTimeRegion& st_;
    double beta_hat_;
    std::size_t cap_;
    bool quantum_;
    mutable std::mutex mutex_;
    std::map<std::vector<std::int64_t>, Complex> weights_;
    std::map<std::vector<std::int64_t>, ComplexMatrix> blocks_;
};

/// Sum over excited sets X inside `domain` and ground-state labels on the components of
/// domain minus X of the product of component weights. Components touching the region's
/// spatial boundary or a cell outside the domain carry `world_label`; the others range over
/// every label. No volume factor.
Complex contour_family_sum(WeightEngine& engine, std::span<const std::size_t> domain, int world_label,
                           std::size_t cap);

/// One-off weight of a contour (no shared memo).
Complex contour_weight(const Model& model, const SpaceTimeRegion& st, const Contour& contour, double beta_hat);

enum class DecayStatus { Pass, Fail, HypothesisUnmet };

struct DecayCheck {
    double abs_weight = 0.0;
    double bound = 0.0;
    DecayStatus status = DecayStatus::Pass;
};

/// |w| against (d (e^{-alpha/2nu} + e^{-beta_hat alpha0}))^{|support|}; the check only applies
/// when beta_hat |lambda| <= e^{-2(alpha+1)} / (2nu+1).
DecayCheck weight_decay_check(const Model& model, Complex weight, std::size_t support_size, double beta_hat,
                              double alpha);

}  // namespace cfptas

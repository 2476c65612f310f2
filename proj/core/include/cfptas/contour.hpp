#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cfptas/lattice.hpp"

namespace cfptas {

/// Dense bitset over the cells of a space-time region.
class CellSet {
public:
    CellSet() = default;
    explicit CellSet(std::size_t n) : words_((n + 63) / 64, 0) {}
    CellSet(std::size_t n, std::span<const std::size_t> cells);

    void insert(std::size_t c) { words_[c >> 6] |= std::uint64_t{1} << (c & 63); }
    bool contains(std::size_t c) const { return (words_[c >> 6] >> (c & 63)) & 1U; }
    bool intersects(const CellSet& other) const;
    bool subset_of(const CellSet& other) const;
    CellSet& operator|=(const CellSet& other);

private:
    std::vector<std::uint64_t> words_;
};

/// A connected support in V x [m] with a ground-state label on each complement
/// component. The labelling function on boundary edges is constant per component, so it is
/// stored per component: `type` for the exterior, `interior_labels[k]` for `interiors[k]`.
struct Contour {
    std::vector<std::size_t> support;                 // sorted cell ids
    std::vector<std::vector<std::size_t>> interiors;  // finite complement components in Z^nu_m
    std::vector<int> interior_labels;
    int type = 0;
    int level = 0;

    std::size_t size() const noexcept { return support.size(); }
    bool has_interior() const noexcept { return !interiors.empty(); }
    /// Union of the interior components carrying label g.
    std::vector<std::size_t> interior_with_label(int g) const;
    /// All interior cells.
    std::vector<std::size_t> interior_cells() const;
};

/// Region cells adjacent to the support (outside it) with their ground-state label, sorted
/// by cell, together with the label seen by neighbours outside V.
struct CellLabelling {
    std::vector<std::pair<std::size_t, int>> neighbors;
    int shell_label = 0;
};

CellLabelling cell_labelling(const SpaceTimeRegion& st, const Contour& contour);

/// Connected supports of size <= max_size inside the region, grown from their minimum
/// cell. Each support is sorted; output sorted by (size, cells).
std::vector<std::vector<std::size_t>> enumerate_supports(const SpaceTimeRegion& st, std::size_t max_size);

/// All contours with |support| <= max_size, every valid labelling with `ground_count`
/// ground states, sorted ascending by level, then size, then coordinates, then labels.
std::vector<Contour> enumerate_contours(const SpaceTimeRegion& st, std::size_t max_size, int ground_count);

/// Level of `contour` given the interior-carrying contours of lower level already known.
/// 0 when the interior is empty, else 1 + max level of any listed support inside it.
int level(const Contour& contour, std::span<const Contour> smaller, std::size_t cell_count);

/// Union of the two supports is disconnected in Z^nu_m.
bool compatible(const SpaceTimeRegion& st, const Contour& a, const Contour& b);

enum class FamilyClass { Matching, External, Neither };

struct FamilyReport {
    bool matching = false;  // matching and of type g
    bool external = false;  // pairwise external and all of type g
    FamilyClass classification() const {
        if (matching) return FamilyClass::Matching;
        if (external) return FamilyClass::External;
        return FamilyClass::Neither;
    }
};

/// Throws ValidationError when the family is not pairwise compatible.
FamilyReport classify_family(const SpaceTimeRegion& st, std::span<const Contour> family, int g);

/// Ordering key used for deterministic output.
bool contour_less(const SpaceTimeRegion& st, const Contour& a, const Contour& b);

}  // namespace cfptas

#include "cfptas/contour.hpp"

#include <algorithm>
#include <map>

#include "cfptas/errors.hpp"

namespace cfptas {

CellSet::CellSet(std::size_t n, std::span<const std::size_t> cells) : CellSet(n) {
    for (auto c : cells) insert(c);
}

bool CellSet::intersects(const CellSet& other) const {
    for (std::size_t i = 0; i < words_.size(); ++i) {
        if (words_[i] & other.words_[i]) return true;
    }
    return false;
}

bool CellSet::subset_of(const CellSet& other) const {
    for (std::size_t i = 0; i < words_.size(); ++i) {
        if (words_[i] & ~other.words_[i]) return false;
    }
    return true;
}

CellSet& CellSet::operator|=(const CellSet& other) {
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= other.words_[i];
    return *this;
}

std::vector<std::size_t> Contour::interior_with_label(int g) const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < interiors.size(); ++k) {
        if (interior_labels[k] == g) out.insert(out.end(), interiors[k].begin(), interiors[k].end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> Contour::interior_cells() const {
    std::vector<std::size_t> out;
    for (const auto& comp : interiors) out.insert(out.end(), comp.begin(), comp.end());
    std::sort(out.begin(), out.end());
    return out;
}

CellLabelling cell_labelling(const SpaceTimeRegion& st, const Contour& contour) {
    std::map<std::size_t, int> interior_label;
    for (std::size_t k = 0; k < contour.interiors.size(); ++k) {
        for (auto c : contour.interiors[k]) interior_label[c] = contour.interior_labels[k];
    }
    CellSet in(st.size(), contour.support);
    std::map<std::size_t, int> seen;
    for (auto c : contour.support) {
        for (auto u : st.neighbors(c)) {
            if (in.contains(u)) continue;
            auto it = interior_label.find(u);
            seen[u] = it == interior_label.end() ? contour.type : it->second;
        }
    }
    return {{seen.begin(), seen.end()}, contour.type};
}

namespace {

struct SupportGrower {
    const SpaceTimeRegion& st;
    std::size_t max_size;
    std::size_t root = 0;
    std::vector<char> seen;
    std::vector<std::size_t> current;
    std::vector<std::vector<std::size_t>>& out;

    void grow(std::vector<std::size_t> untried) {
        while (!untried.empty()) {
            const auto v = untried.back();
            untried.pop_back();
            current.push_back(v);
            auto sorted = current;
            std::sort(sorted.begin(), sorted.end());
            out.push_back(std::move(sorted));
            if (current.size() < max_size) {
                std::vector<std::size_t> added;
                for (auto u : st.neighbors(v)) {
                    if (u > root && !seen[u]) {
                        seen[u] = 1;
                        added.push_back(u);
                    }
                }
                auto next = untried;
                next.insert(next.end(), added.begin(), added.end());
                grow(std::move(next));
                for (auto u : added) seen[u] = 0;
            }
            current.pop_back();
        }
    }
};

bool points_less(const SpaceTimeRegion& st, std::span<const std::size_t> a, std::span<const std::size_t> b) {
    if (a.size() != b.size()) return a.size() < b.size();
    std::vector<SpaceTimePoint> pa, pb;
    for (auto c : a) pa.push_back(st.point(c));
    for (auto c : b) pb.push_back(st.point(c));
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    return pa < pb;
}

}  // namespace

std::vector<std::vector<std::size_t>> enumerate_supports(const SpaceTimeRegion& st, std::size_t max_size) {
    std::vector<std::vector<std::size_t>> out;
    if (max_size == 0) return out;
    SupportGrower grower{st, max_size, 0, std::vector<char>(st.size(), 0), {}, out};
    for (std::size_t root = 0; root < st.size(); ++root) {
        grower.root = root;
        std::fill(grower.seen.begin(), grower.seen.end(), 0);
        grower.seen[root] = 1;
        grower.grow({root});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    return out;
}

int level(const Contour& contour, std::span<const Contour> smaller, std::size_t cell_count) {
    if (!contour.has_interior()) return 0;
    const auto inner = contour.interior_cells();
    CellSet interior(cell_count, inner);
    int best = 0;
    for (const auto& other : smaller) {
        if (other.level + 1 <= best || other.support.size() > inner.size()) continue;
        if (CellSet(cell_count, other.support).subset_of(interior)) best = std::max(best, other.level + 1);
    }
    // Any single interior cell is itself a (level-0) support.
    return std::max(best, 1);
}

bool contour_less(const SpaceTimeRegion& st, const Contour& a, const Contour& b) {
    if (a.level != b.level) return a.level < b.level;
    if (a.support != b.support) return points_less(st, a.support, b.support);
    if (a.type != b.type) return a.type < b.type;
    return a.interior_labels < b.interior_labels;
}

std::vector<Contour> enumerate_contours(const SpaceTimeRegion& st, std::size_t max_size, int ground_count) {
    const auto supports = enumerate_supports(st, max_size);

    struct Shape {
        std::vector<std::size_t> support;
        std::vector<std::vector<std::size_t>> interiors;
        int level = 0;
    };
    std::vector<Shape> shapes;
    shapes.reserve(supports.size());
    for (const auto& s : supports) shapes.push_back({s, st.interior_components(s), 0});

    // Levels depend on supports only. Process holed shapes by interior size so that any
    // holed support inside another's interior (strictly smaller interior) comes first.
    std::vector<std::size_t> holed;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        if (!shapes[i].interiors.empty()) holed.push_back(i);
    }
    auto interior_size = [&](std::size_t i) {
        std::size_t n = 0;
        for (const auto& c : shapes[i].interiors) n += c.size();
        return n;
    };
    std::stable_sort(holed.begin(), holed.end(), [&](auto a, auto b) { return interior_size(a) < interior_size(b); });
    std::vector<Contour> done;
    for (auto i : holed) {
        Contour probe;
        probe.support = shapes[i].support;
        probe.interiors = shapes[i].interiors;
        shapes[i].level = level(probe, done, st.size());
        probe.level = shapes[i].level;
        done.push_back(std::move(probe));
    }

    std::vector<Contour> out;
    for (const auto& shape : shapes) {
        const std::size_t k = shape.interiors.size();
        std::size_t combos = 1;
        for (std::size_t i = 0; i < k + 1; ++i) combos *= static_cast<std::size_t>(ground_count);
        for (std::size_t code = 0; code < combos; ++code) {
            Contour c;
            c.support = shape.support;
            c.interiors = shape.interiors;
            c.level = shape.level;
            std::size_t rest = code;
            c.type = static_cast<int>(rest % ground_count);
            rest /= ground_count;
            for (std::size_t i = 0; i < k; ++i) {
                c.interior_labels.push_back(static_cast<int>(rest % ground_count));
                rest /= ground_count;
            }
            out.push_back(std::move(c));
        }
    }
    std::stable_sort(out.begin(), out.end(), [&](const Contour& a, const Contour& b) { return contour_less(st, a, b); });
    return out;
}

bool compatible(const SpaceTimeRegion& st, const Contour& a, const Contour& b) {
    CellSet in_b(st.size(), b.support);
    for (auto c : a.support) {
        if (in_b.contains(c)) return false;
        for (auto u : st.neighbors(c)) {
            if (in_b.contains(u)) return false;
        }
    }
    return true;
}

FamilyReport classify_family(const SpaceTimeRegion& st, std::span<const Contour> family, int g) {
    for (std::size_t i = 0; i < family.size(); ++i) {
        for (std::size_t j = i + 1; j < family.size(); ++j) {
            if (!compatible(st, family[i], family[j])) throw ValidationError("family is not pairwise compatible");
        }
    }
    const std::size_t n = st.size();
    // External contours.
    std::vector<char> is_external(family.size(), 1);
    for (std::size_t i = 0; i < family.size(); ++i) {
        for (std::size_t j = 0; j < family.size(); ++j) {
            if (i == j || !family[j].has_interior()) continue;
            CellSet inner(n, family[j].interior_cells());
            if (std::any_of(family[i].support.begin(), family[i].support.end(),
                            [&](std::size_t c) { return inner.contains(c); })) {
                is_external[i] = 0;
            }
        }
    }
    bool externals_type_g = true;
    for (std::size_t i = 0; i < family.size(); ++i) {
        if (is_external[i] && family[i].type != g) externals_type_g = false;
    }

    FamilyReport report;
    report.external = externals_type_g && std::all_of(is_external.begin(), is_external.end(), [](char e) { return e; });

    // Complement components of the union within V x [m]; components touching the spatial
    // boundary of V join the outside world (component 0).
    CellSet occupied(n);
    for (const auto& c : family) {
        for (auto cell : c.support) occupied.insert(cell);
    }
    const auto& base = st.base();
    auto touches_outside = [&](std::size_t cell) {
        const auto v = st.site(cell);
        for (int k = 0; k < base.dimension(); ++k) {
            for (int sign : {+1, -1}) {
                if (base.neighbor(v, k, sign) < 0) return true;
            }
        }
        return false;
    };
    std::vector<int> comp(n, -1);
    int next_id = 1;
    for (std::size_t start = 0; start < n; ++start) {
        if (occupied.contains(start) || comp[start] != -1) continue;
        const int id = next_id++;
        std::vector<std::size_t> members, stack{start};
        comp[start] = id;
        bool world = false;
        while (!stack.empty()) {
            auto c = stack.back();
            stack.pop_back();
            members.push_back(c);
            world = world || touches_outside(c);
            for (auto u : st.neighbors(c)) {
                if (!occupied.contains(u) && comp[u] == -1) {
                    comp[u] = id;
                    stack.push_back(u);
                }
            }
        }
        if (world) {
            for (auto c : members) comp[c] = 0;
        }
    }
    std::map<int, int> component_label;
    bool consistent = true;
    auto record = [&](int component, int label) {
        auto [it, inserted] = component_label.emplace(component, label);
        if (!inserted && it->second != label) consistent = false;
    };
    for (const auto& c : family) {
        const auto lab = cell_labelling(st, c);
        for (const auto& [cell, label] : lab.neighbors) record(comp[cell], label);
        for (auto cell : c.support) {
            if (touches_outside(cell)) record(0, lab.shell_label);
        }
    }
    report.matching = consistent && externals_type_g;
    return report;
}

}  // namespace cfptas

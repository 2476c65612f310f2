#include <algorithm>
#include <cmath>
#include <string>

#include "cfptas/errors.hpp"
#include "cfptas/exact.hpp"
#include "cfptas/weight.hpp"

namespace cfptas {

// Every configuration fixes its excited set X and a ground-state label on each component of
// the complement; components reaching the boundary carry the world label. Conversely each
// (X, labels) pair collects exactly the configurations it describes, so summing the product
// of component weights over all pairs reproduces the partition function.
Complex contour_family_sum(WeightEngine& engine, std::span<const std::size_t> domain, int world_label,
                           std::size_t cap) {
    const auto& st = engine.region();
    const auto& region = st.base();
    const std::size_t cells = domain.size();
    if (cells > cap || cells > 30) {
        throw ComputationError("exhaustive contour sum over " + std::to_string(cells) + " cells exceeds cap " +
                               std::to_string(cap));
    }
    const int labels = static_cast<int>(engine.model().ground_states.size());
    if (world_label < 0 || world_label >= labels) throw ValidationError("boundary ground state index out of range");

    std::vector<long> local(st.size(), -1);
    for (std::size_t i = 0; i < cells; ++i) local[domain[i]] = static_cast<long>(i);
    std::vector<char> on_edge(cells, 0);
    for (std::size_t i = 0; i < cells; ++i) {
        const auto v = st.site(domain[i]);
        for (int k = 0; k < region.dimension(); ++k) {
            if (region.neighbor(v, k, +1) < 0 || region.neighbor(v, k, -1) < 0) on_edge[i] = 1;
        }
        for (auto u : st.neighbors(domain[i])) {
            if (local[u] < 0) on_edge[i] = 1;
        }
    }

    Complex total{0.0, 0.0};
    std::vector<int> part(cells);
    for (std::uint32_t mask = 0; mask < (std::uint32_t{1} << cells); ++mask) {
        auto in_x = [&](std::size_t i) { return (mask >> i & 1U) != 0; };
        // Flood fill both X and its complement; part[i] is a component id within its side.
        std::fill(part.begin(), part.end(), -1);
        std::vector<std::vector<std::size_t>> excited, free_parts;
        std::vector<char> free_is_world;
        for (std::size_t s = 0; s < cells; ++s) {
            if (part[s] >= 0) continue;
            const bool side = in_x(s);
            auto& list = side ? excited : free_parts;
            const int id = static_cast<int>(list.size());
            list.emplace_back();
            bool world = false;
            std::vector<std::size_t> stack{s};
            part[s] = id;
            while (!stack.empty()) {
                const auto i = stack.back();
                stack.pop_back();
                list[id].push_back(domain[i]);
                world = world || on_edge[i];
                for (auto u : st.neighbors(domain[i])) {
                    const long j = local[u];
                    if (j >= 0 && part[j] < 0 && in_x(j) == side) {
                        part[j] = id;
                        stack.push_back(static_cast<std::size_t>(j));
                    }
                }
            }
            std::sort(list[id].begin(), list[id].end());
            if (!side) free_is_world.push_back(world ? 1 : 0);
        }

        std::vector<std::size_t> open;
        for (std::size_t i = 0; i < free_parts.size(); ++i) {
            if (!free_is_world[i]) open.push_back(i);
        }
        std::size_t combos = 1;
        for (std::size_t i = 0; i < open.size(); ++i) combos *= static_cast<std::size_t>(labels);

        std::vector<int> label_of_part(free_parts.size(), world_label);
        for (std::size_t code = 0; code < combos; ++code) {
            std::size_t rest = code;
            for (auto i : open) {
                label_of_part[i] = static_cast<int>(rest % labels);
                rest /= labels;
            }
            Complex product{1.0, 0.0};
            for (const auto& component : excited) {
                CellLabelling lab;
                lab.shell_label = world_label;
                for (auto c : component) {
                    for (auto u : st.neighbors(c)) {
                        const long j = local[u];
                        if (j < 0) {
                            lab.neighbors.emplace_back(u, world_label);
                        } else if (!in_x(static_cast<std::size_t>(j))) {
                            lab.neighbors.emplace_back(u, label_of_part[part[j]]);
                        }
                    }
                }
                std::sort(lab.neighbors.begin(), lab.neighbors.end());
                lab.neighbors.erase(std::unique(lab.neighbors.begin(), lab.neighbors.end()), lab.neighbors.end());
                product *= engine.weight(component, lab);
                if (product == Complex{0.0, 0.0}) break;
            }
            total += product;
        }
    }
    return total;
}

Complex exact_contour_sum(const Model& model, const LatticeRegion& region, int g, double beta, int m,
                          std::size_t cap) {
    if (!(beta > 0.0)) throw ValidationError("beta must be positive");
    if (m < 1) throw ValidationError("number of time slices must be positive");
    if (g < 0 || g >= static_cast<int>(model.ground_states.size())) {
        throw ValidationError("boundary ground state index out of range");
    }
    const std::size_t cells = region.size() * static_cast<std::size_t>(m);
    if (cells > cap) {
        throw ComputationError("exact contour sum over " + std::to_string(cells) + " cells exceeds cap " +
                               std::to_string(cap));
    }
    const SpaceTimeRegion st(region, m);
    const double beta_hat = beta / m;
    WeightEngine engine(model, st, beta_hat, cells);
    std::vector<std::size_t> all(cells);
    for (std::size_t c = 0; c < cells; ++c) all[c] = c;
    return std::exp(-beta_hat * model.e0 * static_cast<double>(cells)) * contour_family_sum(engine, all, g, cap);
}

}  // namespace cfptas

#include "cfptas/cluster.hpp"

#include <algorithm>
#include <bit>
#include <set>

#include "cfptas/errors.hpp"

namespace cfptas {

bool SmallGraph::connected() const {
    if (n == 0) return true;
    std::uint32_t seen = 1U, frontier = 1U;
    while (frontier) {
        std::uint32_t next = 0;
        for (std::uint32_t f = frontier; f; f &= f - 1) next |= adj[std::countr_zero(f)];
        frontier = next & ~seen;
        seen |= next;
    }
    return seen == (n == 32 ? ~0U : (1U << n) - 1U);
}

double spanning_connected_sum(const SmallGraph& h) {
    if (h.n == 0) return 0.0;
    if (h.n > 20) throw ComputationError("Ursell function limited to 20 vertices");
    const std::uint32_t full = (1U << h.n) - 1U;
    // c(S) = z(S) - sum_{T < S, min(S) in T} c(T) z(S \ T), z(S) = [S independent].
    std::vector<double> c(std::size_t{1} << h.n, 0.0);
    auto independent = [&](std::uint32_t s) {
        for (std::uint32_t r = s; r; r &= r - 1) {
            if (h.adj[std::countr_zero(r)] & s) return false;
        }
        return true;
    };
    for (std::uint32_t s = 1; s <= full; ++s) {
        const std::uint32_t low = s & (~s + 1U);
        double value = independent(s) ? 1.0 : 0.0;
        const std::uint32_t rest = s & ~low;
        // T = low | sub for every proper subset sub of rest.
        for (std::uint32_t sub = (rest - 1) & rest;; sub = (sub - 1) & rest) {
            if (sub != rest) {
                const std::uint32_t t = low | sub;
                if (c[t] != 0.0 && independent(s & ~t)) value -= c[t];
            }
            if (sub == 0) break;
        }
        c[s] = value;
    }
    return c[full];
}

double ursell(const SmallGraph& h) {
    if (!h.connected()) return 0.0;
    double factorial = 1.0;
    for (int i = 2; i <= h.n; ++i) factorial *= i;
    return spanning_connected_sum(h) / factorial;
}

std::vector<std::vector<std::size_t>> incompatibility_lists(const SpaceTimeRegion& st,
                                                            std::span<const Contour> contours) {
    std::vector<std::vector<std::size_t>> by_cell(st.size());
    for (std::size_t i = 0; i < contours.size(); ++i) {
        for (auto c : contours[i].support) by_cell[c].push_back(i);
    }
    std::vector<std::vector<std::size_t>> out(contours.size());
    std::vector<char> mark(st.size(), 0);
    for (std::size_t i = 0; i < contours.size(); ++i) {
        std::vector<std::size_t> cells;
        for (auto c : contours[i].support) {
            if (!mark[c]) {
                mark[c] = 1;
                cells.push_back(c);
            }
            for (auto u : st.neighbors(c)) {
                if (!mark[u]) {
                    mark[u] = 1;
                    cells.push_back(u);
                }
            }
        }
        for (auto c : cells) {
            mark[c] = 0;
            out[i].insert(out[i].end(), by_cell[c].begin(), by_cell[c].end());
        }
        std::sort(out[i].begin(), out[i].end());
        out[i].erase(std::unique(out[i].begin(), out[i].end()), out[i].end());
    }
    return out;
}

namespace {

double cluster_coefficient(const std::vector<std::size_t>& members,
                           const std::vector<std::vector<std::size_t>>& incompatible) {
    const int k = static_cast<int>(members.size());
    SmallGraph h(k);
    for (int a = 0; a < k; ++a) {
        for (int b = a + 1; b < k; ++b) {
            const auto& list = incompatible[members[a]];
            if (std::binary_search(list.begin(), list.end(), members[b])) h.add_edge(a, b);
        }
    }
    double multiplicity = 1.0;
    for (int a = 0; a < k;) {
        int b = a;
        while (b < k && members[b] == members[a]) ++b;
        for (int i = 2; i <= b - a; ++i) multiplicity *= i;
        a = b;
    }
    return spanning_connected_sum(h) / multiplicity;
}

}  // namespace

std::vector<Cluster> enumerate_clusters(std::span<const Contour> contours,
                                        const std::vector<std::vector<std::size_t>>& incompatible, std::size_t n,
                                        std::span<const char> allowed) {
    auto ok = [&](std::size_t i) { return allowed.empty() || allowed[i]; };
    std::vector<Cluster> out;
    for (std::size_t root = 0; root < contours.size(); ++root) {
        if (!ok(root) || contours[root].size() >= n) continue;
        std::set<std::vector<std::size_t>> seen;
        std::vector<std::pair<std::vector<std::size_t>, std::size_t>> stack{{{root}, contours[root].size()}};
        seen.insert({root});
        while (!stack.empty()) {
            auto [members, size] = std::move(stack.back());
            stack.pop_back();
            out.push_back({members, size, 0.0});
            std::vector<std::size_t> candidates;
            for (auto x : members) {
                for (auto j : incompatible[x]) {
                    if (j >= root && ok(j) && size + contours[j].size() < n) candidates.push_back(j);
                }
            }
            std::sort(candidates.begin(), candidates.end());
            candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
            for (auto j : candidates) {
                auto next = members;
                next.insert(std::upper_bound(next.begin(), next.end(), j), j);
                if (seen.insert(next).second) stack.emplace_back(std::move(next), size + contours[j].size());
            }
        }
    }
    for (auto& c : out) c.coefficient = cluster_coefficient(c.members, incompatible);
    std::sort(out.begin(), out.end(), [](const Cluster& a, const Cluster& b) {
        return a.size != b.size ? a.size < b.size : a.members < b.members;
    });
    return out;
}

std::vector<Cluster> enumerate_clusters(const SpaceTimeRegion& st, std::span<const Contour> contours, std::size_t n) {
    return enumerate_clusters(contours, incompatibility_lists(st, contours), n);
}

}  // namespace cfptas

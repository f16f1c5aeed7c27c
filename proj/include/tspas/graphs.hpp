#pragma once

// Minimum spanning tree, directed k-nearest-neighbour graph with mutual
// (strong) / one-sided (weak) edge classes, and component analysis.
// All algorithms are dense O(n^2) over the complete Euclidean graph.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tspas/instance.hpp"

namespace tspas {

struct WeightedEdge {
    std::size_t i = 0;  // i < j
    std::size_t j = 0;
    double w = 0.0;
};

struct Mst {
    std::vector<WeightedEdge> edges;   // in insertion order of Prim's algorithm
    std::vector<std::size_t> degrees;  // per node

    [[nodiscard]] double total_weight() const {
        double s = 0.0;
        for (const auto& e : edges) s += e.w;
        return s;
    }
};

enum class EdgeClass : unsigned char { Strong, Weak };

struct KnnGraph {
    std::size_t k = 0;
    /// out_neighbors[i] holds the k nearest nodes of i, by ascending
    /// (distance, index).
    std::vector<std::vector<std::size_t>> out_neighbors;
    /// edge_class[i][r] classifies the edge i -> out_neighbors[i][r].
    std::vector<std::vector<EdgeClass>> edge_class;
    /// distances[i][r] = distance(i, out_neighbors[i][r]).
    std::vector<std::vector<double>> distances;

    [[nodiscard]] std::size_t size() const { return out_neighbors.size(); }

    [[nodiscard]] bool has_edge(std::size_t from, std::size_t to) const {
        const auto& out = out_neighbors[from];
        return std::find(out.begin(), out.end(), to) != out.end();
    }

    [[nodiscard]] std::size_t strong_edge_count() const {
        std::size_t c = 0;
        for (const auto& row : edge_class)
            c += static_cast<std::size_t>(std::count(row.begin(), row.end(), EdgeClass::Strong));
        return c;
    }
};

struct ComponentDecomposition {
    /// Labels are 0..count-1, numbered by the smallest node index in each component.
    std::vector<std::size_t> component_id;
    std::vector<std::size_t> sizes;

    [[nodiscard]] std::size_t count() const { return sizes.size(); }
};

namespace detail {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0) {
        std::iota(parent_.begin(), parent_.end(), std::size_t{0});
    }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    bool unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent_[b] = a;
        if (rank_[a] == rank_[b]) ++rank_[a];
        return true;
    }

private:
    std::vector<std::size_t> parent_;
    std::vector<unsigned char> rank_;
};

inline ComponentDecomposition label_components(DisjointSets& sets, std::size_t n) {
    ComponentDecomposition out;
    out.component_id.assign(n, 0);
    std::vector<std::size_t> root_label(n, std::numeric_limits<std::size_t>::max());
    for (std::size_t v = 0; v < n; ++v) {
        const auto r = sets.find(v);
        if (root_label[r] == std::numeric_limits<std::size_t>::max()) {
            root_label[r] = out.sizes.size();
            out.sizes.push_back(0);
        }
        out.component_id[v] = root_label[r];
        ++out.sizes[root_label[r]];
    }
    return out;
}

}  // namespace detail

/// Dense Prim. Equal-weight candidates are resolved towards the smaller
/// (min-index, max-index) pair so the tree is deterministic.
inline Mst minimum_spanning_tree(const Instance& inst) {
    const std::size_t n = inst.size();
    if (n < 3) throw std::invalid_argument("minimum_spanning_tree: n must be >= 3");

    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> best(n, inf);
    std::vector<std::size_t> via(n, 0);
    std::vector<bool> in_tree(n, false);

    auto key = [](std::size_t a, std::size_t b) {
        return std::pair{std::min(a, b), std::max(a, b)};
    };
    auto better = [&](double w, std::pair<std::size_t, std::size_t> e, double w0,
                      std::pair<std::size_t, std::size_t> e0) {
        return w < w0 || (w == w0 && e < e0);
    };

    Mst mst;
    mst.degrees.assign(n, 0);
    mst.edges.reserve(n - 1);

    in_tree[0] = true;
    for (std::size_t v = 1; v < n; ++v) {
        best[v] = distance(inst.nodes[0], inst.nodes[v]);
        via[v] = 0;
    }
    for (std::size_t step = 1; step < n; ++step) {
        std::size_t pick = n;
        for (std::size_t v = 0; v < n; ++v) {
            if (in_tree[v]) continue;
            if (pick == n || better(best[v], key(v, via[v]), best[pick], key(pick, via[pick])))
                pick = v;
        }
        in_tree[pick] = true;
        const auto [a, b] = key(pick, via[pick]);
        mst.edges.push_back({a, b, best[pick]});
        ++mst.degrees[a];
        ++mst.degrees[b];
        const auto& p = inst.nodes[pick];
        for (std::size_t v = 0; v < n; ++v) {
            if (in_tree[v]) continue;
            const double d = distance(p, inst.nodes[v]);
            if (better(d, key(v, pick), best[v], key(v, via[v]))) {
                best[v] = d;
                via[v] = pick;
            }
        }
    }
    return mst;
}

/// Directed k-NN graph; ties in distance go to the lower node index.
inline KnnGraph knn_graph(const Instance& inst, std::size_t k) {
    const std::size_t n = inst.size();
    if (k < 1 || k >= n)
        throw std::invalid_argument("knn_graph: k must satisfy 1 <= k < n (k=" +
                                    std::to_string(k) + ", n=" + std::to_string(n) + ")");
    KnnGraph g;
    g.k = k;
    g.out_neighbors.assign(n, {});
    g.distances.assign(n, {});
    g.edge_class.assign(n, std::vector<EdgeClass>(k, EdgeClass::Weak));

    std::vector<std::pair<double, std::size_t>> cand;
    cand.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        cand.clear();
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) cand.emplace_back(distance(inst.nodes[i], inst.nodes[j]), j);
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
        auto& out = g.out_neighbors[i];
        auto& dist = g.distances[i];
        out.reserve(k);
        dist.reserve(k);
        for (std::size_t r = 0; r < k; ++r) {
            out.push_back(cand[r].second);
            dist.push_back(cand[r].first);
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t r = 0; r < k; ++r)
            if (g.has_edge(g.out_neighbors[i][r], i)) g.edge_class[i][r] = EdgeClass::Strong;
    return g;
}

/// Connected components over mutual (strong) edges only.
inline ComponentDecomposition strong_components(const KnnGraph& g) {
    const std::size_t n = g.size();
    detail::DisjointSets sets(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t r = 0; r < g.k; ++r)
            if (g.edge_class[i][r] == EdgeClass::Strong) sets.unite(i, g.out_neighbors[i][r]);
    return detail::label_components(sets, n);
}

/// Connected components over all edges, direction ignored.
inline ComponentDecomposition weak_components(const KnnGraph& g) {
    const std::size_t n = g.size();
    detail::DisjointSets sets(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t r = 0; r < g.k; ++r) sets.unite(i, g.out_neighbors[i][r]);
    return detail::label_components(sets, n);
}

}  // namespace tspas

#pragma once

// Independent reference implementations used only by the tests. They are
// deliberately naive and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

struct XY {
    double x, y;
};

inline double dist(const XY& a, const XY& b) { return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y)); }

/// Sum of weights in ascending order (order-independent comparison key).
inline double sorted_sum(std::vector<double> w) {
    std::sort(w.begin(), w.end());
    double s = 0.0;
    for (double v : w) s += v;
    return s;
}

/// Decodes a Pruefer sequence into the n-1 edges of a labelled tree.
inline std::vector<std::pair<int, int>> pruefer_decode(const std::vector<int>& seq, int n) {
    std::vector<int> degree(static_cast<std::size_t>(n), 1);
    for (int v : seq) ++degree[static_cast<std::size_t>(v)];
    std::vector<std::pair<int, int>> edges;
    for (int v : seq) {
        for (int leaf = 0; leaf < n; ++leaf)
            if (degree[static_cast<std::size_t>(leaf)] == 1) {
                edges.emplace_back(std::min(leaf, v), std::max(leaf, v));
                --degree[static_cast<std::size_t>(leaf)];
                --degree[static_cast<std::size_t>(v)];
                break;
            }
    }
    int a = -1, b = -1;
    for (int u = 0; u < n; ++u)
        if (degree[static_cast<std::size_t>(u)] == 1) (a < 0 ? a : b) = u;
    edges.emplace_back(a, b);
    return edges;
}

/// Calls fn(edges) for every one of the n^(n-2) spanning trees of K_n.
inline void for_each_spanning_tree(int n, const std::function<void(const std::vector<std::pair<int, int>>&)>& fn) {
    std::vector<int> seq(static_cast<std::size_t>(n - 2), 0);
    for (;;) {
        fn(pruefer_decode(seq, n));
        std::size_t i = 0;
        while (i < seq.size() && ++seq[i] == n) seq[i++] = 0;
        if (i == seq.size()) return;
    }
}

struct BruteMst {
    double weight = std::numeric_limits<double>::infinity();  // sorted_sum of the best tree
    std::vector<std::pair<int, int>> edges;
    std::size_t trees = 0;
};

inline BruteMst brute_force_mst(const std::vector<XY>& pts) {
    BruteMst best;
    const int n = static_cast<int>(pts.size());
    for_each_spanning_tree(n, [&](const std::vector<std::pair<int, int>>& edges) {
        ++best.trees;
        std::vector<double> w;
        for (auto [a, b] : edges) w.push_back(dist(pts[static_cast<std::size_t>(a)], pts[static_cast<std::size_t>(b)]));
        const double s = sorted_sum(w);
        if (s < best.weight) {
            best.weight = s;
            best.edges = edges;
        }
    });
    std::sort(best.edges.begin(), best.edges.end());
    return best;
}

/// Exact two-sided WMW p by enumerating which of the N = m+n ranks belong to
/// the first sample. Requires distinct values.
inline double wmw_exact_p(const std::vector<double>& xs, const std::vector<double>& ys) {
    std::vector<std::pair<double, int>> all;
    for (double v : xs) all.emplace_back(v, 0);
    for (double v : ys) all.emplace_back(v, 1);
    std::sort(all.begin(), all.end());
    const int N = static_cast<int>(all.size());
    const int m = static_cast<int>(xs.size());
    long observed_rank_sum = 0;
    for (int i = 0; i < N; ++i)
        if (all[static_cast<std::size_t>(i)].second == 0) observed_rank_sum += i + 1;
    std::uint64_t le = 0, ge = 0, total = 0;
    for (std::uint32_t mask = 0; mask < (1u << N); ++mask) {
        if (__builtin_popcount(mask) != m) continue;
        long s = 0;
        for (int i = 0; i < N; ++i)
            if (mask & (1u << i)) s += i + 1;
        ++total;
        if (s <= observed_rank_sum) ++le;
        if (s >= observed_rank_sum) ++ge;
    }
    const double p = 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(total);
    return std::min(1.0, p);
}

/// Number of pixels on a Bresenham segment between integer endpoints.
inline std::size_t bresenham_length(long x0, long y0, long x1, long y1) {
    return static_cast<std::size_t>(std::max(std::labs(x1 - x0), std::labs(y1 - y0))) + 1;
}

/// Brute-force argmin over the 101-point theta grid (ties -> smallest theta).
inline double brute_theta(const std::vector<double>& p, const std::vector<std::pair<double, double>>& par10,
                          const std::vector<double>& cost, bool include_cost) {
    double best_theta = 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 100; ++i) {
        const double theta = i / 100.0;
        double s = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k)
            s += (p[k] >= theta ? par10[k].first : par10[k].second) + (include_cost ? cost[k] : 0.0);
        s /= static_cast<double>(p.size());
        if (s < best) {
            best = s;
            best_theta = theta;
        }
    }
    return best_theta;
}

}  // namespace oracle

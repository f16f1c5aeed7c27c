#pragma once

// CART decision trees (Gini impurity) and bagged random forests for the
// two-class EAX/LKH selection problem.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tspas/parallel.hpp"
#include "tspas/solver.hpp"

namespace tspas {

/// Dense row-major feature matrix (instances x features).
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}
    FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) throw std::invalid_argument("FeatureMatrix: bad data size");
    }

    [[nodiscard]] std::size_t rows() const { return rows_; }
    [[nodiscard]] std::size_t cols() const { return cols_; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    [[nodiscard]] std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }
    [[nodiscard]] const std::vector<double>& data() const { return data_; }

    [[nodiscard]] std::vector<double> column(std::size_t c) const {
        std::vector<double> out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
        return out;
    }

    [[nodiscard]] FeatureMatrix select_rows(std::span<const std::size_t> idx) const {
        FeatureMatrix m(idx.size(), cols_);
        for (std::size_t i = 0; i < idx.size(); ++i)
            std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(idx[i] * cols_), cols_,
                        m.data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
        return m;
    }

    [[nodiscard]] FeatureMatrix select_cols(std::span<const std::size_t> idx) const {
        FeatureMatrix m(rows_, idx.size());
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t j = 0; j < idx.size(); ++j) m(r, j) = (*this)(r, idx[j]);
        return m;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct ClassProbabilities {
    double p_eax = 0.5;
    double p_lkh = 0.5;
};

struct TreeParams {
    std::size_t max_depth = 32;
    std::size_t min_leaf_size = 1;
    /// Features examined per split; 0 means all.
    std::size_t mtry = 0;
};

struct TreeNode {
    static constexpr std::int32_t kLeaf = -1;
    std::int32_t feature = kLeaf;
    double threshold = 0.0;  // x <= threshold goes left
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    double p_eax = 0.5;  // leaves only

    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class DecisionTree {
public:
    DecisionTree() = default;
    DecisionTree(std::vector<TreeNode> nodes, std::size_t n_features)
        : nodes_(std::move(nodes)), n_features_(n_features) {}

    [[nodiscard]] ClassProbabilities predict_proba(std::span<const double> x) const {
        if (x.size() != n_features_)
            throw std::invalid_argument("predict_proba: expected " + std::to_string(n_features_) +
                                        " features, got " + std::to_string(x.size()));
        std::uint32_t i = 0;
        while (nodes_[i].feature != TreeNode::kLeaf)
            i = x[static_cast<std::size_t>(nodes_[i].feature)] <= nodes_[i].threshold
                    ? nodes_[i].left
                    : nodes_[i].right;
        return {nodes_[i].p_eax, 1.0 - nodes_[i].p_eax};
    }

    [[nodiscard]] std::size_t depth() const { return depth_from(0); }
    [[nodiscard]] const std::vector<TreeNode>& nodes() const { return nodes_; }
    [[nodiscard]] std::size_t n_features() const { return n_features_; }

    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

private:
    [[nodiscard]] std::size_t depth_from(std::uint32_t i) const {
        if (nodes_[i].feature == TreeNode::kLeaf) return 0;
        return 1 + std::max(depth_from(nodes_[i].left), depth_from(nodes_[i].right));
    }

    std::vector<TreeNode> nodes_;
    std::size_t n_features_ = 0;
};

namespace detail {

inline double gini(std::size_t eax, std::size_t total) {
    if (total == 0) return 0.0;
    const double p = static_cast<double>(eax) / static_cast<double>(total);
    return 2.0 * p * (1.0 - p);
}

class TreeBuilder {
public:
    TreeBuilder(const FeatureMatrix& X, std::span<const Solver> y, const TreeParams& params,
                std::mt19937_64* rng)
        : X_(X), y_(y), params_(params), rng_(rng) {
        features_.resize(X.cols());
        std::iota(features_.begin(), features_.end(), std::size_t{0});
    }

    DecisionTree build(std::vector<std::size_t> rows) {
        nodes_.clear();
        grow(std::move(rows), 0);
        return DecisionTree(std::move(nodes_), X_.cols());
    }

private:
    struct Split {
        bool found = false;
        std::size_t feature = 0;
        double threshold = 0.0;
        double gain = 0.0;
    };

    std::uint32_t grow(std::vector<std::size_t> rows, std::size_t depth) {
        const auto id = static_cast<std::uint32_t>(nodes_.size());
        nodes_.emplace_back();
        std::size_t eax = 0;
        for (auto r : rows) eax += y_[r] == Solver::EAX;
        const std::size_t n = rows.size();

        Split split;
        const bool pure = eax == 0 || eax == n;
        if (!pure && depth < params_.max_depth && n >= 2 * params_.min_leaf_size)
            split = best_split(rows, eax);
        if (!split.found) {
            nodes_[id].p_eax = static_cast<double>(eax) / static_cast<double>(n);
            return id;
        }
        std::vector<std::size_t> left, right;
        for (auto r : rows)
            (X_(r, split.feature) <= split.threshold ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();
        const auto l = grow(std::move(left), depth + 1);
        const auto rr = grow(std::move(right), depth + 1);
        auto& node = nodes_[id];
        node.feature = static_cast<std::int32_t>(split.feature);
        node.threshold = split.threshold;
        node.left = l;
        node.right = rr;
        return id;
    }

    std::vector<std::size_t> candidate_features() {
        const std::size_t p = features_.size();
        const std::size_t m = params_.mtry == 0 ? p : std::min(params_.mtry, p);
        if (m == p || rng_ == nullptr) return features_;
        std::vector<std::size_t> pool = features_;
        for (std::size_t i = 0; i < m; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, p - 1);
            std::swap(pool[i], pool[pick(*rng_)]);
        }
        pool.resize(m);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

    // Largest Gini gain; ties keep the lowest feature index, then the lowest
    // threshold. Zero-gain splits of impure nodes are allowed.
    Split best_split(const std::vector<std::size_t>& rows, std::size_t eax_total) {
        const std::size_t n = rows.size();
        const double parent = gini(eax_total, n);
        Split best;
        std::vector<std::pair<double, bool>> vals(n);
        for (auto f : candidate_features()) {
            for (std::size_t i = 0; i < n; ++i)
                vals[i] = {X_(rows[i], f), y_[rows[i]] == Solver::EAX};
            std::sort(vals.begin(), vals.end());
            std::size_t left_eax = 0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left_eax += vals[i].second;
                const double a = vals[i].first;
                const double b = vals[i + 1].first;
                if (!(a < b)) continue;
                const std::size_t nl = i + 1;
                const std::size_t nr = n - nl;
                if (nl < params_.min_leaf_size || nr < params_.min_leaf_size) continue;
                const double gain =
                    parent - (static_cast<double>(nl) * gini(left_eax, nl) +
                              static_cast<double>(nr) * gini(eax_total - left_eax, nr)) /
                                 static_cast<double>(n);
                if (!best.found || gain > best.gain) {
                    double mid = a + (b - a) / 2.0;
                    if (!(mid < b)) mid = a;
                    best = {true, f, mid, gain};
                }
            }
        }
        return best;
    }

    const FeatureMatrix& X_;
    std::span<const Solver> y_;
    TreeParams params_;
    std::mt19937_64* rng_;
    std::vector<std::size_t> features_;
    std::vector<TreeNode> nodes_;
};

}  // namespace detail

/// Greedy CART on the given rows (all rows when `rows` is empty).
inline DecisionTree tree_fit(const FeatureMatrix& X, std::span<const Solver> y,
                             const TreeParams& params = {}, std::mt19937_64* rng = nullptr,
                             std::vector<std::size_t> rows = {}) {
    if (X.rows() == 0 || X.cols() == 0) throw std::invalid_argument("tree_fit: empty data");
    if (y.size() != X.rows()) throw std::invalid_argument("tree_fit: label count mismatch");
    if (params.min_leaf_size < 1) throw std::invalid_argument("tree_fit: min_leaf_size >= 1");
    if (rows.empty()) {
        rows.resize(X.rows());
        std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    detail::TreeBuilder builder(X, y, params, rng);
    return builder.build(std::move(rows));
}

struct ForestParams {
    std::size_t n_trees = 500;
    /// Features per split; 0 means floor(sqrt(p)).
    std::size_t mtry = 0;
    std::uint64_t seed = 1;
    bool bootstrap = true;
    std::size_t max_depth = 32;
    std::size_t min_leaf_size = 1;
    std::size_t jobs = 1;
};

class RandomForest {
public:
    RandomForest() = default;
    RandomForest(std::vector<DecisionTree> trees, std::vector<std::vector<std::size_t>> oob,
                 std::size_t n_features, std::size_t n_train)
        : trees_(std::move(trees)), oob_(std::move(oob)), n_features_(n_features), n_train_(n_train) {}

    /// Mean of the trees' leaf distributions.
    [[nodiscard]] ClassProbabilities predict_proba(std::span<const double> x) const {
        if (x.size() != n_features_)
            throw std::invalid_argument("predict_proba: expected " + std::to_string(n_features_) +
                                        " features, got " + std::to_string(x.size()));
        if (trees_.empty()) throw std::logic_error("predict_proba: empty forest");
        double s = 0.0;
        for (const auto& t : trees_) s += t.predict_proba(x).p_eax;
        const double p = s / static_cast<double>(trees_.size());
        return {p, 1.0 - p};
    }

    /// Out-of-bag P(EAX) for each training row; rows that were never out of
    /// bag get `oob_counts[i] == 0` and probability 0.5.
    struct OobPrediction {
        std::vector<double> p_eax;
        std::vector<std::size_t> oob_counts;
    };

    [[nodiscard]] OobPrediction oob_predict(const FeatureMatrix& X_train) const {
        if (X_train.rows() != n_train_) throw std::invalid_argument("oob_predict: row mismatch");
        OobPrediction out;
        std::vector<double> sum(n_train_, 0.0);
        out.oob_counts.assign(n_train_, 0);
        for (std::size_t t = 0; t < trees_.size(); ++t)
            for (auto i : oob_[t]) {
                sum[i] += trees_[t].predict_proba(X_train.row(i)).p_eax;
                ++out.oob_counts[i];
            }
        out.p_eax.resize(n_train_);
        for (std::size_t i = 0; i < n_train_; ++i)
            out.p_eax[i] = out.oob_counts[i] ? sum[i] / static_cast<double>(out.oob_counts[i]) : 0.5;
        return out;
    }

    [[nodiscard]] const std::vector<DecisionTree>& trees() const { return trees_; }
    [[nodiscard]] const std::vector<std::vector<std::size_t>>& oob_indices() const { return oob_; }
    [[nodiscard]] std::size_t n_features() const { return n_features_; }
    [[nodiscard]] std::size_t n_train() const { return n_train_; }

    friend bool operator==(const RandomForest&, const RandomForest&) = default;

private:
    std::vector<DecisionTree> trees_;
    std::vector<std::vector<std::size_t>> oob_;
    std::size_t n_features_ = 0;
    std::size_t n_train_ = 0;
};

/// Bagged CART forest. Tree t uses a seed derived from (seed, t), so the
/// model is bit-identical for any `jobs`.
inline RandomForest forest_fit(const FeatureMatrix& X, std::span<const Solver> y,
                               const ForestParams& params = {}) {
    if (X.rows() == 0 || X.cols() == 0) throw std::invalid_argument("forest_fit: empty data");
    if (y.size() != X.rows()) throw std::invalid_argument("forest_fit: label count mismatch");
    if (params.n_trees == 0) throw std::invalid_argument("forest_fit: n_trees must be >= 1");
    const std::size_t n = X.rows();
    TreeParams tp;
    tp.max_depth = params.max_depth;
    tp.min_leaf_size = params.min_leaf_size;
    tp.mtry = params.mtry == 0
                  ? std::max<std::size_t>(1, static_cast<std::size_t>(
                                                 std::floor(std::sqrt(static_cast<double>(X.cols())))))
                  : params.mtry;

    std::vector<DecisionTree> trees(params.n_trees);
    std::vector<std::vector<std::size_t>> oob(params.n_trees);
    parallel_for(params.n_trees, params.jobs, [&](std::size_t t) {
        std::mt19937_64 rng(derive_seed(params.seed, t));
        std::vector<std::size_t> rows(n);
        if (params.bootstrap) {
            std::uniform_int_distribution<std::size_t> pick(0, n - 1);
            std::vector<bool> drawn(n, false);
            for (auto& r : rows) {
                r = pick(rng);
                drawn[r] = true;
            }
            std::sort(rows.begin(), rows.end());
            for (std::size_t i = 0; i < n; ++i)
                if (!drawn[i]) oob[t].push_back(i);
        } else {
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        trees[t] = tree_fit(X, y, tp, &rng, std::move(rows));
    });
    return RandomForest(std::move(trees), std::move(oob), X.cols(), n);
}

// ---------------------------------------------------------------------------
// Text serialization with hexadecimal floats (exact round trip).

namespace detail {

inline std::string hex_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::hex);
    if (ec != std::errc()) throw std::runtime_error("hex_double failed");
    return std::string(buf, p);
}

inline double parse_hex_double(const std::string& s) {
    double v = 0.0;
    std::string_view sv(s);
    bool neg = false;
    if (!sv.empty() && sv.front() == '-') {
        neg = true;
        sv.remove_prefix(1);
    }
    auto [p, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v, std::chars_format::hex);
    if (ec != std::errc() || p != sv.data() + sv.size())
        throw std::runtime_error("bad hex float '" + s + "'");
    return neg ? -v : v;
}

inline void write_tree(std::ostream& out, const DecisionTree& tree) {
    out << "tree " << tree.nodes().size() << "\n";
    for (const auto& nd : tree.nodes())
        out << nd.feature << ' ' << hex_double(nd.threshold) << ' ' << nd.left << ' ' << nd.right
            << ' ' << hex_double(nd.p_eax) << "\n";
}

inline DecisionTree read_tree(std::istream& in, std::size_t n_features) {
    std::string tag;
    std::size_t count = 0;
    if (!(in >> tag >> count) || tag != "tree") throw std::runtime_error("model: expected 'tree'");
    std::vector<TreeNode> nodes(count);
    for (auto& nd : nodes) {
        std::string thr, p;
        if (!(in >> nd.feature >> thr >> nd.left >> nd.right >> p))
            throw std::runtime_error("model: truncated tree");
        nd.threshold = parse_hex_double(thr);
        nd.p_eax = parse_hex_double(p);
        if (nd.feature != TreeNode::kLeaf &&
            (nd.feature < 0 || static_cast<std::size_t>(nd.feature) >= n_features ||
             nd.left >= count || nd.right >= count))
            throw std::runtime_error("model: node references out of range");
    }
    if (nodes.empty()) throw std::runtime_error("model: empty tree");
    return DecisionTree(std::move(nodes), n_features);
}

}  // namespace detail

inline std::string serialize(const DecisionTree& tree) {
    std::ostringstream out;
    out << "tspas-tree 1\nfeatures " << tree.n_features() << "\n";
    detail::write_tree(out, tree);
    return out.str();
}

inline DecisionTree deserialize_tree(const std::string& text) {
    std::istringstream in(text);
    std::string magic, kw;
    int version = 0;
    std::size_t p = 0;
    if (!(in >> magic >> version >> kw >> p) || magic != "tspas-tree" || version != 1 || kw != "features")
        throw std::runtime_error("not a tspas-tree v1 model");
    return detail::read_tree(in, p);
}

inline std::string serialize(const RandomForest& forest) {
    std::ostringstream out;
    out << "tspas-forest 1\nfeatures " << forest.n_features() << "\ntrain_rows "
        << forest.n_train() << "\ntrees " << forest.trees().size() << "\n";
    for (std::size_t t = 0; t < forest.trees().size(); ++t) {
        out << "oob " << forest.oob_indices()[t].size();
        for (auto i : forest.oob_indices()[t]) out << ' ' << i;
        out << "\n";
        detail::write_tree(out, forest.trees()[t]);
    }
    return out.str();
}

inline RandomForest deserialize_forest(const std::string& text) {
    std::istringstream in(text);
    std::string magic, kw1, kw2, kw3;
    int version = 0;
    std::size_t p = 0, n_train = 0, n_trees = 0;
    if (!(in >> magic >> version >> kw1 >> p >> kw2 >> n_train >> kw3 >> n_trees) ||
        magic != "tspas-forest" || version != 1 || kw1 != "features" || kw2 != "train_rows" ||
        kw3 != "trees")
        throw std::runtime_error("not a tspas-forest v1 model");
    std::vector<DecisionTree> trees;
    std::vector<std::vector<std::size_t>> oob(n_trees);
    for (std::size_t t = 0; t < n_trees; ++t) {
        std::string tag;
        std::size_t count = 0;
        if (!(in >> tag >> count) || tag != "oob") throw std::runtime_error("model: expected 'oob'");
        oob[t].resize(count);
        for (auto& i : oob[t])
            if (!(in >> i) || i >= n_train) throw std::runtime_error("model: bad oob index");
        trees.push_back(detail::read_tree(in, p));
    }
    return RandomForest(std::move(trees), std::move(oob), p, n_train);
}

}  // namespace tspas

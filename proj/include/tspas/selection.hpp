#pragma once

// Experiment harness for feature-based selectors: stratified folds,
// PAR10-driven threshold tuning, hardest-instance subsets, wrapper feature
// selection (sffs / sfbs / exhaustive) and cross-validated evaluation.

#include <algorithm>
#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "tspas/config.hpp"
#include "tspas/csv.hpp"
#include "tspas/models.hpp"
#include "tspas/parallel.hpp"
#include "tspas/scoring.hpp"
#include "tspas/stats_tests.hpp"

namespace tspas {

// ---------------------------------------------------------------------------
// Folds

struct FoldAssignment {
    std::vector<std::size_t> fold_of;  // per instance, in [0, n_folds)
    std::size_t n_folds = 0;
    std::uint64_t seed = 0;

    [[nodiscard]] std::vector<std::size_t> test_rows(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < fold_of.size(); ++i)
            if (fold_of[i] == fold) out.push_back(i);
        return out;
    }
    [[nodiscard]] std::vector<std::size_t> train_rows(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < fold_of.size(); ++i)
            if (fold_of[i] != fold) out.push_back(i);
        return out;
    }
};

/// Stratified assignment: each class is shuffled with the seed, then the
/// classes are dealt round-robin over the folds in one continuous sequence.
inline FoldAssignment make_folds(std::span<const Solver> labels, std::size_t n_folds,
                                 std::uint64_t seed) {
    if (n_folds < 2) throw std::invalid_argument("make_folds: need at least 2 folds");
    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[index_of(labels[i])].push_back(i);
    for (auto s : kSolvers)
        if (by_class[index_of(s)].size() < n_folds)
            throw std::invalid_argument("make_folds: class " + std::string(to_string(s)) + " has " +
                                        std::to_string(by_class[index_of(s)].size()) +
                                        " instances, fewer than " + std::to_string(n_folds) +
                                        " folds");
    std::mt19937_64 rng(seed);
    FoldAssignment fa;
    fa.n_folds = n_folds;
    fa.seed = seed;
    fa.fold_of.assign(labels.size(), 0);
    std::size_t counter = 0;
    for (auto& members : by_class) {
        std::shuffle(members.begin(), members.end(), rng);
        for (auto i : members) fa.fold_of[i] = counter++ % n_folds;
    }
    return fa;
}

/// "instance_id,fold"
inline std::string write_fold_csv(const FoldAssignment& folds, const PerformanceTable& table) {
    std::string out = "instance_id,fold\n";
    for (std::size_t i = 0; i < table.size(); ++i)
        out += table[i].instance_id + "," + std::to_string(folds.fold_of[i]) + "\n";
    return out;
}

/// Reads a fold file and aligns it with the table's instance order.
inline FoldAssignment read_fold_csv(std::string_view text, const PerformanceTable& table) {
    const auto doc = csv::parse(text);
    const auto c_id = doc.column("instance_id");
    const auto c_fold = doc.column("fold");
    FoldAssignment fa;
    fa.fold_of.assign(table.size(), std::numeric_limits<std::size_t>::max());
    std::size_t max_fold = 0;
    for (const auto& rec : doc.records) {
        const auto row = table.find(rec.fields[c_id]);
        if (!row) throw csv::CsvError(rec.line, "unknown instance '" + rec.fields[c_id] + "'");
        const auto f = csv::to_int(rec.fields[c_fold], rec.line);
        if (f < 0) throw csv::CsvError(rec.line, "negative fold");
        fa.fold_of[*row] = static_cast<std::size_t>(f);
        max_fold = std::max(max_fold, static_cast<std::size_t>(f));
    }
    for (std::size_t i = 0; i < table.size(); ++i)
        if (fa.fold_of[i] == std::numeric_limits<std::size_t>::max())
            throw std::invalid_argument("fold file has no entry for " + table[i].instance_id);
    fa.n_folds = max_fold + 1;
    return fa;
}

// ---------------------------------------------------------------------------
// Threshold tuning

enum class TunedOn { Oob, InnerCv, TrainResubstitution, Holdout, Fixed };

inline std::string_view to_string(TunedOn t) {
    switch (t) {
        case TunedOn::Oob: return "oob";
        case TunedOn::InnerCv: return "inner_cv";
        case TunedOn::TrainResubstitution: return "train_resubstitution";
        case TunedOn::Holdout: return "holdout";
        case TunedOn::Fixed: return "fixed";
    }
    return "unknown";
}

/// Predict EAX iff p_eax >= theta.
struct ThresholdPolicy {
    double theta = 0.5;
    TunedOn tuned_on = TunedOn::Oob;

    [[nodiscard]] Solver apply(double p_eax) const { return p_eax >= theta ? Solver::EAX : Solver::LKH; }
};

/// Mean PAR10 (+ cost) of thresholding `p_eax` at theta.
inline double thresholded_par10(double theta, std::span<const double> p_eax,
                                std::span<const InstancePerformance> perf,
                                std::span<const double> costs, bool include_cost) {
    double s = 0.0;
    for (std::size_t i = 0; i < p_eax.size(); ++i)
        s += perf[i].of(p_eax[i] >= theta ? Solver::EAX : Solver::LKH) +
             (include_cost ? costs[i] : 0.0);
    return s / static_cast<double>(p_eax.size());
}

/// Grid search over theta in {0, step, ..., 1} minimising selector PAR10;
/// ties go to the smallest theta.
inline ThresholdPolicy tune_threshold(std::span<const double> p_eax,
                                      std::span<const InstancePerformance> perf,
                                      std::span<const double> costs, bool include_cost,
                                      TunedOn tuned_on, double grid_step = 0.01) {
    if (p_eax.empty()) throw std::invalid_argument("tune_threshold: empty tuning set");
    if (perf.size() != p_eax.size() || (include_cost && costs.size() != p_eax.size()))
        throw std::invalid_argument("tune_threshold: inconsistent lengths");
    if (!(grid_step > 0.0 && grid_step <= 1.0))
        throw std::invalid_argument("tune_threshold: grid step must be in (0, 1]");
    const auto steps = static_cast<std::size_t>(std::llround(1.0 / grid_step));
    ThresholdPolicy best{0.0, tuned_on};
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i <= steps; ++i) {
        const double theta = static_cast<double>(i) / static_cast<double>(steps);
        const double score = thresholded_par10(theta, p_eax, perf, costs, include_cost);
        if (score < best_score) {
            best_score = score;
            best.theta = theta;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Hardest subsets

enum class HardnessMode { Par10Score, Par10Ratio };

/// Per class (instances whose best solver is EAX, resp. LKH) the m hardest
/// instances: largest PAR10 of the non-favoured solver (score mode) or
/// largest max/min PAR10 ratio (ratio mode). Returns sorted row indices.
inline std::vector<std::size_t> hardest_subset(const PerformanceTable& table, HardnessMode mode,
                                               std::size_t m) {
    std::vector<std::size_t> out;
    for (auto cls : kSolvers) {
        std::vector<std::pair<double, std::size_t>> scored;
        for (std::size_t i = 0; i < table.size(); ++i) {
            const auto& r = table[i];
            if (r.best() != cls) continue;
            double key = 0.0;
            if (mode == HardnessMode::Par10Score) {
                key = r.of(other(cls));
            } else {
                const double lo = r.best_par10();
                const double hi = std::max(r.par10[0], r.par10[1]);
                key = lo > 0.0 ? hi / lo : (hi > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
            }
            scored.emplace_back(key, i);
        }
        if (m > scored.size())
            throw std::invalid_argument("hardest_subset: requested " + std::to_string(m) +
                                        " instances of class " + std::string(to_string(cls)) +
                                        " but only " + std::to_string(scored.size()) + " exist");
        std::stable_sort(scored.begin(), scored.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        for (std::size_t k = 0; k < m; ++k) out.push_back(scored[k].second);
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Experiment configuration

enum class LearnerKind { Forest, Tree, Oracle, ConstantEax, ConstantLkh };
enum class FeatureSelection { None, Sffs, Sfbs, Exhaustive };

struct ExperimentConfig {
    LearnerKind learner = LearnerKind::Forest;
    std::size_t n_trees = 500;
    std::size_t mtry = 0;
    std::uint64_t seed = 1;
    std::size_t n_folds = 10;
    bool include_cost = true;
    FeatureSelection feature_selection = FeatureSelection::None;
    double threshold_grid_step = 0.01;
    std::size_t max_depth = 32;
    std::size_t min_leaf_size = 1;
    /// Keep only the top-k WMW-ranked features (ranked on training folds); 0 keeps all.
    std::size_t top_features = 0;
    /// Maximum inclusion (sffs) / exclusion (sfbs) steps.
    std::size_t selection_budget = 15;
    std::size_t exhaustive_cap = 32767;
    std::size_t inner_folds = 5;
    /// Trees per forest inside the wrapper objective.
    std::size_t wrapper_trees = 50;
};

inline std::string_view to_string(LearnerKind k) {
    switch (k) {
        case LearnerKind::Forest: return "forest";
        case LearnerKind::Tree: return "tree";
        case LearnerKind::Oracle: return "oracle";
        case LearnerKind::ConstantEax: return "constant_eax";
        case LearnerKind::ConstantLkh: return "constant_lkh";
    }
    return "unknown";
}

inline std::string_view to_string(FeatureSelection f) {
    switch (f) {
        case FeatureSelection::None: return "none";
        case FeatureSelection::Sffs: return "sffs";
        case FeatureSelection::Sfbs: return "sfbs";
        case FeatureSelection::Exhaustive: return "exhaustive";
    }
    return "unknown";
}

inline ExperimentConfig experiment_config_from(const KeyValueConfig& kv) {
    kv.require_known({"learner", "n_trees", "mtry", "seed", "n_folds", "include_cost",
                      "feature_selection", "threshold_grid_step", "max_depth", "min_leaf_size",
                      "top_features", "selection_budget", "exhaustive_cap", "inner_folds",
                      "wrapper_trees"});
    ExperimentConfig c;
    const auto learner = kv.get_string("learner", "forest");
    if (learner == "forest") c.learner = LearnerKind::Forest;
    else if (learner == "tree") c.learner = LearnerKind::Tree;
    else if (learner == "oracle") c.learner = LearnerKind::Oracle;
    else if (learner == "constant_eax") c.learner = LearnerKind::ConstantEax;
    else if (learner == "constant_lkh") c.learner = LearnerKind::ConstantLkh;
    else throw ConfigError("unknown learner '" + learner + "'");
    const auto fs = kv.get_string("feature_selection", "none");
    if (fs == "none") c.feature_selection = FeatureSelection::None;
    else if (fs == "sffs") c.feature_selection = FeatureSelection::Sffs;
    else if (fs == "sfbs") c.feature_selection = FeatureSelection::Sfbs;
    else if (fs == "exhaustive") c.feature_selection = FeatureSelection::Exhaustive;
    else throw ConfigError("unknown feature_selection '" + fs + "'");
    c.n_trees = kv.get_uint("n_trees", c.n_trees);
    c.mtry = kv.get_uint("mtry", c.mtry);
    c.seed = kv.get_uint("seed", c.seed);
    c.n_folds = kv.get_uint("n_folds", c.n_folds);
    c.include_cost = kv.get_bool("include_cost", c.include_cost);
    c.threshold_grid_step = kv.get_double("threshold_grid_step", c.threshold_grid_step);
    c.max_depth = kv.get_uint("max_depth", c.max_depth);
    c.min_leaf_size = kv.get_uint("min_leaf_size", c.min_leaf_size);
    c.top_features = kv.get_uint("top_features", c.top_features);
    c.selection_budget = kv.get_uint("selection_budget", c.selection_budget);
    c.exhaustive_cap = kv.get_uint("exhaustive_cap", c.exhaustive_cap);
    c.inner_folds = kv.get_uint("inner_folds", c.inner_folds);
    c.wrapper_trees = kv.get_uint("wrapper_trees", c.wrapper_trees);
    if (c.n_trees == 0) throw ConfigError("n_trees must be >= 1");
    if (c.n_folds < 2) throw ConfigError("n_folds must be >= 2");
    if (!(c.threshold_grid_step > 0.0 && c.threshold_grid_step <= 1.0))
        throw ConfigError("threshold_grid_step must be in (0, 1]");
    if (c.min_leaf_size == 0) throw ConfigError("min_leaf_size must be >= 1");
    return c;
}

// ---------------------------------------------------------------------------
// Wrapper feature selection over an arbitrary subset objective (lower is better).

using SubsetObjective = std::function<double(const std::vector<std::size_t>&)>;

struct WrapperResult {
    std::vector<std::size_t> subset;  // ascending feature indices
    double objective = std::numeric_limits<double>::infinity();
    std::size_t evaluations = 0;      // distinct subsets evaluated
};

namespace detail {

class CachedObjective {
public:
    explicit CachedObjective(const SubsetObjective& fn) : fn_(fn) {}

    double operator()(std::vector<std::size_t> subset) {
        std::sort(subset.begin(), subset.end());
        auto it = cache_.find(subset);
        if (it != cache_.end()) return it->second;
        const double v = fn_(subset);
        cache_.emplace(std::move(subset), v);
        return v;
    }

    [[nodiscard]] std::size_t evaluations() const { return cache_.size(); }

private:
    const SubsetObjective& fn_;
    std::map<std::vector<std::size_t>, double> cache_;
};

inline std::vector<std::size_t> with(std::vector<std::size_t> s, std::size_t f) {
    s.insert(std::upper_bound(s.begin(), s.end(), f), f);
    return s;
}

inline std::vector<std::size_t> without(std::vector<std::size_t> s, std::size_t f) {
    s.erase(std::find(s.begin(), s.end(), f));
    return s;
}

}  // namespace detail

/// Sequential floating forward selection. `budget` bounds the number of
/// inclusion steps; ties go to the lowest feature index.
inline WrapperResult sffs(std::size_t n_features, const SubsetObjective& objective,
                          std::size_t budget) {
    if (n_features == 0) throw std::invalid_argument("sffs: no features");
    if (budget == 0) throw std::invalid_argument("sffs: budget must be >= 1");
    detail::CachedObjective J(objective);
    std::vector<std::size_t> S;
    double js = std::numeric_limits<double>::infinity();
    std::size_t steps = 0;
    while (steps < budget && S.size() < n_features) {
        std::optional<std::size_t> add;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t f = 0; f < n_features; ++f) {
            if (std::binary_search(S.begin(), S.end(), f)) continue;
            const double v = J(detail::with(S, f));
            if (!add || v < best) {
                add = f;
                best = v;
            }
        }
        if (!S.empty() && !(best < js)) break;
        S = detail::with(S, *add);
        js = best;
        ++steps;
        // conditional exclusion, never of the feature just added
        while (S.size() > 2) {
            std::optional<std::size_t> drop;
            double best_drop = std::numeric_limits<double>::infinity();
            for (auto g : S) {
                if (g == *add) continue;
                const double v = J(detail::without(S, g));
                if (!drop || v < best_drop) {
                    drop = g;
                    best_drop = v;
                }
            }
            if (!(best_drop < js)) break;
            S = detail::without(S, *drop);
            js = best_drop;
        }
    }
    return {S, js, J.evaluations()};
}

/// Sequential floating backward selection from the full set. `budget`
/// bounds the number of exclusion steps. Exclusions that do not worsen the
/// objective are taken; re-additions need a strict improvement.
inline WrapperResult sfbs(std::size_t n_features, const SubsetObjective& objective,
                          std::size_t budget) {
    if (n_features == 0) throw std::invalid_argument("sfbs: no features");
    if (budget == 0) throw std::invalid_argument("sfbs: budget must be >= 1");
    detail::CachedObjective J(objective);
    std::vector<std::size_t> S(n_features);
    std::iota(S.begin(), S.end(), std::size_t{0});
    double js = J(S);
    std::size_t steps = 0;
    while (steps < budget && S.size() > 1) {
        std::optional<std::size_t> drop;
        double best = std::numeric_limits<double>::infinity();
        for (auto g : S) {
            const double v = J(detail::without(S, g));
            if (!drop || v < best) {
                drop = g;
                best = v;
            }
        }
        if (!(best <= js)) break;
        S = detail::without(S, *drop);
        js = best;
        ++steps;
        // conditional inclusion, never of the feature just removed
        while (S.size() + 1 < n_features) {
            std::optional<std::size_t> add;
            double best_add = std::numeric_limits<double>::infinity();
            for (std::size_t f = 0; f < n_features; ++f) {
                if (f == *drop || std::binary_search(S.begin(), S.end(), f)) continue;
                const double v = J(detail::with(S, f));
                if (!add || v < best_add) {
                    add = f;
                    best_add = v;
                }
            }
            if (!add || !(best_add < js)) break;
            S = detail::with(S, *add);
            js = best_add;
        }
    }
    return {S, js, J.evaluations()};
}

inline constexpr std::size_t kMaxExhaustiveFeatures = 15;

/// Evaluates every non-empty subset; ties go to the lexicographically
/// smallest subset.
inline WrapperResult exhaustive_selection(std::size_t n_features, const SubsetObjective& objective,
                                          std::size_t budget_cap = 32767) {
    if (n_features == 0) throw std::invalid_argument("exhaustive_selection: no features");
    if (n_features > kMaxExhaustiveFeatures)
        throw std::invalid_argument("exhaustive_selection: at most 15 features, got " +
                                    std::to_string(n_features));
    const std::uint32_t total = (1u << n_features) - 1u;
    if (total > budget_cap)
        throw std::invalid_argument("exhaustive_selection: " + std::to_string(total) +
                                    " subsets exceed the budget cap " + std::to_string(budget_cap));
    WrapperResult best;
    for (std::uint32_t mask = 1; mask <= total; ++mask) {
        std::vector<std::size_t> s;
        for (std::size_t f = 0; f < n_features; ++f)
            if (mask & (1u << f)) s.push_back(f);
        const double v = objective(s);
        ++best.evaluations;
        if (best.subset.empty() || v < best.objective || (v == best.objective && s < best.subset)) {
            best.subset = std::move(s);
            best.objective = v;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Fitting and cross-validated evaluation

/// Replaces learner probabilities by an external source (instance row -> P(EAX)).
using ProbabilityHook = std::function<double(std::size_t row)>;

/// Training data of one fold. Only training rows are ever copied in, so
/// test-fold data cannot influence fitting or tuning.
struct TrainingSet {
    FeatureMatrix X;
    std::vector<Solver> labels;
    std::vector<InstancePerformance> perf;
    std::vector<double> costs;
    std::vector<std::size_t> rows;  // original row indices (for hooks)
};

inline TrainingSet make_training_set(const FeatureMatrix& X, const PerformanceTable& table,
                                     std::span<const double> costs,
                                     std::span<const std::size_t> rows) {
    TrainingSet ts;
    ts.X = X.select_rows(rows);
    ts.rows.assign(rows.begin(), rows.end());
    for (auto r : rows) {
        ts.labels.push_back(table[r].best());
        ts.perf.push_back(table[r]);
        ts.costs.push_back(costs[r]);
    }
    return ts;
}

using LearnedModel = std::variant<std::monostate, DecisionTree, RandomForest>;

struct FoldModel {
    std::vector<std::size_t> features;  // columns of the full matrix used by the model
    LearnedModel model;
    ThresholdPolicy threshold;
    LearnerKind learner = LearnerKind::Forest;
};

namespace detail {

inline double model_p_eax(const LearnedModel& m, std::span<const double> x) {
    if (const auto* t = std::get_if<DecisionTree>(&m)) return t->predict_proba(x).p_eax;
    if (const auto* f = std::get_if<RandomForest>(&m)) return f->predict_proba(x).p_eax;
    throw std::logic_error("no trained model");
}

struct Fitted {
    LearnedModel model;
    std::vector<double> tuning_p;  // probabilities on the tuning rows
    std::vector<std::size_t> tuning_rows;  // indices into the training set
    TunedOn tuned_on = TunedOn::Oob;
};

inline Fitted fit_learner(const FeatureMatrix& X, std::span<const Solver> y,
                          const ExperimentConfig& cfg, std::size_t n_trees, std::uint64_t seed,
                          std::size_t jobs) {
    Fitted out;
    if (cfg.learner == LearnerKind::Tree) {
        TreeParams tp;
        tp.max_depth = cfg.max_depth;
        tp.min_leaf_size = cfg.min_leaf_size;
        auto tree = tree_fit(X, y, tp);
        for (std::size_t i = 0; i < X.rows(); ++i) {
            out.tuning_p.push_back(tree.predict_proba(X.row(i)).p_eax);
            out.tuning_rows.push_back(i);
        }
        out.tuned_on = TunedOn::TrainResubstitution;
        out.model = std::move(tree);
        return out;
    }
    ForestParams fp;
    fp.n_trees = n_trees;
    fp.mtry = cfg.mtry;
    fp.seed = seed;
    fp.max_depth = cfg.max_depth;
    fp.min_leaf_size = cfg.min_leaf_size;
    fp.jobs = jobs;
    auto forest = forest_fit(X, y, fp);
    const auto oob = forest.oob_predict(X);
    for (std::size_t i = 0; i < X.rows(); ++i)
        if (oob.oob_counts[i] > 0) {
            out.tuning_p.push_back(oob.p_eax[i]);
            out.tuning_rows.push_back(i);
        }
    out.tuned_on = TunedOn::Oob;
    out.model = std::move(forest);
    return out;
}

inline ThresholdPolicy tune_on(const Fitted& fitted, const TrainingSet& ts, const ExperimentConfig& cfg) {
    std::vector<InstancePerformance> perf;
    std::vector<double> costs;
    for (auto i : fitted.tuning_rows) {
        perf.push_back(ts.perf[i]);
        costs.push_back(ts.costs[i]);
    }
    if (perf.empty()) return {0.5, TunedOn::Fixed};
    return tune_threshold(fitted.tuning_p, perf, costs, cfg.include_cost, fitted.tuned_on,
                          cfg.threshold_grid_step);
}

}  // namespace detail

/// Mean PAR10 of the learner restricted to `features`, estimated by an inner
/// stratified CV on the training set (thresholds tuned inside each inner fold).
inline double inner_cv_par10(const TrainingSet& ts, const std::vector<std::size_t>& features,
                             const ExperimentConfig& cfg, std::uint64_t seed) {
    const auto n_eax = static_cast<std::size_t>(std::count(ts.labels.begin(), ts.labels.end(), Solver::EAX));
    const std::size_t minority = std::min(n_eax, ts.labels.size() - n_eax);
    const std::size_t k = std::min(cfg.inner_folds, minority);
    const FeatureMatrix Xs = ts.X.select_cols(features);
    double total = 0.0;
    auto score = [&](std::size_t i, Solver s) {
        return ts.perf[i].of(s) + (cfg.include_cost ? ts.costs[i] : 0.0);
    };
    if (k < 2) {
        const auto fitted = detail::fit_learner(Xs, ts.labels, cfg, cfg.wrapper_trees, seed, 1);
        const auto policy = detail::tune_on(fitted, ts, cfg);
        for (std::size_t i = 0; i < Xs.rows(); ++i)
            total += score(i, policy.apply(detail::model_p_eax(fitted.model, Xs.row(i))));
        return total / static_cast<double>(Xs.rows());
    }
    const auto inner = make_folds(ts.labels, k, seed);
    for (std::size_t f = 0; f < k; ++f) {
        const auto train = inner.train_rows(f);
        const auto test = inner.test_rows(f);
        TrainingSet sub;
        sub.X = Xs.select_rows(train);
        for (auto r : train) {
            sub.labels.push_back(ts.labels[r]);
            sub.perf.push_back(ts.perf[r]);
            sub.costs.push_back(ts.costs[r]);
        }
        const auto fitted = detail::fit_learner(sub.X, sub.labels, cfg, cfg.wrapper_trees,
                                                derive_seed(seed, f), 1);
        const auto policy = detail::tune_on(fitted, sub, cfg);
        for (auto r : test) total += score(r, policy.apply(detail::model_p_eax(fitted.model, Xs.row(r))));
    }
    return total / static_cast<double>(ts.X.rows());
}

/// Fits one fold's selector: optional WMW pre-ranking, optional wrapper
/// selection, the learner itself and its threshold.
inline FoldModel fit_fold(const TrainingSet& ts, const std::vector<std::string>& feature_names,
                          const ExperimentConfig& cfg, std::uint64_t fold_seed, std::size_t jobs,
                          const ProbabilityHook& hook = {}) {
    FoldModel fm;
    fm.learner = cfg.learner;
    const std::size_t p = ts.X.cols();

    if (cfg.learner == LearnerKind::ConstantEax || cfg.learner == LearnerKind::ConstantLkh) {
        fm.threshold = {0.5, TunedOn::Fixed};
        return fm;
    }
    if (cfg.learner == LearnerKind::Oracle || hook) {
        std::vector<double> probs;
        for (std::size_t i = 0; i < ts.rows.size(); ++i)
            probs.push_back(hook ? hook(ts.rows[i]) : (ts.labels[i] == Solver::EAX ? 1.0 : 0.0));
        fm.threshold = tune_threshold(probs, ts.perf, ts.costs, cfg.include_cost,
                                      TunedOn::TrainResubstitution, cfg.threshold_grid_step);
        return fm;
    }

    std::vector<std::size_t> candidates(p);
    std::iota(candidates.begin(), candidates.end(), std::size_t{0});
    if (cfg.top_features > 0 && cfg.top_features < p) {
        std::vector<std::vector<double>> cols;
        for (std::size_t j = 0; j < p; ++j) cols.push_back(ts.X.column(j));
        const auto ranking = rank_features(cols, feature_names, ts.labels, cfg.top_features);
        candidates.clear();
        for (const auto& e : ranking.entries) candidates.push_back(e.feature_index);
        std::sort(candidates.begin(), candidates.end());
    }

    if (cfg.feature_selection != FeatureSelection::None) {
        const SubsetObjective objective = [&](const std::vector<std::size_t>& subset) {
            std::vector<std::size_t> cols;
            for (auto s : subset) cols.push_back(candidates[s]);
            return inner_cv_par10(ts, cols, cfg, derive_seed(fold_seed, 0x5e1ec7));
        };
        WrapperResult wr;
        switch (cfg.feature_selection) {
            case FeatureSelection::Sffs: wr = sffs(candidates.size(), objective, cfg.selection_budget); break;
            case FeatureSelection::Sfbs: wr = sfbs(candidates.size(), objective, cfg.selection_budget); break;
            case FeatureSelection::Exhaustive:
                wr = exhaustive_selection(candidates.size(), objective, cfg.exhaustive_cap);
                break;
            case FeatureSelection::None: break;
        }
        std::vector<std::size_t> chosen;
        for (auto s : wr.subset) chosen.push_back(candidates[s]);
        candidates = std::move(chosen);
    }
    fm.features = candidates;

    const FeatureMatrix Xs = ts.X.select_cols(fm.features);
    auto fitted = detail::fit_learner(Xs, ts.labels, cfg, cfg.n_trees, fold_seed, jobs);
    fm.threshold = detail::tune_on(fitted, ts, cfg);
    fm.model = std::move(fitted.model);
    return fm;
}

/// P(EAX) of a fold model for one full-width feature row.
inline double fold_model_p_eax(const FoldModel& fm, std::span<const double> row) {
    switch (fm.learner) {
        case LearnerKind::ConstantEax: return 1.0;
        case LearnerKind::ConstantLkh: return 0.0;
        default: break;
    }
    std::vector<double> x;
    x.reserve(fm.features.size());
    for (auto j : fm.features) x.push_back(row[j]);
    return detail::model_p_eax(fm.model, x);
}

/// Cross-validated evaluation of a feature-based selector. Rows of `X`,
/// `feature_cost` and `folds` follow the table's instance order.
inline SelectorReport run_cv_selector(const FeatureMatrix& X,
                                      const std::vector<std::string>& feature_names,
                                      const PerformanceTable& table,
                                      std::span<const double> feature_cost,
                                      const ExperimentConfig& cfg_in, const FoldAssignment& folds,
                                      std::size_t jobs = 1, const ProbabilityHook& hook = {}) {
    const std::size_t n = table.size();
    if (X.rows() != n || feature_cost.size() != n || folds.fold_of.size() != n)
        throw std::invalid_argument("run_cv_selector: inconsistent instance sets");
    if (feature_names.size() != X.cols())
        throw std::invalid_argument("run_cv_selector: feature name count mismatch");

    // the oracle and constant learners compute no features, so they are never charged for them
    ExperimentConfig cfg = cfg_in;
    if (cfg.learner != LearnerKind::Forest && cfg.learner != LearnerKind::Tree) cfg.include_cost = false;

    std::vector<double> p_eax(n, 0.0);
    std::vector<Solver> predicted(n, Solver::EAX);
    std::vector<double> thresholds(folds.n_folds, 0.0);
    const auto labels = table.best_labels();

    for (std::size_t f = 0; f < folds.n_folds; ++f) {
        const auto train = folds.train_rows(f);
        const auto test = folds.test_rows(f);
        const auto ts = make_training_set(X, table, feature_cost, train);
        ProbabilityHook fold_hook = hook;
        if (!fold_hook && cfg.learner == LearnerKind::Oracle)
            fold_hook = [&labels](std::size_t r) { return labels[r] == Solver::EAX ? 1.0 : 0.0; };
        const auto fm = fit_fold(ts, feature_names, cfg, derive_seed(cfg.seed, f), jobs, fold_hook);
        thresholds[f] = fm.threshold.theta;
        for (auto r : test) {
            p_eax[r] = fold_hook ? fold_hook(r) : fold_model_p_eax(fm, X.row(r));
            predicted[r] = fm.learner == LearnerKind::ConstantEax   ? Solver::EAX
                           : fm.learner == LearnerKind::ConstantLkh ? Solver::LKH
                                                                    : fm.threshold.apply(p_eax[r]);
        }
    }
    std::string name(to_string(cfg.learner));
    if (cfg.feature_selection != FeatureSelection::None)
        name += "+" + std::string(to_string(cfg.feature_selection));
    return build_selector_report(name, table, feature_cost, cfg.include_cost, folds.fold_of, p_eax,
                                 predicted, thresholds);
}

}  // namespace tspas

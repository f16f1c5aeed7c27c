#pragma once

// PAR10 scoring, VBS/SBS baselines, gap closed, classification metrics and
// the selector report shared by the feature-based and image-based selectors.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tspas/csv.hpp"
#include "tspas/instance.hpp"
#include "tspas/solver.hpp"

namespace tspas {

inline constexpr double kDefaultCutoff = 3600.0;
inline constexpr double kDefaultPenaltyFactor = 10.0;

struct Run {
    double time_seconds = 0.0;
    bool solved = false;
};

struct PerformanceRecord {
    std::string instance_id;
    Solver solver = Solver::EAX;
    std::vector<Run> runs;
    double cutoff = kDefaultCutoff;
};

inline void validate_record(const PerformanceRecord& rec) {
    if (rec.runs.empty())
        throw std::invalid_argument("performance record " + rec.instance_id + "/" +
                                    std::string(to_string(rec.solver)) + " has no runs");
    if (!(rec.cutoff > 0.0)) throw std::invalid_argument("cutoff must be positive");
    for (const auto& r : rec.runs) {
        if (!(r.time_seconds >= 0.0) || !std::isfinite(r.time_seconds))
            throw std::invalid_argument("run time must be finite and >= 0 in " + rec.instance_id);
        if (r.solved && r.time_seconds > rec.cutoff)
            throw std::invalid_argument("solved run exceeds cutoff in " + rec.instance_id);
    }
}

/// Score of a single run: its time if solved, penalty_factor * T otherwise.
inline double par_score(const Run& run, double cutoff, double penalty_factor = kDefaultPenaltyFactor) {
    return run.solved ? run.time_seconds : penalty_factor * cutoff;
}

/// Mean over runs of (time if solved else 10 T).
inline double par10(const PerformanceRecord& rec, double penalty_factor = kDefaultPenaltyFactor) {
    validate_record(rec);
    double s = 0.0;
    for (const auto& r : rec.runs) s += par_score(r, rec.cutoff, penalty_factor);
    return s / static_cast<double>(rec.runs.size());
}

struct InstancePerformance {
    std::string instance_id;
    std::array<double, 2> par10{};  // indexed by Solver
    /// The mean-PAR10 winner did not win every paired run.
    bool label_ambiguous = false;

    [[nodiscard]] double of(Solver s) const { return par10[index_of(s)]; }
    /// argmin of PAR10, ties to EAX.
    [[nodiscard]] Solver best() const {
        return par10[1] < par10[0] ? Solver::LKH : Solver::EAX;
    }
    [[nodiscard]] double best_par10() const { return std::min(par10[0], par10[1]); }
};

/// Per-instance PAR10 of both solvers, sorted by instance id. All
/// aggregation iterates in this order.
class PerformanceTable {
public:
    PerformanceTable() = default;

    explicit PerformanceTable(std::vector<InstancePerformance> rows) : rows_(std::move(rows)) {
        std::sort(rows_.begin(), rows_.end(),
                  [](const auto& a, const auto& b) { return a.instance_id < b.instance_id; });
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            if (i > 0 && rows_[i].instance_id == rows_[i - 1].instance_id)
                throw std::invalid_argument("duplicate instance " + rows_[i].instance_id);
            index_.emplace(rows_[i].instance_id, i);
        }
    }

    [[nodiscard]] std::size_t size() const { return rows_.size(); }
    [[nodiscard]] const InstancePerformance& operator[](std::size_t i) const { return rows_[i]; }
    [[nodiscard]] const std::vector<InstancePerformance>& rows() const { return rows_; }

    [[nodiscard]] std::optional<std::size_t> find(std::string_view id) const {
        auto it = index_.find(std::string(id));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    [[nodiscard]] std::vector<Solver> best_labels() const {
        std::vector<Solver> out;
        out.reserve(rows_.size());
        for (const auto& r : rows_) out.push_back(r.best());
        return out;
    }

    /// Restriction to the given row indices (kept in id order).
    [[nodiscard]] PerformanceTable subset(std::span<const std::size_t> idx) const {
        std::vector<InstancePerformance> rows;
        rows.reserve(idx.size());
        for (auto i : idx) rows.push_back(rows_.at(i));
        return PerformanceTable(std::move(rows));
    }

private:
    std::vector<InstancePerformance> rows_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Builds the table; every instance needs records for both solvers.
inline PerformanceTable build_performance_table(const std::vector<PerformanceRecord>& records,
                                                double penalty_factor = kDefaultPenaltyFactor) {
    std::map<std::string, std::array<const PerformanceRecord*, 2>> by_id;
    for (const auto& rec : records) {
        auto& slot = by_id[rec.instance_id][index_of(rec.solver)];
        if (slot != nullptr)
            throw std::invalid_argument("duplicate record for " + rec.instance_id + "/" +
                                        std::string(to_string(rec.solver)));
        slot = &rec;
    }
    std::vector<std::string> missing;
    std::vector<InstancePerformance> rows;
    for (const auto& [id, pair] : by_id) {
        if (pair[0] == nullptr || pair[1] == nullptr) {
            missing.push_back(id);
            continue;
        }
        InstancePerformance ip;
        ip.instance_id = id;
        ip.par10 = {par10(*pair[0], penalty_factor), par10(*pair[1], penalty_factor)};
        const Solver winner = ip.best();
        const auto& w = *pair[index_of(winner)];
        const auto& l = *pair[index_of(other(winner))];
        const std::size_t runs = std::min(w.runs.size(), l.runs.size());
        for (std::size_t r = 0; r < runs; ++r) {
            const double sw = par_score(w.runs[r], w.cutoff, penalty_factor);
            const double sl = par_score(l.runs[r], l.cutoff, penalty_factor);
            if (sw > sl) ip.label_ambiguous = true;
        }
        rows.push_back(std::move(ip));
    }
    if (!missing.empty()) {
        std::string msg = "missing solver data for instance(s):";
        for (const auto& id : missing) msg += " " + id;
        throw std::invalid_argument(msg);
    }
    return PerformanceTable(std::move(rows));
}

struct Baselines {
    double vbs = 0.0;
    double sbs = 0.0;
    Solver sbs_solver = Solver::EAX;
    std::array<double, 2> mean_par10{};  // per solver
};

inline Baselines vbs_sbs(const PerformanceTable& table) {
    if (table.size() == 0) throw std::invalid_argument("vbs_sbs: empty table");
    Baselines b;
    double vbs = 0.0;
    std::array<double, 2> sums{};
    for (const auto& r : table.rows()) {
        vbs += r.best_par10();
        sums[0] += r.par10[0];
        sums[1] += r.par10[1];
    }
    const auto n = static_cast<double>(table.size());
    b.vbs = vbs / n;
    b.mean_par10 = {sums[0] / n, sums[1] / n};
    b.sbs_solver = b.mean_par10[1] < b.mean_par10[0] ? Solver::LKH : Solver::EAX;
    b.sbs = b.mean_par10[index_of(b.sbs_solver)];
    return b;
}

/// Fraction of the SBS-VBS gap closed by a selector: 0 at SBS, 1 at VBS.
inline double gap_closed(double vbs, double sbs, double selector_par10) {
    if (!(sbs > vbs)) throw std::domain_error("gap_closed: requires sbs > vbs");
    return (sbs - selector_par10) / (sbs - vbs);
}

/// Mean PAR10 of the chosen solvers, plus each instance's feature cost when
/// include_cost is set.
inline double selector_par10(const PerformanceTable& table, std::span<const Solver> choice,
                             std::span<const double> feature_cost, bool include_cost) {
    if (choice.size() != table.size())
        throw std::invalid_argument("selector_par10: choice missing for some instances");
    if (include_cost && feature_cost.size() != table.size())
        throw std::invalid_argument("selector_par10: feature cost missing for some instances");
    if (table.size() == 0) throw std::invalid_argument("selector_par10: empty table");
    double s = 0.0;
    for (std::size_t i = 0; i < table.size(); ++i)
        s += table[i].of(choice[i]) + (include_cost ? feature_cost[i] : 0.0);
    return s / static_cast<double>(table.size());
}

struct Confusion {
    std::size_t tp = 0;  // predicted EAX, EAX best
    std::size_t fp = 0;  // predicted EAX, LKH best
    std::size_t tn = 0;  // predicted LKH, LKH best
    std::size_t fn = 0;  // predicted LKH, EAX best

    [[nodiscard]] std::size_t total() const { return tp + fp + tn + fn; }
};

struct ClassificationMetrics {
    double accuracy = 0.0;
    double f1 = 0.0;  // EAX positive
    Confusion confusion;
};

inline ClassificationMetrics classification_metrics(std::span<const Solver> predicted,
                                                    std::span<const Solver> actual_best) {
    if (predicted.size() != actual_best.size())
        throw std::invalid_argument("classification_metrics: length mismatch");
    ClassificationMetrics m;
    auto& c = m.confusion;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const bool pe = predicted[i] == Solver::EAX;
        const bool ae = actual_best[i] == Solver::EAX;
        if (pe && ae) ++c.tp;
        else if (pe) ++c.fp;
        else if (ae) ++c.fn;
        else ++c.tn;
    }
    if (c.total() > 0)
        m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    const auto denom = 2 * c.tp + c.fp + c.fn;
    m.f1 = denom == 0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
    return m;
}

struct MisclassificationCosts {
    std::size_t count_eax_instead_lkh = 0;
    double avg_overhead_eax_instead_lkh = 0.0;
    std::size_t count_lkh_instead_eax = 0;
    double avg_overhead_lkh_instead_eax = 0.0;
    /// A direction had no misclassifications, so its average is reported as 0.
    bool undefined_average = false;
};

/// Overhead of a misclassified instance = PAR10(chosen) - PAR10(best).
inline MisclassificationCosts misclassification_costs(std::span<const Solver> predicted,
                                                      std::span<const Solver> actual_best,
                                                      const PerformanceTable& table) {
    if (predicted.size() != table.size() || actual_best.size() != table.size())
        throw std::invalid_argument("misclassification_costs: length mismatch");
    MisclassificationCosts m;
    double sum_eax = 0.0;
    double sum_lkh = 0.0;
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (predicted[i] == actual_best[i]) continue;
        const double overhead = table[i].of(predicted[i]) - table[i].of(actual_best[i]);
        if (predicted[i] == Solver::EAX) {
            ++m.count_eax_instead_lkh;
            sum_eax += overhead;
        } else {
            ++m.count_lkh_instead_eax;
            sum_lkh += overhead;
        }
    }
    if (m.count_eax_instead_lkh > 0)
        m.avg_overhead_eax_instead_lkh = sum_eax / static_cast<double>(m.count_eax_instead_lkh);
    if (m.count_lkh_instead_eax > 0)
        m.avg_overhead_lkh_instead_eax = sum_lkh / static_cast<double>(m.count_lkh_instead_eax);
    m.undefined_average = m.count_eax_instead_lkh == 0 || m.count_lkh_instead_eax == 0;
    return m;
}

// ---------------------------------------------------------------------------
// Performance CSV: "instance_id,solver,run,time_seconds,solved"

inline std::vector<PerformanceRecord> read_performance_csv(std::string_view text,
                                                           double cutoff = kDefaultCutoff) {
    const auto doc = csv::parse(text);
    const auto c_id = doc.column("instance_id");
    const auto c_solver = doc.column("solver");
    const auto c_run = doc.column("run");
    const auto c_time = doc.column("time_seconds");
    const auto c_solved = doc.column("solved");

    std::map<std::pair<std::string, Solver>, std::map<long long, Run>> grouped;
    for (const auto& rec : doc.records) {
        Solver s;
        try {
            s = parse_solver(rec.fields[c_solver]);
        } catch (const std::invalid_argument& e) {
            throw csv::CsvError(rec.line, e.what());
        }
        const auto run = csv::to_int(rec.fields[c_run], rec.line);
        const auto& solved = rec.fields[c_solved];
        if (solved != "0" && solved != "1")
            throw csv::CsvError(rec.line, "solved must be 0 or 1");
        Run r{csv::to_double(rec.fields[c_time], rec.line), solved == "1"};
        if (r.solved && r.time_seconds > cutoff)
            throw csv::CsvError(rec.line, "solved run exceeds the cutoff");
        if (!(r.time_seconds >= 0.0))
            throw csv::CsvError(rec.line, "negative run time");
        auto& runs = grouped[{rec.fields[c_id], s}];
        if (!runs.emplace(run, r).second)
            throw csv::CsvError(rec.line, "duplicate run index");
    }
    std::vector<PerformanceRecord> out;
    out.reserve(grouped.size());
    for (auto& [key, runs] : grouped) {
        PerformanceRecord pr;
        pr.instance_id = key.first;
        pr.solver = key.second;
        pr.cutoff = cutoff;
        for (auto& [idx, r] : runs) pr.runs.push_back(r);
        out.push_back(std::move(pr));
    }
    return out;
}

inline std::string write_performance_csv(const std::vector<PerformanceRecord>& records) {
    std::string out = "instance_id,solver,run,time_seconds,solved\n";
    for (const auto& rec : records)
        for (std::size_t r = 0; r < rec.runs.size(); ++r)
            out += rec.instance_id + "," + std::string(to_string(rec.solver)) + "," +
                   std::to_string(r) + "," + detail::format_double(rec.runs[r].time_seconds) +
                   "," + (rec.runs[r].solved ? "1" : "0") + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Selector report

struct FoldResult {
    std::size_t fold_id = 0;
    double par10 = 0.0;  // mean over the fold's test instances
    double threshold = 0.0;
    std::size_t n_test = 0;
};

struct InstancePrediction {
    std::string instance_id;
    std::size_t fold = 0;
    double p_eax = 0.0;
    Solver predicted = Solver::EAX;
    Solver actual_best = Solver::EAX;
    double par10 = 0.0;  // selector score incl. feature cost if counted
};

struct SelectorReport {
    std::string selector;
    bool include_cost = false;
    std::vector<FoldResult> per_fold;
    double mean_par10 = 0.0;
    double accuracy = 0.0;
    double f1 = 0.0;
    Confusion confusion;
    std::optional<double> gap_closed;  // empty when SBS == VBS
    Baselines baselines;
    double mean_feature_cost = 0.0;
    MisclassificationCosts misclassification;
    std::vector<InstancePrediction> predictions;
};

/// Aggregates out-of-fold predictions into a report. `fold_of[i]` is the
/// test fold of instance i, `thresholds[f]` the threshold used in fold f.
inline SelectorReport build_selector_report(std::string selector, const PerformanceTable& table,
                                            std::span<const double> feature_cost, bool include_cost,
                                            std::span<const std::size_t> fold_of,
                                            std::span<const double> p_eax,
                                            std::span<const Solver> predicted,
                                            std::span<const double> thresholds) {
    const std::size_t n = table.size();
    if (fold_of.size() != n || p_eax.size() != n || predicted.size() != n)
        throw std::invalid_argument("build_selector_report: inconsistent lengths");
    if (feature_cost.size() != n) throw std::invalid_argument("build_selector_report: costs");

    SelectorReport rep;
    rep.selector = std::move(selector);
    rep.include_cost = include_cost;
    rep.baselines = vbs_sbs(table);
    const auto actual = table.best_labels();

    std::vector<double> fold_sum(thresholds.size(), 0.0);
    std::vector<std::size_t> fold_n(thresholds.size(), 0);
    double cost_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (fold_of[i] >= thresholds.size())
            throw std::invalid_argument("build_selector_report: fold id out of range");
        const double score = table[i].of(predicted[i]) + (include_cost ? feature_cost[i] : 0.0);
        fold_sum[fold_of[i]] += score;
        ++fold_n[fold_of[i]];
        cost_sum += feature_cost[i];
        rep.predictions.push_back(
            {table[i].instance_id, fold_of[i], p_eax[i], predicted[i], actual[i], score});
    }
    for (std::size_t f = 0; f < thresholds.size(); ++f)
        rep.per_fold.push_back({f, fold_n[f] ? fold_sum[f] / static_cast<double>(fold_n[f]) : 0.0,
                                thresholds[f], fold_n[f]});

    rep.mean_par10 = selector_par10(table, predicted, feature_cost, include_cost);
    rep.mean_feature_cost = cost_sum / static_cast<double>(n);
    const auto metrics = classification_metrics(predicted, actual);
    rep.accuracy = metrics.accuracy;
    rep.f1 = metrics.f1;
    rep.confusion = metrics.confusion;
    rep.misclassification = misclassification_costs(predicted, actual, table);
    if (rep.baselines.sbs > rep.baselines.vbs)
        rep.gap_closed = gap_closed(rep.baselines.vbs, rep.baselines.sbs, rep.mean_par10);
    return rep;
}

}  // namespace tspas

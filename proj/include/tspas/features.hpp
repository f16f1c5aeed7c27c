#pragma once

// MST / nearest-neighbour-graph instance features and the feature-matrix CSV.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tspas/csv.hpp"
#include "tspas/graphs.hpp"
#include "tspas/instance.hpp"

namespace tspas {

struct SummaryStats {
    double sum = 0.0;
    double mean = 0.0;
    double median = 0.0;
    double sd = 0.0;
    double var = 0.0;
    double coef_of_var = 0.0;
    double min = 0.0;
    double max = 0.0;
    double span = 0.0;
    double skew = 0.0;
    /// Set when a statistic was undefined and reported as 0
    /// (zero mean, zero variance or a single observation).
    bool degenerate = false;
};

/// Field names in the order they are expanded into feature vectors, with the
/// power of length each carries when the inputs are lengths.
inline constexpr std::array<std::string_view, 10> kStatNames = {
    "sum", "mean", "median", "sd", "var", "coef_of_var", "min", "max", "span", "skew"};
inline constexpr std::array<int, 10> kStatLengthPower = {1, 1, 1, 1, 2, 0, 1, 1, 1, 0};

inline std::array<double, 10> as_array(const SummaryStats& s) {
    return {s.sum, s.mean, s.median, s.sd, s.var, s.coef_of_var, s.min, s.max, s.span, s.skew};
}

/// Sample sd/var (n-1), moment skewness g1 = m3 / m2^(3/2) with population
/// moments, midpoint median.
inline SummaryStats summary_stats(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("summary_stats: empty input");
    SummaryStats s;
    const auto n = static_cast<double>(xs.size());
    std::vector<double> sorted(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());
    s.sum = std::accumulate(sorted.begin(), sorted.end(), 0.0);
    s.mean = s.sum / n;
    const std::size_t mid = sorted.size() / 2;
    s.median = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    s.min = sorted.front();
    s.max = sorted.back();
    s.span = s.max - s.min;

    double m2 = 0.0;
    double m3 = 0.0;
    for (double x : sorted) {
        const double d = x - s.mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    if (xs.size() > 1) {
        s.var = m2 / (n - 1.0);
        s.sd = std::sqrt(s.var);
    } else {
        s.degenerate = true;
    }
    m2 /= n;
    m3 /= n;
    if (m2 > 0.0) {
        s.skew = m3 / std::pow(m2, 1.5);
    } else {
        s.skew = 0.0;
        s.degenerate = true;
    }
    if (s.mean != 0.0) {
        s.coef_of_var = s.sd / s.mean;
    } else {
        s.coef_of_var = 0.0;
        s.degenerate = true;
    }
    return s;
}

struct FeatureInfo {
    std::string name;
    /// 1 for lengths, 2 for squared lengths, 0 for dimensionless values.
    int length_power = 0;
};

/// The fixed feature schema for a given neighbourhood size k.
inline std::vector<FeatureInfo> feature_schema(std::size_t k = 5) {
    std::vector<FeatureInfo> out;
    auto group = [&](const std::string& prefix, bool lengths) {
        for (std::size_t i = 0; i < kStatNames.size(); ++i)
            out.push_back({prefix + std::string(kStatNames[i]), lengths ? kStatLengthPower[i] : 0});
    };
    const std::string nng = "nng_" + std::to_string(k) + "_";
    group("mst_dists_", true);
    group("mst_degrees_", false);
    out.push_back({nng + "strong_components_count", 0});
    group(nng + "strong_components_sizes_", false);
    out.push_back({nng + "weak_components_count", 0});
    group(nng + "weak_components_sizes_", false);
    out.push_back({nng + "strong_edge_fraction", 0});
    group(nng + "dists_", true);
    return out;
}

inline std::vector<std::string> feature_names(std::size_t k = 5) {
    std::vector<std::string> names;
    for (auto& f : feature_schema(k)) names.push_back(std::move(f.name));
    return names;
}

struct FeatureVector {
    std::vector<std::string> names;
    std::vector<double> values;
    double cost_seconds = 0.0;
    /// True if any summary statistic hit a degenerate case.
    bool degenerate = false;

    [[nodiscard]] double at(std::string_view name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return values[i];
        throw std::out_of_range("no feature named " + std::string(name));
    }
};

/// Computes the feature vector; cost_seconds covers graph construction and
/// statistics (no I/O).
inline FeatureVector compute_features(const Instance& inst, std::size_t k = 5) {
    const auto t0 = std::chrono::steady_clock::now();
    validate_instance(inst);

    FeatureVector fv;
    fv.names = feature_names(k);
    fv.values.reserve(fv.names.size());
    auto push_stats = [&](std::span<const double> xs) {
        const auto s = summary_stats(xs);
        fv.degenerate = fv.degenerate || s.degenerate;
        for (double v : as_array(s)) fv.values.push_back(v);
    };
    auto to_doubles = [](const std::vector<std::size_t>& xs) {
        return std::vector<double>(xs.begin(), xs.end());
    };

    const Mst mst = minimum_spanning_tree(inst);
    std::vector<double> mst_lengths;
    mst_lengths.reserve(mst.edges.size());
    for (const auto& e : mst.edges) mst_lengths.push_back(e.w);
    push_stats(mst_lengths);
    push_stats(to_doubles(mst.degrees));

    const KnnGraph g = knn_graph(inst, k);
    const auto strong = strong_components(g);
    const auto weak = weak_components(g);
    fv.values.push_back(static_cast<double>(strong.count()));
    push_stats(to_doubles(strong.sizes));
    fv.values.push_back(static_cast<double>(weak.count()));
    push_stats(to_doubles(weak.sizes));
    fv.values.push_back(static_cast<double>(g.strong_edge_count()) /
                        static_cast<double>(inst.size() * k));
    std::vector<double> nn_lengths;
    nn_lengths.reserve(inst.size() * k);
    for (const auto& row : g.distances) nn_lengths.insert(nn_lengths.end(), row.begin(), row.end());
    push_stats(nn_lengths);

    const auto t1 = std::chrono::steady_clock::now();
    fv.cost_seconds = std::chrono::duration<double>(t1 - t0).count();
    return fv;
}

// ---------------------------------------------------------------------------
// Feature matrix CSV: "instance_id,cost_seconds,<feature names...>"

struct FeatureRow {
    std::string instance_id;
    double cost_seconds = 0.0;
    std::vector<double> values;
};

struct FeatureTable {
    std::vector<std::string> names;
    std::vector<FeatureRow> rows;

    [[nodiscard]] std::size_t feature_index(std::string_view name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return i;
        throw std::out_of_range("no feature column named " + std::string(name));
    }

    [[nodiscard]] std::vector<double> column(std::size_t j) const {
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r.values[j]);
        return out;
    }
};

inline std::string write_feature_csv(const FeatureTable& table) {
    std::string out = "instance_id,cost_seconds";
    for (const auto& n : table.names) out += "," + n;
    out += "\n";
    for (const auto& r : table.rows) {
        if (r.values.size() != table.names.size())
            throw std::invalid_argument("feature row width mismatch for " + r.instance_id);
        out += r.instance_id + "," + detail::format_double(r.cost_seconds);
        for (double v : r.values) out += "," + detail::format_double(v);
        out += "\n";
    }
    return out;
}

inline FeatureTable read_feature_csv(std::string_view text) {
    const auto doc = csv::parse(text);
    if (doc.header.size() < 2 || doc.header[0] != "instance_id" || doc.header[1] != "cost_seconds")
        throw csv::CsvError(1, "feature CSV header must start with instance_id,cost_seconds");
    FeatureTable t;
    t.names.assign(doc.header.begin() + 2, doc.header.end());
    for (const auto& rec : doc.records) {
        FeatureRow row;
        row.instance_id = rec.fields[0];
        row.cost_seconds = csv::to_double(rec.fields[1], rec.line);
        for (std::size_t j = 2; j < rec.fields.size(); ++j)
            row.values.push_back(csv::to_double(rec.fields[j], rec.line));
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace tspas

#pragma once

// JSON serialisation of selector reports. The same schema is used for
// feature-based and image-based selectors.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tspas/scoring.hpp"
#include "tspas/solver.hpp"

namespace tspas {

inline constexpr int kReportSchemaVersion = 1;

struct ReportContext {
    std::string manifest_id;
    std::map<std::string, std::string> config;
    /// Extra per-fold information, e.g. selected features or threshold source.
    nlohmann::json extra = nlohmann::json::object();
};

inline nlohmann::json to_json(const SelectorReport& r, const ReportContext& ctx = {}) {
    using nlohmann::json;
    json j;
    j["schema_version"] = kReportSchemaVersion;
    j["manifest_id"] = ctx.manifest_id;
    j["selector"] = r.selector;
    j["config"] = ctx.config;
    j["include_cost"] = r.include_cost;
    j["baselines"] = {{"vbs", r.baselines.vbs},
                      {"sbs", r.baselines.sbs},
                      {"sbs_solver", std::string(to_string(r.baselines.sbs_solver))},
                      {"mean_par10",
                       {{"EAX", r.baselines.mean_par10[0]}, {"LKH", r.baselines.mean_par10[1]}}}};
    j["mean_par10"] = r.mean_par10;
    j["gap_closed"] = r.gap_closed ? json(*r.gap_closed) : json(nullptr);
    j["accuracy"] = r.accuracy;
    j["f1"] = r.f1;
    j["confusion"] = {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn}, {"fn", r.confusion.fn}};
    j["mean_feature_cost"] = r.mean_feature_cost;
    const auto& m = r.misclassification;
    j["misclassification"] = {{"count_eax_instead_lkh", m.count_eax_instead_lkh},
                              {"avg_overhead_eax_instead_lkh", m.avg_overhead_eax_instead_lkh},
                              {"count_lkh_instead_eax", m.count_lkh_instead_eax},
                              {"avg_overhead_lkh_instead_eax", m.avg_overhead_lkh_instead_eax},
                              {"undefined_average", m.undefined_average}};
    json folds = json::array();
    for (const auto& f : r.per_fold)
        folds.push_back({{"fold", f.fold_id}, {"par10", f.par10}, {"threshold", f.threshold}, {"n_test", f.n_test}});
    j["per_fold"] = std::move(folds);
    json preds = json::array();
    for (const auto& p : r.predictions)
        preds.push_back({{"instance_id", p.instance_id},
                         {"fold", p.fold},
                         {"p_eax", p.p_eax},
                         {"predicted", std::string(to_string(p.predicted))},
                         {"actual_best", std::string(to_string(p.actual_best))},
                         {"par10", p.par10}});
    j["predictions"] = std::move(preds);
    j["extra"] = ctx.extra;
    return j;
}

inline std::string render_report(const SelectorReport& r, const ReportContext& ctx = {}) {
    return to_json(r, ctx).dump(2) + "\n";
}

/// Structural check of a report document; returns one message per problem.
inline std::vector<std::string> validate_report(const nlohmann::json& j) {
    std::vector<std::string> problems;
    auto need = [&](const nlohmann::json& obj, const char* key, auto pred, const char* what) {
        if (!obj.is_object() || !obj.contains(key) || !pred(obj.at(key)))
            problems.push_back(std::string("field '") + key + "' missing or not " + what);
    };
    const auto num = [](const nlohmann::json& v) { return v.is_number(); };
    const auto str = [](const nlohmann::json& v) { return v.is_string(); };
    const auto arr = [](const nlohmann::json& v) { return v.is_array(); };
    const auto obj = [](const nlohmann::json& v) { return v.is_object(); };
    need(j, "schema_version", [](const nlohmann::json& v) { return v == kReportSchemaVersion; },
         "the current schema version");
    need(j, "manifest_id", str, "a string");
    need(j, "selector", str, "a string");
    need(j, "config", obj, "an object");
    need(j, "include_cost", [](const nlohmann::json& v) { return v.is_boolean(); }, "a boolean");
    need(j, "baselines", obj, "an object");
    need(j, "mean_par10", num, "a number");
    need(j, "gap_closed", [](const nlohmann::json& v) { return v.is_number() || v.is_null(); }, "a number or null");
    need(j, "accuracy", num, "a number");
    need(j, "f1", num, "a number");
    need(j, "confusion", obj, "an object");
    need(j, "misclassification", obj, "an object");
    need(j, "per_fold", arr, "an array");
    need(j, "predictions", arr, "an array");
    if (!problems.empty()) return problems;
    for (const char* k : {"vbs", "sbs"}) need(j["baselines"], k, num, "a number");
    for (const char* k : {"tp", "fp", "tn", "fn"}) need(j["confusion"], k, num, "a number");
    for (const auto& f : j["per_fold"])
        for (const char* k : {"fold", "par10", "threshold", "n_test"}) need(f, k, num, "a number");
    for (const auto& p : j["predictions"]) {
        need(p, "instance_id", str, "a string");
        for (const char* k : {"fold", "p_eax", "par10"}) need(p, k, num, "a number");
        for (const char* k : {"predicted", "actual_best"})
            need(p, k, [](const nlohmann::json& v) { return v == "EAX" || v == "LKH"; }, "a solver name");
    }
    return problems;
}

}  // namespace tspas

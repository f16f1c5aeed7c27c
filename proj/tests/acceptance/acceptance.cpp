// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fail.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "../support/gradcheck.hpp"
#include "../support/oracles.hpp"
#include "tspas/cnn.hpp"
#include "tspas/features.hpp"
#include "tspas/graphs.hpp"
#include "tspas/instance.hpp"
#include "tspas/rendering.hpp"
#include "tspas/report.hpp"
#include "tspas/scoring.hpp"
#include "tspas/selection.hpp"
#include "tspas/stats_tests.hpp"
#include "tspas/synthetic.hpp"

namespace fs = std::filesystem;
using namespace tspas;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Options {
    std::string cli;
    fs::path work;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 6) {
    std::ostringstream o;
    o.precision(prec);
    o << v;
    return o.str();
}

/// Appends a time bound to a check; a check that overruns fails.
Outcome timed(double limit_s, const std::function<Outcome()>& fn) {
    const auto t0 = Clock::now();
    auto out = fn();
    const double dt = seconds_since(t0);
    out.detail += " [" + fmt(dt, 3) + " s";
    if (limit_s > 0) out.detail += " / limit " + fmt(limit_s, 3) + " s";
    out.detail += "]";
    if (limit_s > 0 && dt > limit_s) out.pass = false;
    return out;
}

// 1 -------------------------------------------------------------------------
Outcome gap_arithmetic() {
    const double g = gap_closed(4.92, 67.47, 61.21);
    return {std::abs(g - 0.100) <= 0.001, "gap_closed(4.92, 67.47, 61.21) = " + fmt(g)};
}

// 2 -------------------------------------------------------------------------
Outcome par10_penalty() {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> t(0.0, 3600.0);
    std::uniform_int_distribution<int> runs(1, 10);
    std::size_t mismatches = 0, unsolved = 0;
    for (int k = 0; k < 1000; ++k) {
        PerformanceRecord rec{"x", Solver::EAX, {}, 3600.0};
        for (int r = runs(rng); r > 0; --r) {
            const bool solved = rng() % 3 != 0;
            rec.runs.push_back({solved ? t(rng) : 3600.0, solved});
            if (!solved) {
                ++unsolved;
                if (par_score(rec.runs.back(), 3600.0) != 36000.0) ++mismatches;
            }
        }
        double s = 0.0;
        for (const auto& r : rec.runs) s += r.solved ? r.time_seconds : 36000.0;
        if (par10(rec) != s / static_cast<double>(rec.runs.size())) ++mismatches;
    }
    return {mismatches == 0, std::to_string(mismatches) + " mismatches over 1000 records (" +
                                 std::to_string(unsolved) + " unsolved runs)"};
}

// 3 -------------------------------------------------------------------------
Outcome mst_oracle() {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::size_t> size(4, 7);
    std::size_t bad = 0;
    for (int k = 0; k < 200; ++k) {
        const auto inst = generate_rue(size(rng), rng());
        std::vector<oracle::XY> pts;
        for (const auto& p : inst.nodes) pts.push_back({p.x, p.y});
        const auto brute = oracle::brute_force_mst(pts);
        std::vector<double> w;
        for (const auto& e : minimum_spanning_tree(inst).edges) w.push_back(e.w);
        if (oracle::sorted_sum(w) != brute.weight) ++bad;
    }
    return {bad == 0, std::to_string(bad) + " of 200 instances differ from enumeration"};
}

// 4 -------------------------------------------------------------------------
Outcome wmw_exact() {
    const double fixed = mann_whitney_u(std::vector<double>{1, 2, 3}, std::vector<double>{4, 5, 6}).p_two_sided;
    std::mt19937_64 rng(4);
    double worst = 0.0;
    std::size_t cases = 0;
    for (std::size_t m = 1; m <= 11; ++m)
        for (std::size_t n = 1; m + n <= 12; ++n)
            for (int rep = 0; rep < 3; ++rep) {
                std::vector<double> all(m + n);
                std::iota(all.begin(), all.end(), 0.0);
                std::shuffle(all.begin(), all.end(), rng);
                const std::vector<double> xs(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m));
                const std::vector<double> ys(all.begin() + static_cast<std::ptrdiff_t>(m), all.end());
                const auto r = mann_whitney_u(xs, ys);
                worst = std::max(worst, std::abs(r.p_two_sided - oracle::wmw_exact_p(xs, ys)));
                ++cases;
                if (!r.exact) worst = 1.0;
            }
    return {fixed == 0.1 && worst <= 1e-12,
            "p([1,2,3],[4,5,6]) = " + fmt(fixed, 17) + "; max |p - enumeration| = " + fmt(worst) + " over " +
                std::to_string(cases) + " cases"};
}

// 5 -------------------------------------------------------------------------
Outcome feature_invariance() {
    const auto schema = feature_schema(5);
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> coord(0, 1023);
    std::size_t translation_bad = 0;
    double worst_len = 0.0, worst_dimless = 0.0;
    for (int k = 0; k < 100; ++k) {
        // dyadic coordinates keep translated distances exactly representable
        Instance inst{"inv", {}};
        for (int i = 0; i < 200; ++i) inst.nodes.push_back({std::ldexp(coord(rng), -10), std::ldexp(coord(rng), -10)});
        const auto base = compute_features(inst);
        Instance moved = inst, scaled = inst;
        for (auto& p : moved.nodes) p = {p.x + 3.0, p.y - 0.5};
        for (auto& p : scaled.nodes) p = {2.0 * p.x, 2.0 * p.y};
        if (compute_features(moved).values != base.values) ++translation_bad;
        const auto sv = compute_features(scaled).values;
        for (std::size_t f = 0; f < schema.size(); ++f) {
            const double b = base.values[f], s = sv[f];
            if (schema[f].length_power == 0) {
                worst_dimless = std::max(worst_dimless, std::abs(s - b));
            } else {
                const double expect = b * std::pow(2.0, schema[f].length_power);
                worst_len = std::max(worst_len, std::abs(s - expect) / std::max(std::abs(expect), 1e-300));
            }
        }
    }
    return {translation_bad == 0 && worst_len <= 1e-9 && worst_dimless <= 1e-12,
            std::to_string(translation_bad) + " translation mismatches; length rel err " + fmt(worst_len) +
                "; dimensionless abs err " + fmt(worst_dimless)};
}

// 6 -------------------------------------------------------------------------
Outcome rendering_goldens() {
    const auto diag = render({"d", {{0, 0}, {0.5, 0.5}, {1, 1}}}, {ChannelRole::Mst});
    const std::size_t diag_lit = diag.lit_count(0);
    bool points_ok = true;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto inst = s % 2 ? generate_rue(50 + s, s) : generate_clustered(50 + s, 3, 0.001, s);
        const auto lit = render(inst, {ChannelRole::Points}).lit_count(0);
        points_ok = points_ok && lit >= 1 && lit <= inst.size();
    }
    const auto img = render(generate_clustered(300, 4, 0.03, 6), {ChannelRole::Points, ChannelRole::Mst, ChannelRole::Nng});
    bool round_trip = true;
    for (std::size_t c = 0; c < img.channels; ++c) {
        const auto back = decode_pgm(encode_pgm(img, c));
        round_trip = round_trip && std::equal(back.data.begin(), back.data.end(),
                                              img.data.begin() + static_cast<std::ptrdiff_t>(c * 512 * 512));
    }
    return {diag_lit == 512 && points_ok && round_trip,
            "diagonal lit " + std::to_string(diag_lit) + "; points lit in [1, n]: " + (points_ok ? "yes" : "no") +
                "; PGM round trip lossless: " + (round_trip ? "yes" : "no")};
}

// 7 -------------------------------------------------------------------------
Outcome shape_schedule_check() {
    const auto spec = cnn::NetworkSpec::standard(1);
    const auto shapes = cnn::shape_schedule(spec, 512, 512);
    const std::vector<std::size_t> sizes{512, 256, 256, 128, 128, 64, 64, 64}, chans{32, 32, 64, 64, 128, 128, 256, 256};
    bool ok = shapes.size() == 8;
    std::string got;
    for (std::size_t b = 0; b < shapes.size(); ++b) {
        ok = ok && shapes[b].height == sizes[b] && shapes[b].width == sizes[b] && shapes[b].channels == chans[b];
        got += (b ? "," : "") + std::to_string(shapes[b].height) + "x" + std::to_string(shapes[b].channels);
    }
    const cnn::ParamLayout layout(spec);
    const std::size_t logits = layout.total - layout.linear_bias;
    return {ok && logits == 2, "blocks " + got + "; logits " + std::to_string(logits)};
}

// 8 -------------------------------------------------------------------------
Outcome gradient_checks() {
    double worst = 0.0;
    std::size_t skipped = 0, checked = 0, params = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        for (std::size_t stride : {1u, 2u})
            for (std::size_t dil : {1u, 2u, 3u}) worst = std::max(worst, gradcheck::check_conv(stride, dil, seed));
        for (std::size_t g : {1u, 2u, 4u}) worst = std::max(worst, gradcheck::check_group_norm(g, seed));
        worst = std::max({worst, gradcheck::check_relu(seed), gradcheck::check_pool(seed),
                          gradcheck::check_linear_ce(seed)});
        const auto net = gradcheck::check_reduced_network(seed);
        worst = std::max(worst, net.worst);
        skipped += net.skipped;
        checked += net.checked;
        params += net.n_params;
    }
    return {worst <= gradcheck::kRelTol && skipped * 50 <= params,
            "max relative error " + fmt(worst) + " (5 seeds; network: " + std::to_string(checked) + " checked, " +
                std::to_string(skipped) + " skipped at ReLU kinks)"};
}

// 9 -------------------------------------------------------------------------
Outcome group_norm_stats() {
    std::mt19937_64 rng(9);
    double worst_mu = 0.0, worst_var = 0.0;
    for (std::size_t C : {32u, 64u, 128u, 256u}) {
        const std::size_t HW = 64, G = 8, n = C / G * HW;
        std::normal_distribution<float> d(1.5f, 2.0f);
        std::vector<float> x(C * HW), xhat(C * HW), inv(G), y(C * HW);
        for (auto& v : x) v = d(rng);
        cnn::group_norm_forward<float>(C, HW, G, x, std::vector<float>(C, 1.0f), std::vector<float>(C, 0.0f),
                                  cnn::kDefaultGnEps, xhat, inv, y);
        for (std::size_t g = 0; g < G; ++g) {
            double s = 0, sq = 0;
            for (std::size_t i = g * n; i < (g + 1) * n; ++i) s += xhat[i];
            const double mu = s / static_cast<double>(n);
            for (std::size_t i = g * n; i < (g + 1) * n; ++i) sq += (xhat[i] - mu) * (xhat[i] - mu);
            worst_mu = std::max(worst_mu, std::abs(mu));
            worst_var = std::max(worst_var, std::abs(sq / static_cast<double>(n) - 1.0));
        }
    }
    return {worst_mu < 1e-6 && worst_var < 1e-4, "max |mu| " + fmt(worst_mu) + ", max |var - 1| " + fmt(worst_var)};
}

// 10 ------------------------------------------------------------------------
Outcome toy_end_to_end() {
    const auto corpus = make_synthetic_corpus({});
    const auto table = build_performance_table(corpus.records);
    const std::size_t n = table.size();
    std::vector<const Instance*> by_row(n);
    for (const auto& inst : corpus.instances) by_row[*table.find(inst.id)] = &inst;

    const auto names = feature_names(5);
    FeatureMatrix X(n, names.size());
    std::vector<double> cost(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto fv = compute_features(*by_row[i]);
        for (std::size_t j = 0; j < names.size(); ++j) X(i, j) = fv.values[j];
        cost[i] = fv.cost_seconds;
    }
    const auto folds = make_folds(table.best_labels(), 10, 10);

    ExperimentConfig rf;
    rf.top_features = 15;
    rf.seed = 10;
    const auto rf_rep = run_cv_selector(X, names, table, cost, rf, folds);
    ExperimentConfig oracle_cfg;
    oracle_cfg.learner = LearnerKind::Oracle;
    const auto oracle_rep = run_cv_selector(X, names, table, cost, oracle_cfg, folds);
    ExperimentConfig sbs_cfg;
    sbs_cfg.learner = rf_rep.baselines.sbs_solver == Solver::EAX ? LearnerKind::ConstantEax : LearnerKind::ConstantLkh;
    const auto sbs_rep = run_cv_selector(X, names, table, cost, sbs_cfg, folds);

    std::vector<ImageTensor> images;
    images.reserve(n);
    for (std::size_t i = 0; i < n; ++i) images.push_back(render(*by_row[i], {ChannelRole::Points}, 64, 64));
    std::vector<const ImageTensor*> ptrs;
    for (const auto& im : images) ptrs.push_back(&im);
    cnn::TrainConfig tc;
    tc.max_epochs = 8;
    tc.patience = 3;
    tc.seed = 10;
    const auto cnn_rep = cnn::run_cnn_cv(ptrs, table, folds, cnn::NetworkSpec::standard(1), tc).report;

    const double g_rf = rf_rep.gap_closed.value_or(-1), g_cnn = cnn_rep.gap_closed.value_or(-1);
    const double g_or = oracle_rep.gap_closed.value_or(-1), g_sbs = sbs_rep.gap_closed.value_or(-1);
    return {g_rf >= 0.5 && g_cnn >= 0.5 && g_or == 1.0 && g_sbs == 0.0,
            "gap closed: rf(top-15) " + fmt(g_rf, 4) + " (acc " + fmt(rf_rep.accuracy, 3) + "), cnn points 64x64 " +
                fmt(g_cnn, 4) + " (acc " + fmt(cnn_rep.accuracy, 3) + "), oracle " + fmt(g_or, 17) + ", constant " +
                std::string(to_string(rf_rep.baselines.sbs_solver)) + " " + fmt(g_sbs, 17)};
}

// 11 ------------------------------------------------------------------------
Outcome threshold_oracle() {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0), t(1.0, 36000.0);
    std::size_t bad = 0;
    for (int k = 0; k < 50; ++k) {
        const std::size_t n = 5 + rng() % 60;
        std::vector<double> p(n), cost(n);
        std::vector<InstancePerformance> perf(n);
        std::vector<std::pair<double, double>> pairs(n);
        for (std::size_t i = 0; i < n; ++i) {
            // mix of coarse (tied) and continuous probabilities
            p[i] = k % 2 ? std::round(u(rng) * 20) / 20 : u(rng);
            perf[i].instance_id = "t" + std::to_string(i);
            perf[i].par10 = {t(rng), t(rng)};
            pairs[i] = {perf[i].par10[0], perf[i].par10[1]};
            cost[i] = u(rng);
        }
        const bool include_cost = k % 3 == 0;
        const auto tuned = tune_threshold(p, perf, cost, include_cost, TunedOn::Fixed);
        if (tuned.theta != oracle::brute_theta(p, pairs, cost, include_cost)) ++bad;
    }
    return {bad == 0, std::to_string(bad) + " of 50 configurations differ from the brute-force argmin"};
}

// 12 ------------------------------------------------------------------------
Outcome leakage_canary() {
    SyntheticConfig sc;
    sc.n_instances = 60;
    sc.nodes = 60;
    sc.seed = 12;
    const auto corpus = make_synthetic_corpus(sc);
    const auto table = build_performance_table(corpus.records);
    const std::size_t n = table.size();
    std::vector<const Instance*> by_row(n);
    for (const auto& inst : corpus.instances) by_row[*table.find(inst.id)] = &inst;
    const auto names = feature_names(5);
    FeatureMatrix X(n, names.size());
    const std::vector<double> cost(n, 0.01);
    for (std::size_t i = 0; i < n; ++i) {
        const auto fv = compute_features(*by_row[i]);
        for (std::size_t j = 0; j < names.size(); ++j) X(i, j) = fv.values[j];
    }
    const auto folds = make_folds(table.best_labels(), 5, 12);
    std::size_t changed = 0, compared = 0;
    for (std::size_t f = 0; f < folds.n_folds; ++f) {
        // swapping the solvers' PAR10 flips every test-fold label
        auto rows = table.rows();
        for (auto r : folds.test_rows(f)) std::swap(rows[r].par10[0], rows[r].par10[1]);
        const PerformanceTable permuted(rows);
        for (auto kind : {LearnerKind::Forest, LearnerKind::Tree}) {
            ExperimentConfig cfg;
            cfg.learner = kind;
            cfg.n_trees = 50;
            cfg.top_features = 10;
            cfg.feature_selection = FeatureSelection::Sffs;
            cfg.selection_budget = 3;
            cfg.wrapper_trees = 10;
            const auto train = folds.train_rows(f);
            const auto seed = derive_seed(cfg.seed, f);
            const auto a = fit_fold(make_training_set(X, table, cost, train), names, cfg, seed, 1);
            const auto b = fit_fold(make_training_set(X, permuted, cost, train), names, cfg, seed, 1);
            ++compared;
            if (a.features != b.features || a.threshold.theta != b.threshold.theta || !(a.model == b.model)) ++changed;
        }
    }
    // image-based: fold 0's network and threshold must not see fold 0's labels
    std::vector<ImageTensor> images;
    for (std::size_t i = 0; i < n; ++i) images.push_back(render(*by_row[i], {ChannelRole::Points}, 16, 16));
    std::vector<const ImageTensor*> ptrs;
    for (const auto& im : images) ptrs.push_back(&im);
    const auto folds3 = make_folds(table.best_labels(), 3, 12);
    auto rows = table.rows();
    for (auto r : folds3.test_rows(0)) std::swap(rows[r].par10[0], rows[r].par10[1]);
    const PerformanceTable permuted(rows);
    cnn::TrainConfig tc;
    tc.max_epochs = 2;
    const auto spec = cnn::NetworkSpec::reduced(1, 3, 8);
    const auto a = cnn::run_cnn_cv(ptrs, table, folds3, spec, tc);
    const auto b = cnn::run_cnn_cv(ptrs, permuted, folds3, spec, tc);
    ++compared;
    if (a.fold_params[0].values != b.fold_params[0].values ||
        a.report.per_fold[0].threshold != b.report.per_fold[0].threshold)
        ++changed;
    return {changed == 0, std::to_string(changed) + " of " + std::to_string(compared) +
                              " fold models changed when test-fold labels were permuted"};
}

// 13 ------------------------------------------------------------------------
std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Feature CSV with the cost_seconds column removed.
std::string without_cost(const std::string& csv_text) {
    std::istringstream in(csv_text);
    std::string line, out;
    while (std::getline(in, line)) {
        const auto a = line.find(','), b = line.find(',', a + 1);
        out += line.substr(0, a) + line.substr(b) + "\n";
    }
    return out;
}

Outcome cli_determinism(const Options& opt) {
    if (opt.cli.empty()) return {false, "no --cli given"};
    const auto w = opt.work;
    fs::remove_all(w);
    fs::create_directories(w);
    std::string log;
    auto sh = [&](const std::string& args) {
        const std::string cmd = "\"" + opt.cli + "\" " + args + " >>\"" + (w / "cli.log").string() + "\" 2>&1";
        const int rc = std::system(cmd.c_str());
        if (rc != 0) log += " [exit " + std::to_string(rc) + ": " + args + "]";
        return rc == 0;
    };
    const auto q = [](const fs::path& p) { return "\"" + p.string() + "\""; };
    bool ok = sh("--seed 13 generate " + q(w / "gen") + " --n 48 --nodes 60");
    ok = ok && sh("--jobs 1 features " + q(w / "gen/instances") + " " + q(w / "f1.csv"));
    ok = ok && sh("--jobs 4 features " + q(w / "gen/instances") + " " + q(w / "f4.csv"));
    const bool features_same = ok && without_cost(slurp(w / "f1.csv")) == without_cost(slurp(w / "f4.csv"));
    {
        std::ofstream(w / "eval.cfg") << "learner = forest\nn_trees = 60\nn_folds = 4\ntop_features = 10\n";
        std::ofstream(w / "cnn.cfg") << "blocks = 3\nwidth = 8\nmax_epochs = 2\npatience = 0\nn_folds = 3\n";
    }
    const auto perf = q(w / "gen/perf.csv");
    const auto feats = q(w / "f1.csv");
    ok = ok && sh("--jobs 1 evaluate " + feats + " " + perf + " " + q(w / "eval.cfg") + " --out " + q(w / "e1a.json"));
    ok = ok && sh("--jobs 1 evaluate " + feats + " " + perf + " " + q(w / "eval.cfg") + " --out " + q(w / "e1b.json"));
    ok = ok && sh("--jobs 4 evaluate " + feats + " " + perf + " " + q(w / "eval.cfg") + " --out " + q(w / "e4.json"));
    ok = ok && sh("render " + q(w / "gen/instances") + " " + q(w / "tensors") + " --roles points --size 32 --no-pgm");
    for (const auto& [jobs, dir] : std::vector<std::pair<int, std::string>>{{1, "c1a"}, {1, "c1b"}, {4, "c4"}})
        ok = ok && sh("--jobs " + std::to_string(jobs) + " train-cnn " + q(w / "tensors") + " " + perf + " " +
                      q(w / "cnn.cfg") + " --channels points --out " + q(w / dir));
    if (!ok) return {false, "CLI run failed:" + log + " (see " + (w / "cli.log").string() + ")"};

    const auto e1 = slurp(w / "e1a.json"), c1 = slurp(w / "c1a/report.json");
    const bool eval_same = !e1.empty() && e1 == slurp(w / "e1b.json") && e1 == slurp(w / "e4.json");
    const bool cnn_same = !c1.empty() && c1 == slurp(w / "c1b/report.json") && c1 == slurp(w / "c4/report.json");
    const bool valid = validate_report(nlohmann::json::parse(e1)).empty() && validate_report(nlohmann::json::parse(c1)).empty();
    return {eval_same && cnn_same && features_same && valid,
            std::string("evaluate reports identical: ") + (eval_same ? "yes" : "no") +
                "; train-cnn reports identical: " + (cnn_same ? "yes" : "no") +
                "; features identical (cost_seconds excluded): " + (features_same ? "yes" : "no") +
                "; schema valid: " + (valid ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tspas acceptance criteria"};
    Options opt;
    opt.work = fs::temp_directory_path() / "tspas_acceptance";
    std::vector<int> only;
    app.add_option("--cli", opt.cli, "Path to the tspas executable (criterion 13)");
    app.add_option("--work", opt.work, "Scratch directory");
    app.add_option("--only", only, "Run only these criteria");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"PAR10 & gap arithmetic", [] { return timed(1, gap_arithmetic); }},
        {"PAR10 penalty", [] { return timed(1, par10_penalty); }},
        {"MST oracle", [] { return timed(10, mst_oracle); }},
        {"Wilcoxon exact", [] { return timed(5, wmw_exact); }},
        {"Feature invariances", [] { return timed(10, feature_invariance); }},
        {"Rendering goldens", [] { return timed(5, rendering_goldens); }},
        {"CNN shape schedule", [] { return timed(1, shape_schedule_check); }},
        {"Gradient checks", [] { return timed(60, gradient_checks); }},
        {"GroupNorm normalization", [] { return timed(1, group_norm_stats); }},
        {"Toy end-to-end selection", [] { return timed(900, toy_end_to_end); }},
        {"Threshold tuning oracle", [] { return timed(1, threshold_oracle); }},
        {"Leakage canary", [] { return timed(60, leakage_canary); }},
        {"Determinism", [&opt] { return timed(0, [&opt] { return cli_determinism(opt); }); }},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!only.empty() && std::find(only.begin(), only.end(), static_cast<int>(i + 1)) == only.end()) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << ": " << o.detail
                  << std::endl;
    }
    return failed ? 1 : 0;
}

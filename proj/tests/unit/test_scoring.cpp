#include <gtest/gtest.h>

#include <random>

#include "tspas/scoring.hpp"

using namespace tspas;

namespace {

PerformanceTable table_of(const std::vector<std::pair<double, double>>& pairs) {
    std::vector<InstancePerformance> rows;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        InstancePerformance ip;
        ip.instance_id = "i" + std::to_string(1000 + i);
        ip.par10 = {pairs[i].first, pairs[i].second};
        rows.push_back(ip);
    }
    return PerformanceTable(std::move(rows));
}

std::vector<std::pair<double, double>> random_pairs(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(1.0, 500.0);
    std::vector<std::pair<double, double>> out(n);
    for (auto& p : out) p = {d(rng), d(rng)};
    return out;
}

}  // namespace

TEST(Par10, Examples) {
    PerformanceRecord a{"a", Solver::EAX, {{10, true}, {20, true}, {30, true}}, 3600};
    EXPECT_EQ(par10(a), 20.0);
    PerformanceRecord b{"b", Solver::EAX, {{100, true}, {3600, false}}, 3600};
    EXPECT_EQ(par10(b), 18050.0);
    PerformanceRecord c{"c", Solver::LKH, std::vector<tspas::Run>(10, tspas::Run{3600, false}), 3600};
    EXPECT_EQ(par10(c), 36000.0);
    // unsolved runs score 10 T whatever their recorded time
    PerformanceRecord d{"d", Solver::LKH, {{5, false}}, 3600};
    EXPECT_EQ(par10(d), 36000.0);
    EXPECT_EQ(par10(d, 3.0), 10800.0);
}

TEST(Par10, InvalidRecords) {
    EXPECT_THROW(par10({"x", Solver::EAX, {}, 3600}), std::invalid_argument);
    EXPECT_THROW(par10({"x", Solver::EAX, {{4000, true}}, 3600}), std::invalid_argument);
    EXPECT_THROW(par10({"x", Solver::EAX, {{-1, true}}, 3600}), std::invalid_argument);
}

TEST(VbsSbs, Examples) {
    const auto sym = vbs_sbs(table_of({{1, 9}, {9, 1}}));
    EXPECT_EQ(sym.vbs, 1.0);
    EXPECT_EQ(sym.sbs, 5.0);
    EXPECT_EQ(sym.sbs_solver, Solver::EAX);  // tie
    const auto one = vbs_sbs(table_of({{7, 3}}));
    EXPECT_EQ(one.vbs, 3.0);
    EXPECT_EQ(one.sbs, 3.0);
    EXPECT_EQ(one.sbs_solver, Solver::LKH);
}

TEST(VbsSbs, MissingSolverData) {
    std::vector<PerformanceRecord> recs{{"a", Solver::EAX, {{1, true}}, 3600},
                                        {"a", Solver::LKH, {{2, true}}, 3600},
                                        {"b", Solver::EAX, {{1, true}}, 3600}};
    try {
        build_performance_table(recs);
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("b"), std::string::npos);
    }
}

TEST(GapClosed, Examples) {
    EXPECT_NEAR(gap_closed(4.92, 67.47, 61.21), 0.10008, 1e-5);
    EXPECT_EQ(gap_closed(4.92, 67.47, 4.92), 1.0);
    EXPECT_EQ(gap_closed(4.92, 67.47, 67.47), 0.0);
    EXPECT_LT(gap_closed(1.0, 2.0, 3.0), 0.0);
    EXPECT_THROW(gap_closed(5.0, 5.0, 5.0), std::domain_error);
}

TEST(SelectorPar10, Examples) {
    const auto t = table_of(random_pairs(25, 1));
    const auto b = vbs_sbs(t);
    const std::vector<double> zero(25, 0.0), uniform(25, 2.5);
    EXPECT_EQ(selector_par10(t, t.best_labels(), zero, false), b.vbs);  // bit-level
    const std::vector<Solver> all_eax(25, Solver::EAX);
    EXPECT_EQ(selector_par10(t, all_eax, zero, false), b.mean_par10[0]);
    EXPECT_NEAR(selector_par10(t, all_eax, uniform, true), b.mean_par10[0] + 2.5, 1e-9);
    EXPECT_THROW(selector_par10(t, std::vector<Solver>(3, Solver::EAX), zero, false), std::invalid_argument);
    EXPECT_THROW(selector_par10(t, all_eax, std::vector<double>(2), true), std::invalid_argument);
}

TEST(SelectorPar10, BoundsProperty) {
    std::mt19937_64 rng(4);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto t = table_of(random_pairs(20, seed));
        const auto b = vbs_sbs(t);
        std::vector<Solver> choice(20);
        for (auto& c : choice) c = (rng() & 1) ? Solver::EAX : Solver::LKH;
        const double s = selector_par10(t, choice, std::vector<double>(20, 0.0), false);
        EXPECT_LE(b.vbs, s + 1e-12);
        double vws = 0.0;  // picking the worse solver everywhere
        for (const auto& r : t.rows()) vws += std::max(r.par10[0], r.par10[1]);
        EXPECT_LE(s, vws / 20.0 + 1e-12);
        EXPECT_LE(b.vbs, b.sbs);
    }
}

TEST(GapClosed, OracleInvariantUnderShift) {
    auto pairs = random_pairs(15, 8);
    for (double shift : {0.0, 10.0, 1000.0}) {
        auto shifted = pairs;
        for (auto& p : shifted) p = {p.first + shift, p.second + shift};
        const auto t = table_of(shifted);
        const auto b = vbs_sbs(t);
        const double s = selector_par10(t, t.best_labels(), std::vector<double>(15, 0.0), false);
        EXPECT_EQ(gap_closed(b.vbs, b.sbs, s), 1.0);
    }
}

TEST(ClassificationMetrics, Examples) {
    const std::vector<Solver> actual{Solver::EAX, Solver::EAX, Solver::EAX, Solver::LKH};
    const std::vector<Solver> all_eax(4, Solver::EAX);
    auto m = classification_metrics(all_eax, actual);
    EXPECT_EQ(m.accuracy, 0.75);
    EXPECT_NEAR(m.f1, 2 * 0.75 / 1.75, 1e-15);
    EXPECT_EQ(m.confusion.tp, 3u);
    EXPECT_EQ(m.confusion.fp, 1u);
    m = classification_metrics(actual, actual);
    EXPECT_EQ(m.accuracy, 1.0);
    EXPECT_EQ(m.f1, 1.0);
    const std::vector<Solver> bal{Solver::EAX, Solver::LKH}, wrong{Solver::LKH, Solver::EAX};
    m = classification_metrics(wrong, bal);
    EXPECT_EQ(m.accuracy, 0.0);
    EXPECT_EQ(m.f1, 0.0);
    EXPECT_EQ(m.confusion.total(), 2u);
}

TEST(ClassificationMetrics, SbsRowConsistentWithEaxPositive) {
    // A constant-EAX predictor scores accuracy p and F1 2p/(1+p) with EAX
    // positive (0.658 at p = 0.49), and F1 0 with LKH positive.
    std::vector<Solver> actual;
    for (int i = 0; i < 100; ++i) actual.push_back(i < 49 ? Solver::EAX : Solver::LKH);
    const auto m = classification_metrics(std::vector<Solver>(100, Solver::EAX), actual);
    EXPECT_EQ(m.accuracy, 0.49);
    EXPECT_NEAR(m.f1, 0.65, 0.01);
    EXPECT_EQ(m.confusion.tn, 0u);
}

TEST(Misclassification, Examples) {
    const auto t = table_of({{10, 100}});
    const std::vector<Solver> pred{Solver::LKH};
    const auto m = misclassification_costs(pred, t.best_labels(), t);
    EXPECT_EQ(m.count_lkh_instead_eax, 1u);
    EXPECT_EQ(m.avg_overhead_lkh_instead_eax, 90.0);
    EXPECT_EQ(m.count_eax_instead_lkh, 0u);
    EXPECT_TRUE(m.undefined_average);
    const auto none = misclassification_costs(t.best_labels(), t.best_labels(), t);
    EXPECT_EQ(none.count_eax_instead_lkh + none.count_lkh_instead_eax, 0u);
}

TEST(Misclassification, MatchesDirectRecomputation) {
    const auto pairs = random_pairs(10, 21);
    const auto t = table_of(pairs);
    std::mt19937_64 rng(2);
    std::vector<Solver> pred(10);
    for (auto& p : pred) p = (rng() % 2) ? Solver::EAX : Solver::LKH;
    const auto m = misclassification_costs(pred, t.best_labels(), t);
    double se = 0, sl = 0;
    int ce = 0, cl = 0;
    for (std::size_t i = 0; i < 10; ++i) {
        const double e = t[i].par10[0], l = t[i].par10[1];
        if (pred[i] == Solver::EAX && l < e) {
            ++ce;
            se += e - l;
        }
        if (pred[i] == Solver::LKH && e <= l) {
            ++cl;
            sl += l - e;
        }
    }
    EXPECT_EQ(m.count_eax_instead_lkh, static_cast<std::size_t>(ce));
    EXPECT_EQ(m.count_lkh_instead_eax, static_cast<std::size_t>(cl));
    EXPECT_NEAR(m.avg_overhead_eax_instead_lkh, ce ? se / ce : 0.0, 1e-9);
    EXPECT_NEAR(m.avg_overhead_lkh_instead_eax, cl ? sl / cl : 0.0, 1e-9);
}

TEST(PerformanceTable, LabelsAndAmbiguity) {
    std::vector<PerformanceRecord> recs{
        {"a", Solver::EAX, {{10, true}, {10, true}}, 3600},
        {"a", Solver::LKH, {{10, true}, {10, true}}, 3600},      // tie -> EAX
        {"b", Solver::EAX, {{1, true}, {100, true}}, 3600},
        {"b", Solver::LKH, {{40, true}, {40, true}}, 3600},      // LKH mean wins, run 0 disagrees
    };
    const auto t = build_performance_table(recs);
    EXPECT_EQ(t[0].best(), Solver::EAX);
    EXPECT_FALSE(t[0].label_ambiguous);
    EXPECT_EQ(t[1].best(), Solver::LKH);
    EXPECT_TRUE(t[1].label_ambiguous);
}

TEST(PerformanceCsv, RoundTripAndErrors) {
    std::vector<PerformanceRecord> recs{{"a", Solver::EAX, {{1.5, true}, {3600, false}}, 3600},
                                        {"a", Solver::LKH, {{2.25, true}}, 3600}};
    const auto text = write_performance_csv(recs);
    EXPECT_EQ(text.substr(0, text.find('\n')), "instance_id,solver,run,time_seconds,solved");
    const auto back = read_performance_csv(text);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(write_performance_csv(back), text);
    EXPECT_THROW(read_performance_csv("instance_id,solver,run,time_seconds,solved\na,GA,0,1,1\n"), csv::CsvError);
    EXPECT_THROW(read_performance_csv("instance_id,solver,run,time_seconds,solved\na,EAX,0,4000,1\n"),
                 csv::CsvError);
}

TEST(SelectorReport, AggregatesAreConsistent) {
    const auto t = table_of(random_pairs(12, 5));
    std::vector<std::size_t> fold_of(12);
    for (std::size_t i = 0; i < 12; ++i) fold_of[i] = i % 3;
    const std::vector<double> p(12, 0.7), thr{0.5, 0.5, 0.5}, cost(12, 1.0);
    const std::vector<Solver> pred(12, Solver::EAX);
    const auto r = build_selector_report("const", t, cost, true, fold_of, p, pred, thr);
    EXPECT_EQ(r.confusion.total(), 12u);
    double s = 0;
    for (const auto& pr : r.predictions) s += pr.par10;
    EXPECT_NEAR(r.mean_par10, s / 12.0, 1e-9);
    double fs = 0;
    for (const auto& f : r.per_fold) fs += f.par10 * static_cast<double>(f.n_test);
    EXPECT_NEAR(fs / 12.0, r.mean_par10, 1e-9);
    EXPECT_NEAR(r.mean_par10, r.baselines.mean_par10[0] + 1.0, 1e-9);
    ASSERT_TRUE(r.gap_closed.has_value());
}

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tspas/features.hpp"

using namespace tspas;

namespace {

// Coordinates on a 2^-10 grid so translations by grid multiples are exact.
Instance dyadic_instance(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> coord(0, 1023);
    Instance inst{"dy", {}};
    for (std::size_t i = 0; i < n; ++i)
        inst.nodes.push_back({std::ldexp(coord(rng), -10), std::ldexp(coord(rng), -10)});
    return inst;
}

}  // namespace

TEST(SummaryStats, ConstantInput) {
    const std::vector<double> xs{1, 1, 1};
    const auto s = summary_stats(xs);
    EXPECT_EQ(s.mean, 1.0);
    EXPECT_EQ(s.sd, 0.0);
    EXPECT_EQ(s.coef_of_var, 0.0);
    EXPECT_EQ(s.skew, 0.0);
    EXPECT_TRUE(s.degenerate);
}

TEST(SummaryStats, MedianSumSpan) {
    const std::vector<double> xs{4, 1, 3, 2};
    const auto s = summary_stats(xs);
    EXPECT_EQ(s.median, 2.5);
    EXPECT_EQ(s.sum, 10.0);
    EXPECT_EQ(s.span, 3.0);
    EXPECT_EQ(s.min, 1.0);
    EXPECT_EQ(s.max, 4.0);
    EXPECT_FALSE(s.degenerate);
}

TEST(SummaryStats, SkewAgainstDirectMoments) {
    const std::vector<double> xs{2, 4, 4, 4, 5, 5, 7, 9};
    const auto s = summary_stats(xs);
    EXPECT_EQ(s.mean, 5.0);
    // direct: deviations -3,-1,-1,-1,0,0,2,4
    const double m2 = (9.0 + 1 + 1 + 1 + 0 + 0 + 4 + 16) / 8.0;
    const double m3 = (-27.0 - 1 - 1 - 1 + 0 + 0 + 8 + 64) / 8.0;
    EXPECT_EQ(m2, 4.0);
    EXPECT_NEAR(s.skew, m3 / std::pow(m2, 1.5), 1e-15);
    EXPECT_NEAR(s.skew, 0.65625, 1e-15);
    EXPECT_NEAR(s.var, 32.0 / 7.0, 1e-15);
    EXPECT_NEAR(s.coef_of_var, std::sqrt(32.0 / 7.0) / 5.0, 1e-15);
}

TEST(SummaryStats, DegenerateCases) {
    const std::vector<double> one{3.0};
    auto s = summary_stats(one);
    EXPECT_EQ(s.sd, 0.0);
    EXPECT_EQ(s.var, 0.0);
    EXPECT_EQ(s.skew, 0.0);
    EXPECT_TRUE(s.degenerate);
    const std::vector<double> zero_mean{-1, 1};
    s = summary_stats(zero_mean);
    EXPECT_EQ(s.coef_of_var, 0.0);
    EXPECT_TRUE(s.degenerate);
    EXPECT_THROW(summary_stats(std::vector<double>{}), std::invalid_argument);
}

TEST(ComputeFeatures, CollinearExample) {
    const auto fv = compute_features({"c", {{0, 0}, {1, 0}, {2, 0}}}, 1);
    EXPECT_EQ(fv.at("mst_dists_mean"), 1.0);
    EXPECT_EQ(fv.at("mst_dists_sum"), 2.0);
    EXPECT_EQ(fv.at("mst_degrees_max"), 2.0);
    // 0 -> 1, 1 -> 0 (tie with 2 goes to the lower index), 2 -> 1
    EXPECT_EQ(fv.at("nng_1_strong_components_count"), 2.0);
    EXPECT_EQ(fv.at("nng_1_weak_components_count"), 1.0);
    EXPECT_DOUBLE_EQ(fv.at("nng_1_strong_edge_fraction"), 2.0 / 3.0);
}

TEST(ComputeFeatures, SchemaSnapshot) {
    const auto names = feature_names(5);
    ASSERT_EQ(names.size(), 53u);
    EXPECT_EQ(names.front(), "mst_dists_sum");
    EXPECT_EQ(names[10], "mst_degrees_sum");
    EXPECT_EQ(names[20], "nng_5_strong_components_count");
    EXPECT_EQ(names[31], "nng_5_weak_components_count");
    EXPECT_EQ(names[42], "nng_5_strong_edge_fraction");
    EXPECT_EQ(names.back(), "nng_5_dists_skew");
    const auto a = compute_features(generate_rue(50, 1));
    const auto b = compute_features(generate_clustered(80, 3, 0.05, 2));
    EXPECT_EQ(a.names, names);
    EXPECT_EQ(b.names, names);
    for (double v : a.values) EXPECT_TRUE(std::isfinite(v));
}

TEST(ComputeFeatures, TranslationInvariantExactly) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto inst = dyadic_instance(120, seed);
        const auto base = compute_features(inst);
        for (auto& p : inst.nodes) {
            p.x += 37.0;
            p.y -= 5.25;
        }
        EXPECT_EQ(compute_features(inst).values, base.values);
    }
}

TEST(ComputeFeatures, ScaleEquivariance) {
    const auto schema = feature_schema(5);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto inst = generate_rue(150, seed);
        const auto base = compute_features(inst);
        for (auto& p : inst.nodes) {
            p.x *= 2.0;
            p.y *= 2.0;
        }
        const auto scaled = compute_features(inst);
        for (std::size_t f = 0; f < schema.size(); ++f) {
            const double expect = base.values[f] * std::pow(2.0, schema[f].length_power);
            EXPECT_NEAR(scaled.values[f], expect, 1e-12 * std::max(1.0, std::abs(expect))) << schema[f].name;
        }
    }
}

TEST(ComputeFeatures, CostMeasured) {
    const auto fv = compute_features(generate_rue(1000, 3));
    EXPECT_GT(fv.cost_seconds, 0.0);
    EXPECT_LT(fv.cost_seconds, 7.0);  // 10x headroom over 0.7 s
}

TEST(FeatureCsv, RoundTrip) {
    FeatureTable t;
    t.names = feature_names(5);
    for (std::uint64_t s = 0; s < 3; ++s) {
        const auto fv = compute_features(generate_rue(30, s));
        t.rows.push_back({"i" + std::to_string(s), fv.cost_seconds, fv.values});
    }
    const auto text = write_feature_csv(t);
    const auto back = read_feature_csv(text);
    EXPECT_EQ(back.names, t.names);
    ASSERT_EQ(back.rows.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(back.rows[i].instance_id, t.rows[i].instance_id);
        EXPECT_EQ(back.rows[i].values, t.rows[i].values);
        EXPECT_EQ(back.rows[i].cost_seconds, t.rows[i].cost_seconds);
    }
    EXPECT_EQ(write_feature_csv(back), text);
    EXPECT_THROW(read_feature_csv("id,cost\n"), csv::CsvError);
}

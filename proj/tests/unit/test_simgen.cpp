#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "geest/error.hpp"
#include "geest/simgen.hpp"

using namespace geest;

namespace {

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double var_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

} // namespace

// --- clustered ----------------------------------------------------------------

TEST(Clustered, NoiseFreeReduction) {
    ClusteredConfig c;
    c.sigma2 = 0.0;
    c.seed = 3;
    const Dataset d = gen_clustered(c);
    ASSERT_EQ(d.n(), 100u);
    ASSERT_EQ(d.p(), 5u);
    for (std::size_t i = 0; i < d.n(); ++i)
        EXPECT_DOUBLE_EQ(d.y[i], d.features(i, 0) + d.features(i, 1) - d.features(i, 2));
}

TEST(Clustered, ClusterConstantFeature) {
    ClusteredConfig c;
    c.feature_mode = FeatureMode::x1_cluster_constant;
    c.seed = 4;
    const Dataset d = gen_clustered(c);
    std::map<std::int64_t, double> first;
    for (std::size_t i = 0; i < d.n(); ++i) {
        const auto g = (*d.cluster_id)[i];
        EXPECT_GE(g, 1);
        EXPECT_LE(g, 10);
        if (!first.count(g)) first[g] = d.features(i, 0);
        EXPECT_EQ(d.features(i, 0), first[g]);
    }
    EXPECT_EQ(first.size(), 10u);
}

TEST(Clustered, RandomInterceptVariance) {
    ClusteredConfig c;
    c.M = 1000;
    c.n_m = 10;
    c.sigma2 = 0.01;
    c.sigma2_1 = 1.0;
    c.seed = 5;
    const Dataset d = gen_clustered(c);
    std::vector<double> cluster_mean(1000, 0.0);
    for (std::size_t i = 0; i < d.n(); ++i) {
        const double r = d.y[i] - (d.features(i, 0) + d.features(i, 1) - d.features(i, 2));
        cluster_mean[static_cast<std::size_t>((*d.cluster_id)[i] - 1)] += r / 10.0;
    }
    // Var = sigma2_1 + sigma2 / n_m; the sample variance has sd ~ sqrt(2/999).
    EXPECT_NEAR(var_of(cluster_mean), 1.001, 4.0 * std::sqrt(2.0 / 999.0));
}

TEST(Clustered, Deterministic) {
    ClusteredConfig c;
    c.sigma2_2 = 1.0;
    c.seed = 8;
    const Dataset a = gen_clustered(c), b = gen_clustered(c);
    EXPECT_EQ(a.features, b.features);
    EXPECT_EQ(a.y, b.y);
    c.seed = 9;
    EXPECT_NE(gen_clustered(c).y, a.y);
}

TEST(Clustered, InvalidConfig) {
    ClusteredConfig c;
    c.M = 0;
    EXPECT_THROW(gen_clustered(c), Error);
    c = {};
    c.sigma2 = -1.0;
    EXPECT_THROW(gen_clustered(c), Error);
    EXPECT_THROW(parse_feature_mode("bogus"), Error);
}

// --- NSRS ---------------------------------------------------------------------

TEST(Nsrs, InclusionProbabilities) {
    NsrsConfig c;
    c.seed = 1;
    const auto pop = gen_nsrs_population(c);
    ASSERT_EQ(pop.population.n(), 10000u);
    ASSERT_EQ(pop.design.pi.size(), 10000u);
    EXPECT_EQ(pop.design.population_size, 10000);
    const double total = std::accumulate(pop.design.pi.begin(), pop.design.pi.end(), 0.0);
    EXPECT_NEAR(total, 100.0, 1e-9);
    for (double p : pop.design.pi) {
        EXPECT_GT(p, 0.0);
        EXPECT_LT(p, 1.0);
    }
    // pi is proportional to u, which is y plus unit noise.
    const auto& y = pop.population.y;
    const auto& pi = pop.design.pi;
    const double my = mean_of(y), mp = mean_of(pi);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        sxy += (y[i] - my) * (pi[i] - mp);
        sxx += (y[i] - my) * (y[i] - my);
        syy += (pi[i] - mp) * (pi[i] - mp);
    }
    EXPECT_GT(sxy / std::sqrt(sxx * syy), 0.9);
}

TEST(Nsrs, PopulationMean) {
    NsrsConfig c;
    c.N = 100000;
    c.seed = 2;
    const auto pop = gen_nsrs_population(c);
    // E[y] = 5 + 1 + 1; Var[y] = 10 + 10 + 1.
    EXPECT_NEAR(mean_of(pop.population.y), 7.0, 4.0 * std::sqrt(21.0 / 1e5));
}

TEST(Nsrs, MisspecifiedDropsX2) {
    NsrsConfig c;
    c.N = 1000;
    c.misspecified = true;
    c.seed = 3;
    const auto pop = gen_nsrs_population(c);
    EXPECT_EQ(pop.population.p(), 4u);
    c.misspecified = false;
    EXPECT_EQ(gen_nsrs_population(c).population.p(), 5u);
}

TEST(Nsrs, Truncation) {
    std::vector<double> pi{1.4, 0.3, 0.2, 0.1};  // total 2.0
    EXPECT_EQ(truncate_inclusion_probs(pi), 1u);
    EXPECT_NEAR(std::accumulate(pi.begin(), pi.end(), 0.0), 2.0, 1e-12);
    EXPECT_LT(pi[0], 1.0);
    EXPECT_NEAR(pi[1] / pi[2], 1.5, 1e-12);
}

TEST(Pps, FixedSampleSize) {
    SamplingDesign d{{0.5, 0.3, 0.7, 0.1, 0.4}, 5};
    for (std::uint64_t s = 0; s < 200; ++s) {
        const auto idx = draw_pps_sample(d, s);
        EXPECT_EQ(idx.size(), 2u);
        EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
        EXPECT_LT(idx[0], idx[1]);
    }
}

TEST(Pps, EqualProbabilityFrequencies) {
    const std::size_t N = 20, reps = 10000;
    SamplingDesign d{std::vector<double>(N, 0.25), static_cast<std::int64_t>(N)};
    std::vector<double> hits(N, 0.0);
    for (std::size_t r = 0; r < reps; ++r)
        for (auto i : draw_pps_sample(d, r)) hits[i] += 1.0;
    const double sd = std::sqrt(0.25 * 0.75 / reps);
    // 3 sigma family-wise over 20 units: Bonferroni moves the per-unit bound
    // from 3.0 to 4.0 sd.
    for (double h : hits) EXPECT_NEAR(h / reps, 0.25, 4.0 * sd);
}

TEST(Pps, UnequalProbabilityFrequencies) {
    const std::size_t reps = 10000;
    SamplingDesign d{{0.8, 0.8, 0.2, 0.2}, 4};
    std::vector<double> hits(4, 0.0);
    for (std::size_t r = 0; r < reps; ++r)
        for (auto i : draw_pps_sample(d, 1000 + r)) hits[i] += 1.0;
    for (std::size_t i = 0; i < 4; ++i) {
        const double p = d.pi[i];
        EXPECT_NEAR(hits[i] / reps, p, 3.0 * std::sqrt(p * (1 - p) / reps));
    }
}

// --- drift ----------------------------------------------------------------------

TEST(Drift, ObservedPeriod) {
    DriftConfig c;
    c.seed = 1;
    const auto dd = gen_drift(c);
    const Dataset& d = dd.observed;
    ASSERT_EQ(d.n(), 500u);
    ASSERT_TRUE(d.time && d.season);
    EXPECT_TRUE(std::is_sorted(d.time->begin(), d.time->end()));
    for (std::size_t i = 0; i < d.n(); ++i) {
        EXPECT_GE((*d.time)[i], 0.0);
        EXPECT_LT((*d.time)[i], 0.8);
        EXPECT_EQ((*d.season)[i], season_of((*d.time)[i], 10));
    }
    EXPECT_EQ((*d.season).back(), 8);
}

TEST(Drift, StationaryWithoutDrift) {
    DriftGenerator g(DriftConfig{});
    const double a = mean_of(g.at(0.05, 100000, 1).y), b = mean_of(g.at(0.95, 100000, 2).y);
    // Var[y] = 4 + 1 + 4 + 1.
    EXPECT_NEAR(a - b, 0.0, 4.0 * std::sqrt(2 * 10.0 / 1e5));
}

TEST(Drift, LabelDriftShiftsMean) {
    DriftConfig c;
    c.label_drift = DriftLevel::strong;
    DriftGenerator g(c);
    const double m0 = mean_of(g.at(0.0, 200000, 1).y);
    for (double t : {0.5, 1.0}) {
        const double mt = mean_of(g.at(t, 200000, 7).y);
        EXPECT_NEAR(mt - m0, 2.0 * t, 4.0 * std::sqrt(2 * 10.0 / 2e5));
    }
}

TEST(Drift, FeatureDriftShiftsFeatures) {
    DriftConfig c;
    c.feature_drift = DriftLevel::strong;
    DriftGenerator g(c);
    const Dataset d = g.at(0.5, 100000, 3);
    const auto x1 = d.features.column(0), x4 = d.features.column(3);
    EXPECT_NEAR(mean_of(x1), 1.0, 0.02);
    EXPECT_NEAR(var_of(x1), 1.0, 0.03);
    EXPECT_NEAR(mean_of(x4), 0.0, 0.02);
    // beta is unchanged: E[y] = 2*1 - 1 + 2*1 at t = 0.5.
    EXPECT_NEAR(mean_of(d.y), 3.0, 0.05);
}

TEST(Drift, Timepoints) {
    const auto tp = default_drift_timepoints(DriftConfig{});
    ASSERT_EQ(tp.size(), 5u);
    EXPECT_EQ(tp[0].tag, "Els");
    EXPECT_DOUBLE_EQ(tp[0].t, 0.8);
    EXPECT_DOUBLE_EQ(tp[4].t, 1.0);
    EXPECT_EQ(drift_slope(parse_drift_level("medium")), 1.0);
    EXPECT_THROW(parse_drift_level("huge"), Error);
}

// --- hierarchical ---------------------------------------------------------------------

TEST(HierTree, DefaultCounts) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        HierConfig c;
        c.seed = seed;
        const auto t = generate_tree(c);
        EXPECT_EQ(t.leaves().size(), 50u);
        const auto internal = t.internal_nodes();
        EXPECT_EQ(internal.size(), 39u);
        std::size_t arity_sum = 0;
        for (NodeId n : internal) {
            const auto a = t.children(n).size();
            EXPECT_TRUE(a == 2 || a == 3);
            arity_sum += a;
        }
        EXPECT_EQ(t.size(), 89u);
        EXPECT_EQ(arity_sum, t.size() - 1);
    }
}

TEST(HierTree, SmallestInstance) {
    HierConfig c;
    c.n_leaves = 2;
    c.internal_nodes = 1;
    const auto t = generate_tree(c);
    EXPECT_EQ(t.size(), 3u);
    EXPECT_EQ(t.children(CategoryTree::root).size(), 2u);
}

TEST(HierTree, ImpossibleCounts) {
    HierConfig c;
    c.n_leaves = 10;
    c.internal_nodes = 2;  // at most 3 + 2 leaves
    EXPECT_THROW(generate_tree(c), Error);
}

TEST(HierData, LabelsAreLeaves) {
    HierConfig c;
    c.seed = 4;
    auto tree = std::make_shared<const CategoryTree>(generate_tree(c));
    const auto model = make_hier_model(tree, c, 5);
    const Dataset d = gen_hier_data(model, 2000, 6);
    EXPECT_EQ(d.n(), 2000u);
    EXPECT_EQ(d.p(), 5u);
    for (NodeId n : d.classes) EXPECT_TRUE(tree->is_leaf(n));
    EXPECT_NO_THROW(d.validate());
}

TEST(HierData, LevelOneProportionsMatchSoftmax) {
    HierConfig c;
    c.n_leaves = 3;
    c.internal_nodes = 1;
    c.seed = 7;
    auto tree = std::make_shared<const CategoryTree>(generate_tree(c));
    const auto model = make_hier_model(tree, c, 8);
    const Dataset d = gen_hier_data(model, 20000, 9);
    const Matrix& beta = model.coefficients[0];
    std::vector<double> expected(3, 0.0), variance(3, 0.0), observed(3, 0.0);
    for (std::size_t i = 0; i < d.n(); ++i) {
        double eta[3], top = -1e300, total = 0.0;
        for (std::size_t k = 0; k < 3; ++k) {
            eta[k] = 0.0;
            for (std::size_t j = 0; j < 5; ++j) eta[k] += beta(k, j) * d.features(i, j);
            top = std::max(top, eta[k]);
        }
        for (double& e : eta) total += e = std::exp(e - top);
        for (std::size_t k = 0; k < 3; ++k) {
            const double p = eta[k] / total;
            expected[k] += p;
            variance[k] += p * (1 - p);
        }
        for (std::size_t k = 0; k < 3; ++k)
            if (tree->children(0)[k] == d.classes[i]) observed[k] += 1.0;
    }
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(observed[k], expected[k], 3.0 * std::sqrt(variance[k]));
}

TEST(HierData, VanishingDecayGivesUniformDeepLevels) {
    HierConfig c;
    c.effect_decay = 1e-9;
    c.seed = 10;
    auto tree = std::make_shared<const CategoryTree>(generate_tree(c));
    const auto model = make_hier_model(tree, c, 11);
    const std::vector<double> x{1.5, -2.0, 0.3, 2.2, -0.7};
    for (NodeId n : tree->internal_nodes()) {
        if (n == CategoryTree::root) continue;
        const auto p = model.child_probs(n, x);
        for (double v : p) EXPECT_NEAR(v, 1.0 / static_cast<double>(p.size()), 1e-6);
    }
}

TEST(HierData, Deterministic) {
    HierConfig c;
    auto tree = std::make_shared<const CategoryTree>(generate_tree(c));
    const auto model = make_hier_model(tree, c, 1);
    EXPECT_EQ(gen_hier_data(model, 100, 2).classes, gen_hier_data(model, 100, 2).classes);
    EXPECT_TRUE(generate_tree(c) == *tree);
}

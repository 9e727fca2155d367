#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "geest/error.hpp"
#include "geest/metrics.hpp"
#include "geest/rng.hpp"

using namespace geest;

namespace {

CategoryTree example_tree() {
    return CategoryTree::parse({"1", "2.1", "2.2.1", "2.2.2", "2.3", "3.1", "3.2"});
}

struct Labels {
    const CategoryTree& t;
    std::vector<NodeId> operator()(std::initializer_list<const char*> names) const {
        std::vector<NodeId> out;
        for (auto n : names) out.push_back(t.find(n));
        return out;
    }
};

// Leaf probability row from {label: p}.
Matrix leaf_row(const CategoryTree& t, std::map<std::string, double> p) {
    Matrix m(1, t.leaves().size());
    for (const auto& [label, v] : p) m(0, static_cast<std::size_t>(t.leaf_index(t.find(label)))) = v;
    return m;
}

} // namespace

TEST(Mse, Basics) {
    EXPECT_EQ(mse(std::vector<double>{1, 2}, std::vector<double>{1, 2}).value, 0.0);
    EXPECT_EQ(mse(std::vector<double>{0, 0}, std::vector<double>{1, -1}).value, 1.0);
    EXPECT_THROW(mse(std::vector<double>{1}, std::vector<double>{1, 2}), Error);
}

TEST(Mse, MatchesLoop) {
    Rng rng(1);
    std::vector<double> y(500), f(500);
    for (std::size_t i = 0; i < 500; ++i) y[i] = uniform01(rng) * 10, f[i] = uniform01(rng) * 10;
    double s = 0.0;
    for (std::size_t i = 0; i < 500; ++i) s += (y[i] - f[i]) * (y[i] - f[i]);
    const auto r = mse(y, f);
    EXPECT_NEAR(r.value, s / 500.0, 1e-12);
    ASSERT_TRUE(r.per_observation);
    EXPECT_EQ(r.per_observation->size(), 500u);
}

TEST(HtLoss, HandEvaluation) {
    SamplingDesign d{{0.5, 0.5}, 4};
    EXPECT_DOUBLE_EQ(ht_loss(std::vector<double>{1, 3}, d).value, 2.0);
}

TEST(HtLoss, EqualPiGivesSampleMean) {
    const std::vector<double> l{1.5, 2.0, 7.25, 0.0, 3.0};
    SamplingDesign d{std::vector<double>(5, 5.0 / 200.0), 200};
    EXPECT_NEAR(ht_loss(l, d).value, (1.5 + 2.0 + 7.25 + 3.0) / 5.0, 1e-14);
}

TEST(HtLoss, DesignExpectationIsPopulationMean) {
    const std::vector<double> pi{0.2, 0.9, 0.45, 0.6}, loss{3.0, 1.0, 4.0, 1.5};
    double expected = 0.0;
    for (unsigned mask = 1; mask < 16; ++mask) {
        double p = 1.0;
        SamplingDesign d;
        d.population_size = 4;
        std::vector<double> l;
        for (unsigned i = 0; i < 4; ++i) {
            if (mask & (1u << i)) {
                p *= pi[i];
                d.pi.push_back(pi[i]);
                l.push_back(loss[i]);
            } else {
                p *= 1.0 - pi[i];
            }
        }
        expected += p * ht_loss(l, d).value;
    }
    EXPECT_NEAR(expected, (3.0 + 1.0 + 4.0 + 1.5) / 4.0, 1e-14);
}

TEST(HajekLoss, Basics) {
    SamplingDesign d{{0.5, 0.5}, 10};
    EXPECT_DOUBLE_EQ(hajek_loss(std::vector<double>{1, 3}, d).value, 2.0);
    SamplingDesign e{{0.3, 0.3, 0.3}, 10};
    EXPECT_NEAR(hajek_loss(std::vector<double>{1, 2, 6}, e).value, 3.0, 1e-14);
}

TEST(HajekLoss, AgreesWithHtWhenWeightsSumToN) {
    SamplingDesign d{{0.5, 0.25, 1.0}, 7};  // weights 2 + 4 + 1 = 7
    const std::vector<double> l{2.0, 1.0, 5.0};
    EXPECT_DOUBLE_EQ(ht_loss(l, d).value, hajek_loss(l, d).value);
}

TEST(SamplingDesign, Validation) {
    EXPECT_THROW((SamplingDesign{{0.0, 0.5}, 10}.validate()), Error);
    EXPECT_THROW((SamplingDesign{{1.5}, 10}.validate()), Error);
    EXPECT_THROW((SamplingDesign{{0.5, 0.5, 0.5}, 2}.validate()), Error);
    EXPECT_NO_THROW((SamplingDesign{{1.0, 0.5}, 2}.validate()));
}

TEST(FlatPrf, Perfect) {
    const std::vector<int> y{0, 1, 2, 1};
    for (auto a : {Averaging::micro, Averaging::macro}) {
        const auto r = flat_prf(y, y, a);
        EXPECT_EQ(r.precision, 1.0);
        EXPECT_EQ(r.recall, 1.0);
        EXPECT_EQ(r.f1, 1.0);
    }
}

TEST(FlatPrf, HandConfusionMatrix) {
    const std::vector<int> y{0, 0, 1}, f{0, 1, 1};
    const auto micro = flat_prf(y, f, Averaging::micro);
    EXPECT_DOUBLE_EQ(micro.precision, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(micro.recall, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(micro.f1, 2.0 / 3.0);
    const auto macro = flat_prf(y, f, Averaging::macro);
    EXPECT_DOUBLE_EQ(macro.precision, 0.75);
    EXPECT_DOUBLE_EQ(macro.recall, 0.75);
}

TEST(FlatPrf, MicroEqualsAccuracy) {
    Rng rng(4);
    std::vector<int> y(300), f(300);
    for (std::size_t i = 0; i < 300; ++i) y[i] = static_cast<int>(uniform_index(rng, 5)), f[i] = static_cast<int>(uniform_index(rng, 5));
    const double acc = accuracy(y, f).value;
    const auto r = flat_prf(y, f, Averaging::micro);
    EXPECT_DOUBLE_EQ(r.precision, acc);
    EXPECT_DOUBLE_EQ(r.recall, acc);
}

TEST(HierPrf, SiblingLeaves) {
    const auto t = example_tree();
    Labels L{t};
    for (auto a : {Averaging::micro, Averaging::macro}) {
        const auto r = hier_prf(t, L({"2.2.1"}), L({"2.2.2"}), a);
        EXPECT_DOUBLE_EQ(r.precision, 2.0 / 3.0);
        EXPECT_DOUBLE_EQ(r.recall, 2.0 / 3.0);
        const auto z = hier_prf(t, L({"2.2.1"}), L({"1"}), a);
        EXPECT_EQ(z.precision, 0.0);
        EXPECT_EQ(z.recall, 0.0);
        EXPECT_EQ(z.f1, 0.0);
        const auto one = hier_prf(t, L({"2.2.1", "3.1"}), L({"2.2.1", "3.1"}), a);
        EXPECT_EQ(one.f1, 1.0);
    }
}

TEST(HierPrf, MatchesSetOracle) {
    // Micro: pooled |shared| / pooled |pred| (or |true|). Macro: per
    // predicted class (precision) and per true class (recall) of the same
    // ratios, averaged over classes.
    const auto t = example_tree();
    Rng rng(9);
    const auto& leaves = t.leaves();
    std::vector<NodeId> y(200), f(200);
    for (std::size_t i = 0; i < 200; ++i) {
        y[i] = leaves[uniform_index(rng, leaves.size())];
        f[i] = leaves[uniform_index(rng, leaves.size())];
    }
    auto shared = [&](NodeId a, NodeId b) {
        auto sa = t.augment(a), sb = t.augment(b);
        std::set<NodeId> s(sa.begin(), sa.end());
        return static_cast<double>(std::count_if(sb.begin(), sb.end(), [&](NodeId n) { return s.count(n) > 0; }));
    };
    double num = 0, dp = 0, dr = 0;
    std::map<NodeId, std::array<double, 2>> per_pred, per_true;
    for (std::size_t i = 0; i < 200; ++i) {
        const double s = shared(y[i], f[i]);
        num += s;
        dp += static_cast<double>(t.augment(f[i]).size());
        dr += static_cast<double>(t.augment(y[i]).size());
        per_pred[f[i]][0] += s;
        per_pred[f[i]][1] += static_cast<double>(t.augment(f[i]).size());
        per_true[y[i]][0] += s;
        per_true[y[i]][1] += static_cast<double>(t.augment(y[i]).size());
    }
    const auto micro = hier_prf(t, y, f, Averaging::micro);
    EXPECT_NEAR(micro.precision, num / dp, 1e-12);
    EXPECT_NEAR(micro.recall, num / dr, 1e-12);
    EXPECT_NEAR(micro.f1, 2 * (num / dp) * (num / dr) / (num / dp + num / dr), 1e-12);
    double mp = 0, mr = 0;
    for (const auto& [c, v] : per_pred) mp += v[0] / v[1];
    for (const auto& [c, v] : per_true) mr += v[0] / v[1];
    mp /= static_cast<double>(per_pred.size());
    mr /= static_cast<double>(per_true.size());
    const auto macro = hier_prf(t, y, f, Averaging::macro);
    EXPECT_NEAR(macro.precision, mp, 1e-12);
    EXPECT_NEAR(macro.recall, mr, 1e-12);
    EXPECT_NEAR(macro.f1, 2 * mp * mr / (mp + mr), 1e-12);
}

TEST(SymDiff, Examples) {
    const auto t = example_tree();
    Labels L{t};
    EXPECT_EQ(sym_diff_loss(t, L({"2.2.1"}), L({"2.2.2"})).value, 2.0);
    EXPECT_EQ(sym_diff_loss(t, L({"2.2.1", "3.1"}), L({"2.2.1", "3.1"})).value, 0.0);
    EXPECT_EQ(sym_diff_loss(t, L({"2.2.1"}), L({"3.1"})).value, 5.0);
}

TEST(SymDiff, EqualsPathEdgesOnAllPairs) {
    const auto t = example_tree();
    for (NodeId a = 1; a < static_cast<NodeId>(t.size()); ++a)
        for (NodeId b = 1; b < static_cast<NodeId>(t.size()); ++b) {
            const std::vector<NodeId> y{a}, f{b};
            EXPECT_EQ(sym_diff_loss(t, y, f).value, static_cast<double>(t.path_edges(a, b)));
            EXPECT_EQ(shortest_path_loss(t, y, f).value, static_cast<double>(t.path_edges(a, b)));
        }
}

TEST(ShortestPath, LevelWeights) {
    const auto t = example_tree();
    Labels L{t};
    const std::vector<double> w{1.0, 0.5, 0.25};
    EXPECT_DOUBLE_EQ(shortest_path_loss(t, L({"2.2.1"}), L({"2.2.2"}), w).value, 0.5);
    EXPECT_DOUBLE_EQ(shortest_path_loss(t, L({"2.2.1"}), L({"2.2.1"}), w).value, 0.0);
    // 2.2.1 -> 2.2 -> 2 -> root -> 1: 0.25 + 0.5 + 1 + 1
    EXPECT_DOUBLE_EQ(shortest_path_loss(t, L({"2.2.1"}), L({"1"}), w).value, 2.75);
    EXPECT_EQ(default_level_weights(t), w);
    EXPECT_THROW(shortest_path_loss(t, L({"1"}), L({"1"}), std::vector<double>{1.0, 0.5}), Error);
    EXPECT_THROW(shortest_path_loss(t, L({"1"}), L({"1"}), std::vector<double>{1.0, 2.0, 0.5}), Error);
}

TEST(HLoss, FirstErrorLevel) {
    const auto t = example_tree();
    Labels L{t};
    const std::vector<double> c{1.0, 0.5, 0.25};
    EXPECT_DOUBLE_EQ(h_loss(t, L({"2.2.1"}), L({"2.2.2"}), c).value, 0.25);
    EXPECT_DOUBLE_EQ(h_loss(t, L({"2.2.1"}), L({"3.1"}), c).value, 1.0);
    EXPECT_DOUBLE_EQ(h_loss(t, L({"2.2.1"}), L({"2.2.1"}), c).value, 0.0);
    EXPECT_DOUBLE_EQ(h_loss(t, L({"2.2.1"}), L({"2.3"}), c).value, 0.5);
    EXPECT_THROW(h_loss(t, L({"1"}), L({"2.1"}), std::vector<double>{1.0, 1.0, 0.5}), Error);
}

TEST(WinScore, DeterministicCorrectLeaf) {
    const auto t = example_tree();
    Labels L{t};
    EXPECT_DOUBLE_EQ(win_score(t, L({"2.2.1"}), leaf_row(t, {{"2.2.1", 1.0}})).value, 1.0);
}

TEST(WinScore, PartialMass) {
    const auto t = example_tree();
    Labels L{t};
    // Marginals: p(2) = 0.8, p(2.2) = 0.6, p(2.2.1) = 0.5.
    const Matrix p = leaf_row(t, {{"2.2.1", 0.5}, {"2.2.2", 0.1}, {"2.1", 0.1}, {"2.3", 0.1}, {"1", 0.1}, {"3.1", 0.1}});
    EXPECT_NEAR(win_score(t, L({"2.2.1"}), p).value, 0.675, 1e-12);
}

TEST(WinScore, WrongFirstLevel) {
    const auto t = example_tree();
    Labels L{t};
    EXPECT_EQ(win_score(t, L({"2.2.1"}), leaf_row(t, {{"1", 0.6}, {"2.2.1", 0.4}})).value, 0.0);
}

TEST(WinScore, StopsAtFirstError) {
    const auto t = example_tree();
    Labels L{t};
    // Level 1 right (p(2) = 0.7), level 2 wrong (2.1 beats 2.2).
    const Matrix p = leaf_row(t, {{"2.1", 0.4}, {"2.2.1", 0.3}, {"1", 0.3}});
    EXPECT_NEAR(win_score(t, L({"2.2.1"}), p).value, 0.35, 1e-12);
}

TEST(WinScore, RejectsNonStochasticRows) {
    const auto t = example_tree();
    Labels L{t};
    EXPECT_THROW(win_score(t, L({"1"}), leaf_row(t, {{"1", 0.6}})), Error);
}

TEST(AggregatePlan, Means) {
    EXPECT_EQ(aggregate_plan(std::vector<double>{2, 2, 2}).value, 2.0);
    EXPECT_EQ(aggregate_plan(std::vector<double>{1, 3}).value, 2.0);
    Rng rng(3);
    std::vector<double> v(50);
    for (auto& x : v) x = uniform01(rng);
    double s = 0.0;
    for (double x : v) s += x;
    EXPECT_NEAR(aggregate_plan(v).value, s / 50.0, 1e-12);
    EXPECT_THROW(aggregate_plan(std::vector<double>{}), Error);
}

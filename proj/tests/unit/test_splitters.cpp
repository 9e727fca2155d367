#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "geest/error.hpp"
#include "geest/kmeans.hpp"
#include "geest/rng.hpp"
#include "geest/splitters.hpp"

using namespace geest;

namespace {

std::vector<std::size_t> sizes(const ResamplingPlan& p) {
    std::vector<std::size_t> s;
    for (const auto& sp : p.splits) s.push_back(sp.test.size());
    std::sort(s.begin(), s.end());
    return s;
}

Matrix line_points(std::initializer_list<double> xs) {
    Matrix m(xs.size(), 2);
    std::size_t i = 0;
    for (double x : xs) m(i++, 0) = x;
    return m;
}

std::vector<std::size_t> idx(std::initializer_list<std::size_t> v) { return v; }

} // namespace

TEST(KFold, ForcedSizes) {
    const auto p = kfold(10, 5, 1);
    EXPECT_EQ(sizes(p), std::vector<std::size_t>(5, 2));
    EXPECT_NO_THROW(check_plan(p, 10));
    EXPECT_TRUE(p.partition);
}

TEST(KFold, BalancedRemainder) {
    EXPECT_EQ(sizes(kfold(7, 3, 4)), (std::vector<std::size_t>{2, 2, 3}));
}

TEST(KFold, Deterministic) {
    EXPECT_TRUE(kfold(50, 5, 9) == kfold(50, 5, 9));
    EXPECT_FALSE(kfold(50, 5, 9) == kfold(50, 5, 10));
}

TEST(KFold, InvalidK) {
    EXPECT_THROW(kfold(5, 1, 0), Error);
    EXPECT_THROW(kfold(5, 6, 0), Error);
}

TEST(RepeatedKFold, PaperProtocolSize) {
    const auto p = repeated_kfold(100, 5, 10, 3);
    EXPECT_EQ(p.size(), 50u);
    EXPECT_NO_THROW(check_plan(p, 100));
}

TEST(RepeatedKFold, OneRepeatIsKFold) {
    const auto a = repeated_kfold(31, 4, 1, 12), b = kfold(31, 4, 12);
    EXPECT_EQ(a.splits, b.splits);
}

TEST(RepeatedKFold, RepeatsDiffer) {
    const auto p = repeated_kfold(40, 4, 2, 5);
    std::vector<Split> first(p.splits.begin(), p.splits.begin() + 4), second(p.splits.begin() + 4, p.splits.end());
    EXPECT_NE(first, second);
}

TEST(GroupedKFold, OneGroupPerFold) {
    const std::vector<std::int64_t> g{1, 1, 2, 2, 3, 3};
    const auto p = grouped_kfold(g, 3, 7);
    ASSERT_EQ(p.size(), 3u);
    for (const auto& s : p.splits) {
        ASSERT_EQ(s.test.size(), 2u);
        EXPECT_EQ(g[s.test[0]], g[s.test[1]]);
        for (auto i : s.train) EXPECT_NE(g[i], g[s.test[0]]);
    }
}

TEST(GroupedKFold, WholeGroupsPerFold) {
    std::vector<std::int64_t> g;
    for (int grp = 0; grp < 10; ++grp)
        for (int r = 0; r < 3; ++r) g.push_back(grp);
    const auto p = grouped_kfold(g, 5, 11);
    for (const auto& s : p.splits) {
        EXPECT_EQ(s.test.size(), 6u);
        std::map<std::int64_t, int> c;
        for (auto i : s.test) ++c[g[i]];
        EXPECT_EQ(c.size(), 2u);
        for (auto [k, v] : c) EXPECT_EQ(v, 3);
    }
}

TEST(GroupedKFold, TooFewGroups) {
    const std::vector<std::int64_t> g{1, 1, 2, 2};
    EXPECT_THROW(grouped_kfold(g, 3, 0), Error);
}

TEST(StratifiedKFold, ForcedProportions) {
    const std::vector<int> y{0, 0, 0, 0, 1, 1};
    const auto p = stratified_kfold(y, 2, 3);
    for (const auto& s : p.splits) {
        const auto a = std::count_if(s.test.begin(), s.test.end(), [&](auto i) { return y[i] == 0; });
        EXPECT_EQ(a, 2);
        EXPECT_EQ(s.test.size(), 3u);
    }
}

TEST(StratifiedKFold, SingletonClassTestedOnce) {
    std::vector<int> y(20, 0);
    y[13] = 1;
    const auto p = stratified_kfold(y, 5, 8);
    int hits = 0;
    for (const auto& s : p.splits) hits += std::count(s.test.begin(), s.test.end(), std::size_t{13});
    EXPECT_EQ(hits, 1);
}

TEST(StratifiedKFold, RemainderBalancing) {
    const std::vector<int> y{4, 4, 4};
    EXPECT_EQ(sizes(stratified_kfold(y, 2, 1)), (std::vector<std::size_t>{1, 2}));
}

TEST(StratifiedKFold, SmallClassesSpreadAcrossFolds) {
    // Three classes of two rows with k = 5: each class lands in two distinct folds.
    std::vector<int> y(30, 0);
    for (int c = 1; c <= 3; ++c) y[static_cast<std::size_t>(c)] = y[static_cast<std::size_t>(c + 10)] = c;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto p = stratified_kfold(y, 5, seed);
        for (int c = 1; c <= 3; ++c) {
            int folds_with_c = 0;
            for (const auto& s : p.splits)
                folds_with_c += std::any_of(s.test.begin(), s.test.end(), [&](auto i) { return y[i] == c; });
            EXPECT_EQ(folds_with_c, 2);
        }
    }
}

TEST(SingleSpatialSplit, CleanSeparation) {
    const auto pts = line_points({0, 1, 2, 3});
    const auto p = single_spatial_split(pts, HalfPlane{1, 0, 1.5}, 0.0);
    ASSERT_EQ(p.size(), 1u);
    EXPECT_EQ(p.splits[0].train, idx({0, 1}));
    EXPECT_EQ(p.splits[0].test, idx({2, 3}));
}

TEST(SingleSpatialSplit, BufferDropsNearbyRows) {
    const auto p = single_spatial_split(line_points({0, 1, 2, 3}), HalfPlane{1, 0, 1.5}, 0.6);
    EXPECT_EQ(p.splits[0].train, idx({0}));
    EXPECT_EQ(p.splits[0].test, idx({2, 3}));
}

TEST(SingleSpatialSplit, BufferSwallowingTrainIsError) {
    EXPECT_THROW(single_spatial_split(line_points({0, 1, 2, 3}), HalfPlane{1, 0, 1.5}, 5.0), Error);
}

TEST(SingleSpatialSplit, Polygon) {
    Matrix pts{{0.5, 0.5}, {2, 2}, {1.2, 0.5}, {5, 5}, {1.0, 1.0}};
    Polygon sq{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
    const auto p = single_spatial_split(pts, sq, 0.5);
    EXPECT_EQ(p.splits[0].test, idx({0, 4}));  // the corner (1,1) is inside the closed polygon
    EXPECT_EQ(p.splits[0].train, idx({1, 3}));  // (1.2, 0.5) lies within the buffer
}

TEST(RectangularTiles, OnePointPerTile) {
    Matrix pts{{0.1, 0.1}, {0.9, 0.1}, {0.1, 0.9}, {0.9, 0.9}};
    const auto p = rectangular_tiles(pts, Grid{2, 2, std::array<double, 4>{0, 1, 0, 1}}, TileMode::one_block_per_fold, 0, 1);
    EXPECT_EQ(sizes(p), std::vector<std::size_t>(4, 1));
}

TEST(RectangularTiles, BlocksToFolds) {
    Matrix pts{{0.1, 0.1}, {0.9, 0.1}, {0.1, 0.9}, {0.9, 0.9}};
    const auto p = rectangular_tiles(pts, Grid{2, 2, std::array<double, 4>{0, 1, 0, 1}}, TileMode::blocks_to_k_folds, 2, 5);
    EXPECT_EQ(sizes(p), (std::vector<std::size_t>{2, 2}));
    EXPECT_NO_THROW(check_plan(p, 4));
}

TEST(RectangularTiles, GridLineGoesToLargerIndex) {
    // x = 0.5 is the interior line of a 1x2 grid: the point joins the right tile.
    Matrix pts{{0.5, 0.5}, {0.9, 0.5}, {0.1, 0.5}};
    const auto p = rectangular_tiles(pts, Grid{1, 2, std::array<double, 4>{0, 1, 0, 1}}, TileMode::one_block_per_fold, 0, 1);
    ASSERT_EQ(p.size(), 2u);
    bool together = false;
    for (const auto& s : p.splits)
        if (s.test == idx({0, 1})) together = true;
    EXPECT_TRUE(together);
}

TEST(ClusteredGroups, SeparatedClouds) {
    Rng rng(4);
    std::normal_distribution<double> z(0.0, 0.1);
    Matrix pts(40, 2);
    for (std::size_t i = 0; i < 40; ++i) {
        pts(i, 0) = z(rng) + (i < 20 ? 0.0 : 10.0);
        pts(i, 1) = z(rng);
    }
    const auto p = clustered_groups(pts, 2, 9);
    ASSERT_EQ(p.size(), 2u);
    for (const auto& s : p.splits) {
        ASSERT_EQ(s.test.size(), 20u);
        const bool left = s.test[0] < 20;
        for (auto i : s.test) EXPECT_EQ(i < 20, left);
    }
    EXPECT_TRUE(p == clustered_groups(pts, 2, 9));
}

TEST(ClusteredGroups, SingletonFolds) {
    Matrix pts{{0, 0}, {5, 0}, {0, 5}, {5, 5}};
    EXPECT_EQ(sizes(clustered_groups(pts, 4, 3)), std::vector<std::size_t>(4, 1));
}

TEST(KMeans, ObjectiveTraceNonIncreasing) {
    Rng rng(17);
    std::normal_distribution<double> z;
    Matrix x(200, 3);
    for (std::size_t i = 0; i < 200; ++i)
        for (std::size_t j = 0; j < 3; ++j) x(i, j) = z(rng) + static_cast<double>(i % 4) * 2.0;
    const auto r = kmeans(x, 4, 5);
    ASSERT_FALSE(r.objective_trace.empty());
    for (std::size_t t = 1; t < r.objective_trace.size(); ++t) EXPECT_LE(r.objective_trace[t], r.objective_trace[t - 1]);
    EXPECT_DOUBLE_EQ(r.objective_trace.back(), r.wcss);
}

TEST(KMeans, LabelsIndependentOfRowOrder) {
    Matrix a{{0, 0}, {0.1, 0}, {9, 9}, {9.1, 9}}, b{{9, 9}, {0, 0}, {9.1, 9}, {0.1, 0}};
    const auto ra = kmeans(a, 2, 1), rb = kmeans(b, 2, 1);
    // Point (0,0) sorts first lexicographically, so its cluster is 0 in both.
    EXPECT_EQ(ra.assignment[0], 0);
    EXPECT_EQ(rb.assignment[1], 0);
    EXPECT_EQ(rb.assignment[0], 1);
}

TEST(LooBuffer, DropsNeighbours) {
    const auto p = loo_buffer(line_points({0, 1, 2, 3}), 1.5);
    ASSERT_EQ(p.size(), 4u);
    EXPECT_EQ(p.splits[0].test, idx({0}));
    EXPECT_EQ(p.splits[0].train, idx({2, 3}));
}

TEST(LooBuffer, ZeroRadiusIsLeaveOneOut) {
    const auto p = loo_buffer(line_points({0, 1, 2, 3}), 0.0);
    for (const auto& s : p.splits) EXPECT_EQ(s.train.size(), 3u);
}

TEST(LooBuffer, RadiusBeyondDiameter) {
    EXPECT_THROW(loo_buffer(line_points({0, 1, 2, 3}), 3.0), Error);
}

TEST(LeaveOneDiscOut, NoBufferCoversAll) {
    Rng rng(2);
    Matrix pts(100, 2);
    for (std::size_t i = 0; i < 100; ++i) pts(i, 0) = uniform01(rng), pts(i, 1) = uniform01(rng);
    const auto p = leave_one_disc_out(pts, 5, 0.2, 0.0, 3);
    for (const auto& s : p.splits) EXPECT_EQ(s.train.size() + s.test.size(), 100u);
}

TEST(LeaveOneDiscOut, TrainBeyondBuffer) {
    Rng rng(6);
    Matrix pts(300, 2);
    for (std::size_t i = 0; i < 300; ++i) pts(i, 0) = uniform01(rng), pts(i, 1) = uniform01(rng);
    const double r = 0.15, b = 0.1;
    const auto p = leave_one_disc_out(pts, 6, r, b, 8);
    for (std::size_t j = 0; j < p.size(); ++j) {
        const auto& c = p.params.at("center" + std::to_string(j + 1));
        const auto comma = c.find(',');
        const Point centre{std::stod(c.substr(0, comma)), std::stod(c.substr(comma + 1))};
        for (auto i : p.splits[j].train) EXPECT_GT(std::hypot(pts(i, 0) - centre.x, pts(i, 1) - centre.y), r + b);
        for (auto i : p.splits[j].test) EXPECT_LE(std::hypot(pts(i, 0) - centre.x, pts(i, 1) - centre.y), r);
    }
}

TEST(LeaveOneDiscOut, TestSizeMatchesArea) {
    // Expected count per disc is n * |disc(c) cap box|; the clipped area is
    // integrated on a fine grid.
    Rng rng(10);
    const std::size_t n = 20000;
    Matrix pts(n, 2);
    for (std::size_t i = 0; i < n; ++i) pts(i, 0) = uniform01(rng), pts(i, 1) = uniform01(rng);
    const double r = 0.05;
    const auto p = leave_one_disc_out(pts, 30, r, 0.0, 21);
    double expected = 0.0, variance = 0.0, observed = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        const auto& c = p.params.at("center" + std::to_string(j + 1));
        const auto comma = c.find(',');
        const double cx = std::stod(c.substr(0, comma)), cy = std::stod(c.substr(comma + 1));
        const int g = 400;
        int inside = 0;
        for (int a = 0; a < g; ++a)
            for (int b = 0; b < g; ++b) {
                const double x = cx - r + 2 * r * (a + 0.5) / g, y = cy - r + 2 * r * (b + 0.5) / g;
                if (x >= 0 && x <= 1 && y >= 0 && y <= 1 && std::hypot(x - cx, y - cy) <= r) ++inside;
            }
        const double q = inside * (4 * r * r) / (g * g);
        expected += static_cast<double>(n) * q;
        variance += static_cast<double>(n) * q * (1 - q);
        observed += static_cast<double>(p.splits[j].test.size());
    }
    EXPECT_LT(std::abs(observed - expected), 3.0 * std::sqrt(variance));
}

TEST(GeoUnits, OneUnitPerFold) {
    std::vector<std::int64_t> u;
    for (int d = 0; d < 7; ++d)
        for (int r = 0; r < 4; ++r) u.push_back(d * 10);
    const auto p = geo_units(u, UnitMode::one_unit_per_fold, 0, 1);
    EXPECT_EQ(p.size(), 7u);
    EXPECT_NO_THROW(check_plan(p, u.size()));
}

TEST(GeoUnits, UnitsToFolds) {
    const std::vector<std::int64_t> u{1, 2, 3, 4, 1, 2, 3, 4};
    const auto p = geo_units(u, UnitMode::units_to_k_folds, 2, 3);
    ASSERT_EQ(p.size(), 2u);
    for (const auto& s : p.splits) {
        std::set<std::int64_t> units;
        for (auto i : s.test) units.insert(u[i]);
        EXPECT_EQ(units.size(), 2u);
    }
}

TEST(GeoUnits, SingleUnitIsError) {
    const std::vector<std::int64_t> u{5, 5, 5};
    EXPECT_THROW(geo_units(u, UnitMode::one_unit_per_fold, 0, 1), Error);
}

namespace {

std::vector<int> seasons(int s, int per) {
    std::vector<int> out;
    for (int k = 1; k <= s; ++k)
        for (int r = 0; r < per; ++r) out.push_back(k);
    return out;
}

std::set<int> seasons_of(const std::vector<std::size_t>& rows, const std::vector<int>& season) {
    std::set<int> out;
    for (auto i : rows) out.insert(season[i]);
    return out;
}

} // namespace

TEST(TimeSeriesCV, EightSeasons) {
    const auto s = seasons(8, 3);
    const auto p = timeseries_cv(s, 0);
    ASSERT_EQ(p.size(), 7u);
    EXPECT_EQ(seasons_of(p.splits.back().train, s), (std::set<int>{1, 2, 3, 4, 5, 6, 7}));
    EXPECT_EQ(seasons_of(p.splits.back().test, s), (std::set<int>{8}));
    EXPECT_EQ(seasons_of(p.splits.front().train, s), (std::set<int>{1}));
}

TEST(TimeSeriesCV, GapOfOne) {
    const auto s = seasons(8, 2);
    const auto p = timeseries_cv(s, 1);
    ASSERT_EQ(p.size(), 6u);
    EXPECT_EQ(seasons_of(p.splits.back().train, s), (std::set<int>{1, 2, 3, 4, 5, 6}));
    EXPECT_EQ(seasons_of(p.splits.back().test, s), (std::set<int>{8}));
}

TEST(TimeSeriesCV, TwoSeasonsIsOutOfSample) {
    const auto s = seasons(2, 4);
    EXPECT_EQ(timeseries_cv(s, 0).splits, out_of_sample(s, 1, 0).splits);
}

TEST(OutOfSample, FirstSevenSeasons) {
    const auto s = seasons(8, 2);
    const auto p = out_of_sample(s, 1, 0);
    ASSERT_EQ(p.size(), 1u);
    EXPECT_EQ(seasons_of(p.splits[0].train, s), (std::set<int>{1, 2, 3, 4, 5, 6, 7}));
    EXPECT_EQ(seasons_of(p.splits[0].test, s), (std::set<int>{8}));
}

TEST(OutOfSample, FirstSixSeasonsWithGap) {
    const auto s = seasons(8, 2);
    const auto p = out_of_sample(s, 1, 1);
    EXPECT_EQ(seasons_of(p.splits[0].train, s), (std::set<int>{1, 2, 3, 4, 5, 6}));
}

TEST(OutOfSample, NoTrainingSeasonLeft) {
    EXPECT_THROW(out_of_sample(seasons(3, 2), 2, 1), Error);
}

TEST(Holdout, FractionAndDisjointness) {
    const auto p = holdout(100, 0.25, 3);
    ASSERT_EQ(p.size(), 1u);
    EXPECT_EQ(p.splits[0].test.size(), 25u);
    EXPECT_EQ(p.splits[0].train.size(), 75u);
    EXPECT_NO_THROW(check_plan(p, 100));
    EXPECT_THROW(holdout(100, 1.0, 3), Error);
}

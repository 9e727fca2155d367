#include <gtest/gtest.h>

#include <memory>
#include <sstream>

#include "geest/dataset.hpp"
#include "geest/error.hpp"
#include "geest/plan.hpp"
#include "geest/splitters.hpp"

using namespace geest;

namespace {

Dataset small_dataset() {
    Dataset d;
    d.features = Matrix{{1.0, 0.1}, {2.0, 1.0 / 3.0}, {3.0, -1e-300}, {4.0, 5e10}};
    d.feature_names = {"a", "b"};
    d.y = {0.5, 1.0 / 7.0, -2.0, 3.25};
    d.cluster_id = std::vector<std::int64_t>{1, 1, 2, 2};
    d.coords = Matrix{{0, 0}, {1, 0}, {0, 1}, {1, 1}};
    d.inclusion_prob = std::vector<double>{0.1, 0.2, 0.3, 0.4};
    d.population_size = 40;
    d.time = std::vector<double>{0.0, 0.3, 0.6, 1.0};
    d.season = std::vector<int>{1, 4, 7, 10};
    return d;
}

} // namespace

TEST(Dataset, RoundTripIsExact) {
    const Dataset d = small_dataset();
    std::stringstream ss;
    write_dataset(ss, d);
    const Dataset back = read_dataset(ss);
    EXPECT_EQ(back.features, d.features);
    EXPECT_EQ(back.feature_names, d.feature_names);
    EXPECT_EQ(back.y, d.y);
    EXPECT_EQ(back.cluster_id, d.cluster_id);
    EXPECT_EQ(*back.coords, *d.coords);
    EXPECT_EQ(back.inclusion_prob, d.inclusion_prob);
    EXPECT_EQ(back.population_size, d.population_size);
    EXPECT_EQ(back.time, d.time);
    EXPECT_EQ(back.season, d.season);
}

TEST(Dataset, HierarchicalRoundTrip) {
    auto tree = std::make_shared<const CategoryTree>(CategoryTree::parse({"1.1", "1.2", "2"}));
    Dataset d;
    d.features = Matrix{{0.0}, {1.0}, {2.0}};
    d.label_kind = LabelKind::hierarchical;
    d.tree = tree;
    d.classes = {tree->find("1.2"), tree->find("2"), tree->find("1.1")};
    std::stringstream ss;
    write_dataset(ss, d);
    EXPECT_NE(ss.str().find("1.2"), std::string::npos);
    const Dataset back = read_dataset(ss, tree);
    EXPECT_EQ(back.classes, d.classes);
}

TEST(Dataset, SchemaReader) {
    std::istringstream in("id,x1,x2,target,grp\n7,1,2,0.5,3\n8,3,4,1.5,3\n9,5,6,2.5,4\n");
    Schema s;
    s.columns = {{"id", Role::ignore}, {"x1", Role::feature}, {"x2", Role::feature}, {"target", Role::label}, {"grp", Role::cluster}};
    const Dataset d = read_dataset(in, s);
    EXPECT_EQ(d.n(), 3u);
    EXPECT_EQ(d.p(), 2u);
    EXPECT_EQ(d.y[2], 2.5);
    EXPECT_EQ((*d.cluster_id)[2], 4);
}

TEST(Dataset, SchemaErrors) {
    Schema s;
    s.columns = {{"x1", Role::feature}, {"y", Role::label}};
    {
        std::istringstream in("x1,y,extra\n1,2,3\n");
        EXPECT_THROW(read_dataset(in, s), Error);  // unmapped column
    }
    {
        std::istringstream in("x1,y\n1,nan\n");
        EXPECT_THROW(read_dataset(in, s), Error);
    }
    {
        std::istringstream in("x1,y\n1\n");
        EXPECT_THROW(read_dataset(in, s), Error);
    }
    Schema no_label;
    no_label.columns = {{"x1", Role::feature}, {"y", Role::feature}};
    std::istringstream in("x1,y\n1,2\n");
    EXPECT_THROW(read_dataset(in, no_label), Error);
}

TEST(Dataset, ValidateCatchesBadMetadata) {
    Dataset d = small_dataset();
    d.inclusion_prob = std::vector<double>{0.1, 0.2, 1.5, 0.4};
    EXPECT_THROW(d.validate(), Error);
    d = small_dataset();
    d.cluster_id = std::vector<std::int64_t>{1, 2};
    EXPECT_THROW(d.validate(), Error);
    d = small_dataset();
    d.population_size = 2;  // sum of pi is 1.0 but N must cover the sample
    EXPECT_THROW(d.validate(), Error);
}

TEST(Dataset, SubsetKeepsMetadata) {
    const Dataset d = small_dataset();
    const std::vector<std::size_t> idx{3, 1};
    const Dataset s = subset(d, idx);
    EXPECT_EQ(s.n(), 2u);
    EXPECT_EQ(s.y, (std::vector<double>{3.25, 1.0 / 7.0}));
    EXPECT_EQ(*s.cluster_id, (std::vector<std::int64_t>{2, 1}));
    EXPECT_EQ((*s.coords)(0, 0), 1.0);
    EXPECT_EQ(s.population_size, d.population_size);
    const std::vector<std::size_t> bad{9};
    EXPECT_THROW(subset(d, bad), Error);
}

TEST(Dataset, SeasonOf) {
    EXPECT_EQ(season_of(0.0, 10), 1);
    EXPECT_EQ(season_of(0.0999, 10), 1);
    EXPECT_EQ(season_of(0.1, 10), 2);
    EXPECT_EQ(season_of(0.75, 10), 8);
    EXPECT_EQ(season_of(1.0, 10), 10);
}

TEST(Plan, TextRoundTrip) {
    const ResamplingPlan p = repeated_kfold(23, 4, 2, 99);
    std::stringstream ss;
    write_plan(ss, p);
    const ResamplingPlan back = read_plan(ss);
    EXPECT_TRUE(back == p);
    EXPECT_NE(ss.str().find("#plan scheme="), std::string::npos);
}

TEST(Plan, CheckPlanDetectsViolations) {
    ResamplingPlan p;
    p.n = 4;
    p.splits = {{{0, 1}, {1, 2}}};
    p.repeat = {0};
    EXPECT_THROW(check_plan(p, 4), Error);  // overlap
    p.splits = {{{0, 1}, {2, 9}}};
    EXPECT_THROW(check_plan(p, 4), Error);  // range
    p.splits = {{{0, 1}, {2, 3}}};
    EXPECT_NO_THROW(check_plan(p, 4));
    p.partition = true;
    p.splits = {{{0, 1}, {2}}};
    EXPECT_THROW(check_plan(p, 4), Error);  // row 3 never tested
}

TEST(Plan, MalformedTextIsRejected) {
    std::istringstream in("#plan scheme=kfold seed=1 n=4 partition=0\nsplit 1: train=0,1 test=x\n");
    EXPECT_THROW(read_plan(in), Error);
}

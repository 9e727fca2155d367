#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace geest {

/// One train/test split. Both index lists are sorted ascending.
struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;

    friend bool operator==(const Split&, const Split&) = default;
};

/// Ordered list of splits plus provenance.
struct ResamplingPlan {
    std::string scheme;
    /// Scheme parameters as printed in the plan header.
    std::map<std::string, std::string> params;
    std::uint64_t seed = 0;
    /// Row count of the dataset the plan was built for.
    std::size_t n = 0;
    std::vector<Split> splits;
    /// Repeat index of each split; within one repeat, partition-style schemes
    /// have pairwise disjoint test sets covering all usable rows.
    std::vector<int> repeat;
    /// Whether test sets of each repeat partition the usable rows.
    bool partition = false;

    std::size_t size() const noexcept { return splits.size(); }

    friend bool operator==(const ResamplingPlan&, const ResamplingPlan&) = default;
};

/// Text form:
///   #plan scheme=<name> seed=<seed> n=<n> partition=<0|1>
///   #param <key>=<value>
///   #repeat=<r,r,...>            (one repeat index per split)
///   split <j>: train=<i,i,...> test=<i,i,...>
/// with j counting from 1.
void write_plan(std::ostream& out, const ResamplingPlan& plan);
void write_plan(const std::string& path, const ResamplingPlan& plan);
ResamplingPlan read_plan(std::istream& in);
ResamplingPlan read_plan_file(const std::string& path);

/// Checks disjointness, nonemptiness, index range and (for partition plans)
/// per-repeat coverage of all n rows. Throws on the first violation.
void check_plan(const ResamplingPlan& plan, std::size_t n);

} // namespace geest

#pragma once

#include <cstdint>
#include <vector>

#include "geest/matrix.hpp"

namespace geest {

struct KMeansOptions {
    int max_iterations = 100;
    int restarts = 10;
    /// Extra rounds of restarts when every run ends with an empty cluster.
    int empty_retries = 10;
};

struct KMeansResult {
    /// Cluster of each row, 0..k-1. Clusters are numbered by first
    /// appearance in lexicographic row order, so labels do not depend on the
    /// order rows are supplied in.
    std::vector<int> assignment;
    Matrix centers;
    double wcss = 0.0;
    /// Within-cluster sum of squares after each assignment step of the
    /// winning run.
    std::vector<double> objective_trace;
    int iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding; keeps the restart with the
/// lowest within-cluster sum of squares.
KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, const KMeansOptions& options = {});

} // namespace geest

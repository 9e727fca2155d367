#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "geest/matrix.hpp"

namespace geest {

enum class ForestTask { regression, classification };

/// Zero means "use the default for the task": mtry = max(1, p/3) for
/// regression and floor(sqrt(p)) for classification; min_node_size = 5 for
/// regression and 1 for classification.
struct ForestParams {
    int n_trees = 500;
    int mtry = 0;
    int min_node_size = 0;
    bool bootstrap = true;
};

/// Random forest of CART trees. Each tree is grown on a bootstrap sample,
/// trying `mtry` random features per node; regression splits maximise the
/// variance reduction, classification splits the Gini decrease. A node is
/// split only while it holds more than `min_node_size` samples and is not
/// pure.
class Forest {
public:
    static Forest fit_regression(const Matrix& x, std::span<const double> y, const ForestParams& params,
                                 std::uint64_t seed);
    static Forest fit_classification(const Matrix& x, std::span<const int> classes, int n_classes,
                                     const ForestParams& params, std::uint64_t seed);

    ForestTask task() const noexcept { return task_; }
    int n_classes() const noexcept { return n_classes_; }
    std::size_t n_features() const noexcept { return n_features_; }
    std::size_t n_trees() const noexcept { return trees_.size(); }
    const ForestParams& params() const noexcept { return params_; }

    /// Mean of tree predictions (regression).
    std::vector<double> predict(const Matrix& x) const;
    double predict_row(std::span<const double> x) const;

    /// Averaged per-tree leaf class frequencies; rows sum to one.
    Matrix predict_proba(const Matrix& x) const;
    void predict_proba_row(std::span<const double> x, std::span<double> out) const;
    /// Argmax of predict_proba (ties go to the smaller class index).
    std::vector<int> predict_class(const Matrix& x) const;

    /// Total number of nodes over all trees.
    std::size_t node_count() const;
    /// Whether every internal node has two children and leaf values are finite.
    bool well_formed() const;

private:
    struct Node {
        int feature = -1;  // -1 marks a leaf
        int left = 0;      // right child is left + 1; for leaves, offset into leaf_values
        double value = 0.0;  // split threshold, or leaf mean for regression
    };
    struct Tree {
        std::vector<Node> nodes;
        std::vector<double> leaf_values;  // class frequencies for classification
    };

    const Node& leaf_for(const Tree& t, std::span<const double> x) const;
    void check_width(std::size_t cols) const;

    friend class ForestBuilder;

    ForestTask task_ = ForestTask::regression;
    int n_classes_ = 0;
    std::size_t n_features_ = 0;
    ForestParams params_;
    std::vector<Tree> trees_;
};

/// Resolved defaults for a task and feature count.
ForestParams resolve_params(const ForestParams& params, ForestTask task, std::size_t p);

} // namespace geest

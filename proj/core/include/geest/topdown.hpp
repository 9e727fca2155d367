#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "geest/forest.hpp"
#include "geest/hierarchy.hpp"
#include "geest/matrix.hpp"

namespace geest {

/// Internal nodes that got no local forest.
struct TopDownFitReport {
    /// No training row passed through; children get equal probability.
    std::vector<NodeId> unseen_nodes;
    /// Rows passed through but all took the same child.
    std::vector<NodeId> single_child_nodes;
};

/// Top-down hierarchical classifier: one local multi-class forest per
/// internal node, choosing among that node's children. Prediction descends
/// from the root along the most probable child, so every prediction is a
/// leaf.
class TopDownClassifier {
public:
    static TopDownClassifier fit(const Matrix& x, std::span<const NodeId> leaf_labels,
                                 std::shared_ptr<const CategoryTree> tree, const ForestParams& params,
                                 std::uint64_t seed);

    /// Predicted leaf per row. Equal child probabilities go to the child
    /// with the smaller label.
    std::vector<NodeId> predict(const Matrix& x) const;

    /// n x leaves() matrix; entry = product of local child probabilities
    /// along the root-to-leaf path.
    Matrix predict_leaf_probs(const Matrix& x) const;

    /// Probabilities of the children of `node` for one row, in children()
    /// order.
    std::vector<double> child_probs(NodeId node, std::span<const double> x) const;

    const CategoryTree& tree() const noexcept { return *tree_; }
    const std::shared_ptr<const CategoryTree>& tree_ptr() const noexcept { return tree_; }
    const TopDownFitReport& report() const noexcept { return report_; }
    /// Whether `node` carries a fitted local forest.
    bool has_model(NodeId node) const;

private:
    struct NodeModel {
        /// Fitted over the observed children only; `observed[c]` is the
        /// position in children() of local class c.
        std::optional<Forest> forest;
        std::vector<int> observed;
        /// Used when there is no forest.
        std::vector<double> fixed;
    };

    void fill_child_probs(const NodeModel& m, std::span<const double> x, std::span<double> out,
                          std::vector<double>& scratch) const;

    std::shared_ptr<const CategoryTree> tree_;
    std::size_t n_features_ = 0;
    /// Indexed by node id; empty for leaves.
    std::vector<NodeModel> models_;
    TopDownFitReport report_;
};

} // namespace geest

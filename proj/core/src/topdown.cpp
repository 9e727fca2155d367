#include "geest/topdown.hpp"

#include <algorithm>

#include "geest/error.hpp"
#include "geest/rng.hpp"

namespace geest {

TopDownClassifier TopDownClassifier::fit(const Matrix& x, std::span<const NodeId> leaf_labels,
                                         std::shared_ptr<const CategoryTree> tree, const ForestParams& params,
                                         std::uint64_t seed) {
    if (!tree) throw Error("top-down classifier needs a category tree");
    if (leaf_labels.size() != x.rows()) throw Error("top-down: label length does not match row count");
    if (x.rows() < 1) throw Error("top-down: no training rows");
    for (NodeId l : leaf_labels)
        if (!tree->contains(l) || !tree->is_leaf(l) || l == CategoryTree::root)
            throw Error("top-down: training label is not a leaf of the tree");

    TopDownClassifier td;
    td.tree_ = tree;
    td.n_features_ = x.cols();
    td.models_.resize(tree->size());

    // rows_at[node] lists the rows whose true path passes through node.
    std::vector<std::vector<std::size_t>> rows_at(tree->size());
    for (std::size_t i = 0; i < leaf_labels.size(); ++i) {
        for (NodeId n = leaf_labels[i]; n != CategoryTree::root; n = tree->parent(n)) rows_at[static_cast<std::size_t>(n)].push_back(i);
        rows_at[0].push_back(i);
    }
    for (auto& r : rows_at) std::sort(r.begin(), r.end());

    for (NodeId node : tree->internal_nodes()) {
        const auto& kids = tree->children(node);
        auto& model = td.models_[static_cast<std::size_t>(node)];
        const auto& rows = rows_at[static_cast<std::size_t>(node)];
        if (rows.empty()) {
            model.fixed.assign(kids.size(), 1.0 / static_cast<double>(kids.size()));
            if (kids.size() > 1) td.report_.unseen_nodes.push_back(node);
            continue;
        }
        // Child position taken by each row at this node.
        std::vector<int> taken(rows.size());
        std::vector<char> seen(kids.size(), 0);
        const int level = tree->depth(node) + 1;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            NodeId child = tree->ancestor_at(leaf_labels[rows[r]], level);
            taken[r] = static_cast<int>(std::find(kids.begin(), kids.end(), child) - kids.begin());
            seen[static_cast<std::size_t>(taken[r])] = 1;
        }
        for (std::size_t c = 0; c < kids.size(); ++c)
            if (seen[c]) model.observed.push_back(static_cast<int>(c));
        if (model.observed.size() == 1) {
            model.fixed.assign(kids.size(), 0.0);
            model.fixed[static_cast<std::size_t>(model.observed[0])] = 1.0;
            if (kids.size() > 1) td.report_.single_child_nodes.push_back(node);
            continue;
        }
        std::vector<int> local(kids.size(), -1);
        for (std::size_t c = 0; c < model.observed.size(); ++c) local[static_cast<std::size_t>(model.observed[c])] = static_cast<int>(c);
        std::vector<int> classes(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) classes[r] = local[static_cast<std::size_t>(taken[r])];
        model.forest = Forest::fit_classification(x.select_rows(rows), classes, static_cast<int>(model.observed.size()),
                                                  params, derive_seed(seed, static_cast<std::uint64_t>(node)));
    }
    return td;
}

bool TopDownClassifier::has_model(NodeId node) const {
    return tree_->contains(node) && models_[static_cast<std::size_t>(node)].forest.has_value();
}

void TopDownClassifier::fill_child_probs(const NodeModel& m, std::span<const double> x, std::span<double> out,
                                         std::vector<double>& scratch) const {
    if (!m.forest) {
        std::copy(m.fixed.begin(), m.fixed.end(), out.begin());
        return;
    }
    scratch.resize(m.observed.size());
    m.forest->predict_proba_row(x, scratch);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t c = 0; c < m.observed.size(); ++c) out[static_cast<std::size_t>(m.observed[c])] = scratch[c];
}

std::vector<double> TopDownClassifier::child_probs(NodeId node, std::span<const double> x) const {
    if (x.size() != n_features_)
        throw Error("top-down classifier expects " + std::to_string(n_features_) + " features, got " +
                    std::to_string(x.size()));
    if (!tree_->contains(node) || tree_->is_leaf(node)) throw Error("child_probs needs an internal node");
    std::vector<double> out(tree_->children(node).size()), scratch;
    fill_child_probs(models_[static_cast<std::size_t>(node)], x, out, scratch);
    return out;
}

std::vector<NodeId> TopDownClassifier::predict(const Matrix& x) const {
    if (x.cols() != n_features_)
        throw Error("top-down classifier expects " + std::to_string(n_features_) + " features, got " +
                    std::to_string(x.cols()));
    std::vector<NodeId> out(x.rows());
    std::vector<double> probs, scratch;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        NodeId node = CategoryTree::root;
        while (!tree_->is_leaf(node)) {
            const auto& kids = tree_->children(node);
            probs.resize(kids.size());
            fill_child_probs(models_[static_cast<std::size_t>(node)], x.row(i), probs, scratch);
            // max_element keeps the first maximum, i.e. the smaller label.
            node = kids[static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin())];
        }
        out[i] = node;
    }
    return out;
}

Matrix TopDownClassifier::predict_leaf_probs(const Matrix& x) const {
    if (x.cols() != n_features_)
        throw Error("top-down classifier expects " + std::to_string(n_features_) + " features, got " +
                    std::to_string(x.cols()));
    const auto& leaves = tree_->leaves();
    Matrix out(x.rows(), leaves.size());
    std::vector<double> path_prob(tree_->size());
    std::vector<double> probs, scratch;
    const auto order = tree_->internal_nodes();  // parents before children
    for (std::size_t i = 0; i < x.rows(); ++i) {
        path_prob[0] = 1.0;
        for (NodeId node : order) {
            const auto& kids = tree_->children(node);
            const double base = path_prob[static_cast<std::size_t>(node)];
            if (base == 0.0) {
                for (NodeId k : kids) path_prob[static_cast<std::size_t>(k)] = 0.0;
                continue;
            }
            probs.resize(kids.size());
            fill_child_probs(models_[static_cast<std::size_t>(node)], x.row(i), probs, scratch);
            for (std::size_t c = 0; c < kids.size(); ++c) path_prob[static_cast<std::size_t>(kids[c])] = base * probs[c];
        }
        for (std::size_t l = 0; l < leaves.size(); ++l) out(i, l) = path_prob[static_cast<std::size_t>(leaves[l])];
    }
    return out;
}

} // namespace geest

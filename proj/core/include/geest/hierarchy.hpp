#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace geest {

using NodeId = int;

/// Class node plus all its ancestors, root excluded, ordered from the most
/// general (level 1) to the node itself.
using AugmentedLabel = std::vector<NodeId>;

/// Rooted tree of classes. Node 0 is a synthetic root that carries no class;
/// every other node is named by its dotted path ("2.2.1"). Children are kept
/// sorted by label so "smallest canonical label" tie-breaks are index order.
class CategoryTree {
public:
    static constexpr NodeId root = 0;

    CategoryTree();

    /// Builds the prefix closure of dotted labels. With `leaf_only`, a label
    /// that is also a proper prefix of another label is rejected.
    static CategoryTree parse(const std::vector<std::string>& labels, bool leaf_only = false);
    static CategoryTree read(std::istream& in);
    static CategoryTree read_file(const std::string& path);
    void write(std::ostream& out) const;

    std::size_t size() const noexcept { return labels_.size(); }
    const std::string& label(NodeId n) const { return labels_.at(static_cast<std::size_t>(n)); }
    NodeId parent(NodeId n) const { return parent_.at(static_cast<std::size_t>(n)); }
    int depth(NodeId n) const { return depth_.at(static_cast<std::size_t>(n)); }
    const std::vector<NodeId>& children(NodeId n) const { return children_.at(static_cast<std::size_t>(n)); }
    bool is_leaf(NodeId n) const { return children(n).empty(); }
    bool contains(NodeId n) const noexcept { return n >= 0 && static_cast<std::size_t>(n) < labels_.size(); }

    /// Throws if the label is not a node.
    NodeId find(std::string_view label) const;
    /// Returns -1 if absent.
    NodeId try_find(std::string_view label) const;

    /// Leaves in label order.
    const std::vector<NodeId>& leaves() const noexcept { return leaves_; }
    /// Position of a leaf within leaves(), or -1 for internal nodes.
    int leaf_index(NodeId n) const { return leaf_index_.at(static_cast<std::size_t>(n)); }
    /// Internal nodes including the root, in breadth-first order.
    std::vector<NodeId> internal_nodes() const;
    int height() const noexcept { return height_; }

    AugmentedLabel augment(NodeId n) const;
    std::size_t path_edges(NodeId a, NodeId b) const;
    NodeId lowest_common_ancestor(NodeId a, NodeId b) const;
    /// Ancestor of `n` at `level` (1..depth(n)).
    NodeId ancestor_at(NodeId n, int level) const;
    /// Whether `anc` is `n` or one of its ancestors.
    bool is_ancestor_or_self(NodeId anc, NodeId n) const;

    /// Adds a child under `parent` and returns its id. Used by builders; keeps
    /// label order among siblings.
    NodeId add_child(NodeId parent, std::string label);

    /// Same node labels with the same parent relation (node ids may differ).
    friend bool operator==(const CategoryTree& a, const CategoryTree& b);

private:
    void check(NodeId n) const;
    void finalize();

    std::vector<std::string> labels_;
    std::vector<NodeId> parent_;
    std::vector<int> depth_;
    std::vector<std::vector<NodeId>> children_;
    std::unordered_map<std::string, NodeId> by_label_;
    std::vector<NodeId> leaves_;
    std::vector<int> leaf_index_;
    int height_ = 0;
};

} // namespace geest

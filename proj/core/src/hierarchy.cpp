#include "geest/hierarchy.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "geest/error.hpp"

namespace geest {

namespace {

std::vector<std::string> split_dotted(const std::string& label) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        auto pos = label.find('.', start);
        auto part = label.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
        if (part.empty()) throw Error("malformed category label '" + label + "'");
        parts.push_back(std::move(part));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return parts;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

CategoryTree::CategoryTree() {
    labels_.emplace_back();
    parent_.push_back(-1);
    depth_.push_back(0);
    children_.emplace_back();
    finalize();
}

CategoryTree CategoryTree::parse(const std::vector<std::string>& labels, bool leaf_only) {
    if (labels.empty()) throw Error("category tree needs at least one label");
    std::set<std::string> given;
    for (const auto& raw : labels) {
        auto l = trim(raw);
        if (l.empty()) throw Error("empty category label");
        given.insert(l);
    }

    CategoryTree tree;
    // std::set iterates in label order, so prefixes are created before their
    // extensions and node ids are independent of the input order.
    for (const auto& label : given) {
        auto parts = split_dotted(label);
        NodeId cur = root;
        std::string prefix;
        for (const auto& part : parts) {
            prefix = prefix.empty() ? part : prefix + "." + part;
            NodeId next = tree.try_find(prefix);
            if (next < 0) next = tree.add_child(cur, prefix);
            cur = next;
        }
    }
    if (leaf_only) {
        for (const auto& label : given) {
            if (!tree.is_leaf(tree.find(label)))
                throw Error("label '" + label + "' is declared as a leaf but is also an internal node");
        }
    }
    return tree;
}

CategoryTree CategoryTree::read(std::istream& in) {
    std::vector<std::string> labels;
    std::string line;
    while (std::getline(in, line)) {
        auto l = trim(line);
        if (!l.empty() && l.front() != '#') labels.push_back(l);
    }
    return parse(labels);
}

CategoryTree CategoryTree::read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open tree file '" + path + "'");
    return read(in);
}

void CategoryTree::write(std::ostream& out) const {
    for (NodeId leaf : leaves_) out << label(leaf) << '\n';
}

NodeId CategoryTree::add_child(NodeId parent, std::string label) {
    check(parent);
    if (by_label_.contains(label)) throw Error("duplicate category label '" + label + "'");
    auto id = static_cast<NodeId>(labels_.size());
    labels_.push_back(std::move(label));
    parent_.push_back(parent);
    depth_.push_back(depth_[static_cast<std::size_t>(parent)] + 1);
    children_.emplace_back();
    auto& sib = children_[static_cast<std::size_t>(parent)];
    auto pos = std::lower_bound(sib.begin(), sib.end(), id,
                                [&](NodeId a, NodeId b) { return labels_[a] < labels_[b]; });
    sib.insert(pos, id);
    by_label_.emplace(labels_.back(), id);
    finalize();
    return id;
}

void CategoryTree::finalize() {
    by_label_.clear();
    for (std::size_t i = 1; i < labels_.size(); ++i) by_label_.emplace(labels_[i], static_cast<NodeId>(i));
    leaves_.clear();
    leaf_index_.assign(labels_.size(), -1);
    height_ = 0;
    for (std::size_t i = 1; i < labels_.size(); ++i) {
        if (children_[i].empty()) leaves_.push_back(static_cast<NodeId>(i));
        height_ = std::max(height_, depth_[i]);
    }
    std::sort(leaves_.begin(), leaves_.end(), [&](NodeId a, NodeId b) { return labels_[a] < labels_[b]; });
    for (std::size_t k = 0; k < leaves_.size(); ++k) leaf_index_[static_cast<std::size_t>(leaves_[k])] = static_cast<int>(k);
}

void CategoryTree::check(NodeId n) const {
    if (!contains(n)) throw Error("unknown category node id " + std::to_string(n));
}

NodeId CategoryTree::find(std::string_view label) const {
    NodeId n = try_find(label);
    if (n < 0) throw Error("unknown category '" + std::string(label) + "'");
    return n;
}

NodeId CategoryTree::try_find(std::string_view label) const {
    auto it = by_label_.find(std::string(label));
    return it == by_label_.end() ? -1 : it->second;
}

std::vector<NodeId> CategoryTree::internal_nodes() const {
    std::vector<NodeId> out;
    std::deque<NodeId> queue{root};
    while (!queue.empty()) {
        NodeId n = queue.front();
        queue.pop_front();
        if (is_leaf(n)) continue;
        out.push_back(n);
        for (NodeId c : children(n)) queue.push_back(c);
    }
    return out;
}

AugmentedLabel CategoryTree::augment(NodeId n) const {
    check(n);
    if (n == root) throw Error("the root carries no class and has no augmented label");
    AugmentedLabel out(static_cast<std::size_t>(depth(n)));
    for (NodeId cur = n; cur != root; cur = parent(cur)) out[static_cast<std::size_t>(depth(cur) - 1)] = cur;
    return out;
}

NodeId CategoryTree::lowest_common_ancestor(NodeId a, NodeId b) const {
    check(a);
    check(b);
    while (depth(a) > depth(b)) a = parent(a);
    while (depth(b) > depth(a)) b = parent(b);
    while (a != b) {
        a = parent(a);
        b = parent(b);
    }
    return a;
}

std::size_t CategoryTree::path_edges(NodeId a, NodeId b) const {
    NodeId lca = lowest_common_ancestor(a, b);
    return static_cast<std::size_t>(depth(a) + depth(b) - 2 * depth(lca));
}

NodeId CategoryTree::ancestor_at(NodeId n, int level) const {
    check(n);
    if (level < 1 || level > depth(n)) throw Error("level out of range for node '" + label(n) + "'");
    while (depth(n) > level) n = parent(n);
    return n;
}

bool CategoryTree::is_ancestor_or_self(NodeId anc, NodeId n) const {
    check(anc);
    check(n);
    while (depth(n) > depth(anc)) n = parent(n);
    return n == anc;
}

bool operator==(const CategoryTree& a, const CategoryTree& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 1; i < a.size(); ++i) {
        auto n = static_cast<NodeId>(i);
        NodeId m = b.try_find(a.label(n));
        if (m < 0) return false;
        if (a.label(a.parent(n)) != b.label(b.parent(m))) return false;
    }
    return true;
}

} // namespace geest

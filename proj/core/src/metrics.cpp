#include "geest/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "geest/error.hpp"

namespace geest {
namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
    if (a != b)
        throw Error(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
    if (a == 0) throw Error(std::string(what) + ": empty input");
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

MetricResult pointwise(std::string name, std::vector<double> per_obs) {
    MetricResult r;
    r.value = mean_of(per_obs);
    r.per_observation = std::move(per_obs);
    r.name = std::move(name);
    return r;
}

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

void check_nodes(const CategoryTree& tree, std::span<const NodeId> y, std::span<const NodeId> yhat, const char* what) {
    check_lengths(y.size(), yhat.size(), what);
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!tree.contains(y[i]) || y[i] == CategoryTree::root)
            throw Error(std::string(what) + ": true label is not a class node");
        if (!tree.contains(yhat[i]) || yhat[i] == CategoryTree::root)
            throw Error(std::string(what) + ": prediction is the root or unknown");
    }
}

// |A(y) ∩ A(yhat)| equals the depth of the lowest common ancestor.
std::size_t shared(const CategoryTree& tree, NodeId a, NodeId b) {
    return static_cast<std::size_t>(tree.depth(tree.lowest_common_ancestor(a, b)));
}

std::string join(std::span<const double> v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ';';
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v[i]);
        s += buf;
    }
    return s;
}

} // namespace

void SamplingDesign::validate() const {
    for (double p : pi)
        if (!(p > 0.0 && p <= 1.0) || !std::isfinite(p)) throw Error("inclusion probability out of range");
    if (population_size < static_cast<std::int64_t>(pi.size()))
        throw Error("population size " + std::to_string(population_size) + " is smaller than the sample size " +
                    std::to_string(pi.size()));
}

MetricResult mse(std::span<const double> y, std::span<const double> yhat) {
    check_lengths(y.size(), yhat.size(), "mse");
    std::vector<double> sq(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) sq[i] = (y[i] - yhat[i]) * (y[i] - yhat[i]);
    return pointwise("mse", std::move(sq));
}

MetricResult ht_loss(std::span<const double> losses, const SamplingDesign& design) {
    check_lengths(losses.size(), design.pi.size(), "ht_loss");
    design.validate();
    double total = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) total += losses[i] / design.pi[i];
    MetricResult r;
    r.value = total / static_cast<double>(design.population_size);
    r.name = "ht";
    r.params["N"] = std::to_string(design.population_size);
    return r;
}

MetricResult hajek_loss(std::span<const double> losses, const SamplingDesign& design) {
    check_lengths(losses.size(), design.pi.size(), "hajek_loss");
    design.validate();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        num += losses[i] / design.pi[i];
        den += 1.0 / design.pi[i];
    }
    MetricResult r;
    r.value = num / den;
    r.name = "hajek";
    return r;
}

PrecisionRecall flat_prf(std::span<const int> y, std::span<const int> yhat, Averaging averaging) {
    check_lengths(y.size(), yhat.size(), "flat_prf");
    PrecisionRecall out;
    if (averaging == Averaging::micro) {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < y.size(); ++i) hits += y[i] == yhat[i];
        out.precision = out.recall = static_cast<double>(hits) / static_cast<double>(y.size());
    } else {
        std::map<int, std::size_t> tp, predicted, actual;
        for (std::size_t i = 0; i < y.size(); ++i) {
            ++predicted[yhat[i]];
            ++actual[y[i]];
            if (y[i] == yhat[i]) ++tp[y[i]];
        }
        for (auto [c, cnt] : predicted) out.precision += static_cast<double>(tp[c]) / static_cast<double>(cnt);
        for (auto [c, cnt] : actual) out.recall += static_cast<double>(tp[c]) / static_cast<double>(cnt);
        out.precision /= static_cast<double>(predicted.size());
        out.recall /= static_cast<double>(actual.size());
    }
    out.f1 = harmonic(out.precision, out.recall);
    return out;
}

MetricResult accuracy(std::span<const int> y, std::span<const int> yhat) {
    check_lengths(y.size(), yhat.size(), "accuracy");
    std::vector<double> hit(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) hit[i] = y[i] == yhat[i] ? 1.0 : 0.0;
    return pointwise("accuracy", std::move(hit));
}

PrecisionRecall hier_prf(const CategoryTree& tree, std::span<const NodeId> y, std::span<const NodeId> yhat,
                         Averaging averaging) {
    check_nodes(tree, y, yhat, "hier_prf");
    PrecisionRecall out;
    if (averaging == Averaging::micro) {
        double inter = 0.0, pred = 0.0, truth = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            inter += static_cast<double>(shared(tree, y[i], yhat[i]));
            pred += tree.depth(yhat[i]);
            truth += tree.depth(y[i]);
        }
        out.precision = inter / pred;
        out.recall = inter / truth;
    } else {
        // Per class: summed intersections and summed set sizes.
        std::map<NodeId, std::pair<double, double>> by_pred, by_true;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const auto s = static_cast<double>(shared(tree, y[i], yhat[i]));
            auto& p = by_pred[yhat[i]];
            p.first += s;
            p.second += tree.depth(yhat[i]);
            auto& t = by_true[y[i]];
            t.first += s;
            t.second += tree.depth(y[i]);
        }
        for (const auto& [c, v] : by_pred) out.precision += v.first / v.second;
        for (const auto& [c, v] : by_true) out.recall += v.first / v.second;
        out.precision /= static_cast<double>(by_pred.size());
        out.recall /= static_cast<double>(by_true.size());
    }
    out.f1 = harmonic(out.precision, out.recall);
    return out;
}

MetricResult sym_diff_loss(const CategoryTree& tree, std::span<const NodeId> y, std::span<const NodeId> yhat) {
    check_nodes(tree, y, yhat, "sym_diff_loss");
    std::vector<double> loss(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const auto a = tree.augment(y[i]);
        const auto b = tree.augment(yhat[i]);
        std::size_t common = 0;
        for (NodeId n : a) common += std::find(b.begin(), b.end(), n) != b.end();
        loss[i] = static_cast<double>(a.size() + b.size() - 2 * common);
    }
    return pointwise("sym_diff", std::move(loss));
}

MetricResult shortest_path_loss(const CategoryTree& tree, std::span<const NodeId> y, std::span<const NodeId> yhat,
                                const std::optional<std::vector<double>>& level_weights) {
    check_nodes(tree, y, yhat, "shortest_path_loss");
    if (level_weights) {
        const auto& w = *level_weights;
        if (w.size() != static_cast<std::size_t>(tree.height()))
            throw Error("level weights need one entry per tree level (" + std::to_string(tree.height()) + "), got " +
                        std::to_string(w.size()));
        for (std::size_t l = 0; l < w.size(); ++l) {
            if (!(w[l] > 0.0) || !std::isfinite(w[l])) throw Error("level weights must be positive");
            if (l > 0 && w[l] > w[l - 1]) throw Error("level weights must not increase with depth");
        }
    }
    std::vector<double> loss(y.size(), 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const int lca_depth = tree.depth(tree.lowest_common_ancestor(y[i], yhat[i]));
        for (NodeId end : {y[i], yhat[i]})
            for (int l = lca_depth + 1; l <= tree.depth(end); ++l)
                loss[i] += level_weights ? (*level_weights)[static_cast<std::size_t>(l - 1)] : 1.0;
    }
    auto r = pointwise(level_weights ? "weighted_shortest_path" : "shortest_path", std::move(loss));
    if (level_weights) r.params["level_weights"] = join(*level_weights);
    return r;
}

MetricResult h_loss(const CategoryTree& tree, std::span<const NodeId> y, std::span<const NodeId> yhat,
                    std::span<const double> costs) {
    check_nodes(tree, y, yhat, "h_loss");
    for (std::size_t l = 0; l < costs.size(); ++l) {
        if (!(costs[l] > 0.0) || !std::isfinite(costs[l])) throw Error("h_loss costs must be positive");
        if (l > 0 && !(costs[l] < costs[l - 1])) throw Error("h_loss costs must be strictly decreasing");
    }
    std::vector<double> loss(y.size(), 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const int depth = tree.depth(yhat[i]);
        if (static_cast<std::size_t>(depth) > costs.size())
            throw Error("h_loss needs a cost for every level up to " + std::to_string(depth));
        const int agree = tree.depth(tree.lowest_common_ancestor(y[i], yhat[i]));
        if (agree < depth) loss[i] = costs[static_cast<std::size_t>(agree)];
    }
    auto r = pointwise("h_loss", std::move(loss));
    r.params["costs"] = join(costs);
    return r;
}

MetricResult win_score(const CategoryTree& tree, std::span<const NodeId> y, const Matrix& leaf_probs) {
    const auto& leaves = tree.leaves();
    check_lengths(y.size(), leaf_probs.rows(), "win_score");
    if (leaf_probs.cols() != leaves.size())
        throw Error("win_score: probability matrix has " + std::to_string(leaf_probs.cols()) + " columns for " +
                    std::to_string(leaves.size()) + " leaves");
    const auto order = tree.internal_nodes();
    std::vector<double> node_prob(tree.size());
    std::vector<double> win(y.size(), 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!tree.contains(y[i]) || !tree.is_leaf(y[i]) || y[i] == CategoryTree::root)
            throw Error("win_score: true label is not a leaf");
        std::fill(node_prob.begin(), node_prob.end(), 0.0);
        double total = 0.0;
        for (std::size_t l = 0; l < leaves.size(); ++l) {
            const double p = leaf_probs(i, l);
            if (!(p >= 0.0) || !std::isfinite(p)) throw Error("win_score: invalid probability");
            node_prob[static_cast<std::size_t>(leaves[l])] = p;
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-9) throw Error("win_score: probability row does not sum to one");
        for (auto it = order.rbegin(); it != order.rend(); ++it)
            for (NodeId c : tree.children(*it)) node_prob[static_cast<std::size_t>(*it)] += node_prob[static_cast<std::size_t>(c)];

        const auto path = tree.augment(y[i]);
        NodeId parent = CategoryTree::root;
        double w = 0.0, scale = 1.0, last = 0.0;
        bool all_correct = true;
        for (NodeId node : path) {
            const auto& kids = tree.children(parent);
            NodeId best = kids[0];
            for (NodeId k : kids)
                if (node_prob[static_cast<std::size_t>(k)] > node_prob[static_cast<std::size_t>(best)]) best = k;
            if (best != node) {
                all_correct = false;
                break;
            }
            scale *= 0.5;
            last = scale * node_prob[static_cast<std::size_t>(node)];
            w += last;
            parent = node;
        }
        if (all_correct) w += last;
        win[i] = w;
    }
    return pointwise("win", std::move(win));
}

MetricResult aggregate_plan(std::span<const double> per_split_values) {
    if (per_split_values.empty()) throw Error("aggregate_plan: no split values");
    std::vector<double> v(per_split_values.begin(), per_split_values.end());
    MetricResult r;
    r.value = mean_of(v);
    r.per_observation = std::move(v);
    r.name = "plan_mean";
    r.params["B"] = std::to_string(per_split_values.size());
    return r;
}

std::vector<double> default_level_weights(const CategoryTree& tree) {
    std::vector<double> w(static_cast<std::size_t>(tree.height()));
    for (std::size_t l = 0; l < w.size(); ++l) w[l] = std::ldexp(1.0, -static_cast<int>(l));
    return w;
}

} // namespace geest

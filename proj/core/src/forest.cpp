#include "geest/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "geest/error.hpp"
#include "geest/rng.hpp"

namespace geest {

ForestParams resolve_params(const ForestParams& params, ForestTask task, std::size_t p) {
    if (params.n_trees < 1) throw Error("forest needs n_trees >= 1");
    if (params.mtry < 0 || params.min_node_size < 0) throw Error("forest parameters must be non-negative");
    ForestParams out = params;
    const auto pi = static_cast<int>(p);
    if (out.mtry == 0) {
        out.mtry = task == ForestTask::regression ? std::max(1, pi / 3)
                                                  : std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(p)))));
    }
    if (out.min_node_size == 0) out.min_node_size = task == ForestTask::regression ? 5 : 1;
    if (out.mtry > pi) throw Error("forest mtry " + std::to_string(out.mtry) + " exceeds feature count " + std::to_string(p));
    return out;
}

// Each tree keeps, per feature, the bootstrap sample ordered by that
// feature. A node owns the same index range [begin, end) in every ordering,
// so split search is a linear scan and a split is a stable partition.
class ForestBuilder {
public:
    ForestBuilder(const Matrix& x, ForestTask task, std::span<const double> y, std::span<const int> cls, int n_classes,
                  const ForestParams& params)
        : n_(x.rows()), p_(x.cols()), task_(task), y_(y), cls_(cls), n_classes_(n_classes), params_(params),
          cols_(x.rows() * x.cols()), sorted_rows_(x.rows() * x.cols()) {
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < p_; ++j) cols_[j * n_ + i] = x(i, j);
        for (std::size_t j = 0; j < p_; ++j) {
            auto first = sorted_rows_.begin() + static_cast<std::ptrdiff_t>(j * n_);
            std::iota(first, first + static_cast<std::ptrdiff_t>(n_), 0u);
            const double* col = cols_.data() + j * n_;
            std::stable_sort(first, first + static_cast<std::ptrdiff_t>(n_),
                             [col](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
        }
        features_.resize(p_);
        multiplicity_.resize(n_);
        goes_left_.resize(n_);
        order_.resize(n_ * p_);
        scratch_.resize(n_);
        left_counts_.resize(static_cast<std::size_t>(std::max(n_classes_, 1)));
        node_counts_.resize(left_counts_.size());
    }

    Forest::Tree grow(std::uint64_t seed) {
        Rng rng(seed);
        std::fill(multiplicity_.begin(), multiplicity_.end(), 0u);
        if (params_.bootstrap) {
            for (std::size_t k = 0; k < n_; ++k) ++multiplicity_[uniform_index(rng, n_)];
        } else {
            std::fill(multiplicity_.begin(), multiplicity_.end(), 1u);
        }
        for (std::size_t j = 0; j < p_; ++j) {
            std::uint32_t* out = order_.data() + j * n_;
            for (std::size_t k = 0; k < n_; ++k) {
                const std::uint32_t r = sorted_rows_[j * n_ + k];
                for (std::uint32_t c = 0; c < multiplicity_[r]; ++c) *out++ = r;
            }
        }

        Forest::Tree tree;
        tree.nodes.emplace_back();
        struct Pending {
            int node;
            std::size_t begin, end;
        };
        std::vector<Pending> stack{{0, 0, n_}};
        while (!stack.empty()) {
            auto [node, begin, end] = stack.back();
            stack.pop_back();
            std::span<const std::uint32_t> members(order_.data() + begin, end - begin);
            int feature = -1;
            double threshold = 0.0;
            if (members.size() > static_cast<std::size_t>(params_.min_node_size) && !pure(members))
                best_split(begin, end, rng, feature, threshold);
            if (feature < 0) {
                make_leaf(tree, node, members);
                continue;
            }
            const std::size_t split_at = partition(begin, end, feature, threshold);
            int left = static_cast<int>(tree.nodes.size());
            tree.nodes[static_cast<std::size_t>(node)] = {feature, left, threshold};
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            stack.push_back({left + 1, split_at, end});
            stack.push_back({left, begin, split_at});
        }
        return tree;
    }

private:
    bool pure(std::span<const std::uint32_t> members) const {
        if (task_ == ForestTask::regression) {
            double first = y_[members[0]];
            return std::all_of(members.begin(), members.end(), [&](std::uint32_t s) { return y_[s] == first; });
        }
        int first = cls_[members[0]];
        return std::all_of(members.begin(), members.end(), [&](std::uint32_t s) { return cls_[s] == first; });
    }

    void make_leaf(Forest::Tree& tree, int node, std::span<const std::uint32_t> members) {
        auto& nd = tree.nodes[static_cast<std::size_t>(node)];
        nd.feature = -1;
        if (task_ == ForestTask::regression) {
            double sum = 0.0;
            for (auto s : members) sum += y_[s];
            nd.value = sum / static_cast<double>(members.size());
            return;
        }
        nd.left = static_cast<int>(tree.leaf_values.size());
        tree.leaf_values.resize(tree.leaf_values.size() + static_cast<std::size_t>(n_classes_), 0.0);
        double* freq = tree.leaf_values.data() + nd.left;
        for (auto s : members) freq[cls_[s]] += 1.0;
        const double inv = 1.0 / static_cast<double>(members.size());
        for (int c = 0; c < n_classes_; ++c) freq[c] *= inv;
    }

    // Stable in every ordering; returns the first index of the right child.
    std::size_t partition(std::size_t begin, std::size_t end, int feature, double threshold) {
        const double* col = cols_.data() + static_cast<std::size_t>(feature) * n_;
        const std::uint32_t* ref = order_.data() + static_cast<std::size_t>(feature) * n_;
        for (std::size_t k = begin; k < end; ++k) goes_left_[ref[k]] = col[ref[k]] <= threshold;
        std::size_t split_at = begin;
        for (std::size_t j = 0; j < p_; ++j) {
            std::uint32_t* ord = order_.data() + j * n_;
            std::size_t l = begin, r = 0;
            for (std::size_t k = begin; k < end; ++k) {
                const std::uint32_t s = ord[k];
                if (goes_left_[s]) ord[l++] = s;
                else scratch_[r++] = s;
            }
            std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(r), ord + l);
            split_at = l;
        }
        return split_at;
    }

    void best_split(std::size_t begin, std::size_t end, Rng& rng, int& best_feature, double& best_threshold) {
        std::iota(features_.begin(), features_.end(), 0);
        const std::size_t m = end - begin;
        const auto mtry = static_cast<std::size_t>(params_.mtry);
        std::span<const std::uint32_t> members(order_.data() + begin, m);
        double best_score = 0.0;

        if (task_ == ForestTask::regression) {
            double sum = 0.0, sumsq = 0.0;
            for (auto s : members) {
                sum += y_[s];
                sumsq += y_[s] * y_[s];
            }
            // A split must beat the parent by more than rounding noise.
            best_score = sum * sum / static_cast<double>(m) + 1e-14 * sumsq;
            for (std::size_t t = 0; t < mtry; ++t) {
                std::size_t pick = t + uniform_index(rng, p_ - t);
                std::swap(features_[t], features_[pick]);
                const int f = features_[t];
                const double* col = cols_.data() + static_cast<std::size_t>(f) * n_;
                const std::uint32_t* ord = order_.data() + static_cast<std::size_t>(f) * n_ + begin;
                if (col[ord[0]] == col[ord[m - 1]]) continue;
                double left = 0.0;
                for (std::size_t k = 0; k + 1 < m; ++k) {
                    left += y_[ord[k]];
                    const double xk = col[ord[k]], xn = col[ord[k + 1]];
                    if (xk == xn) continue;
                    const double nl = static_cast<double>(k + 1);
                    const double nr = static_cast<double>(m - k - 1);
                    const double right = sum - left;
                    const double score = left * left / nl + right * right / nr;
                    if (score > best_score) {
                        best_score = score;
                        best_feature = f;
                        best_threshold = midpoint(xk, xn);
                    }
                }
            }
            return;
        }

        std::fill(node_counts_.begin(), node_counts_.end(), 0.0);
        for (auto s : members) node_counts_[static_cast<std::size_t>(cls_[s])] += 1.0;
        double node_sq = 0.0;
        for (double c : node_counts_) node_sq += c * c;
        best_score = node_sq / static_cast<double>(m) + 1e-12;
        for (std::size_t t = 0; t < mtry; ++t) {
            std::size_t pick = t + uniform_index(rng, p_ - t);
            std::swap(features_[t], features_[pick]);
            const int f = features_[t];
            const double* col = cols_.data() + static_cast<std::size_t>(f) * n_;
            const std::uint32_t* ord = order_.data() + static_cast<std::size_t>(f) * n_ + begin;
            if (col[ord[0]] == col[ord[m - 1]]) continue;
            std::fill(left_counts_.begin(), left_counts_.end(), 0.0);
            double sq_left = 0.0, sq_right = node_sq;
            for (std::size_t k = 0; k + 1 < m; ++k) {
                const auto c = static_cast<std::size_t>(cls_[ord[k]]);
                const double lc = left_counts_[c];
                const double rc = node_counts_[c] - lc;
                sq_left += 2.0 * lc + 1.0;
                sq_right -= 2.0 * rc - 1.0;
                left_counts_[c] = lc + 1.0;
                const double xk = col[ord[k]], xn = col[ord[k + 1]];
                if (xk == xn) continue;
                const double nl = static_cast<double>(k + 1);
                const double nr = static_cast<double>(m - k - 1);
                const double score = sq_left / nl + sq_right / nr;
                if (score > best_score) {
                    best_score = score;
                    best_feature = f;
                    best_threshold = midpoint(xk, xn);
                }
            }
        }
    }

    static double midpoint(double a, double b) {
        double mid = a + (b - a) * 0.5;
        // Adjacent doubles: keep the threshold strictly below b.
        return mid < b ? mid : a;
    }

    std::size_t n_, p_;
    ForestTask task_;
    std::span<const double> y_;
    std::span<const int> cls_;
    int n_classes_;
    ForestParams params_;
    std::vector<double> cols_;
    /// Row indices sorted by each feature, feature-major.
    std::vector<std::uint32_t> sorted_rows_;
    std::vector<int> features_;
    std::vector<std::uint32_t> multiplicity_;
    std::vector<char> goes_left_;
    /// Per-tree bootstrap sample ordered by each feature, feature-major.
    std::vector<std::uint32_t> order_;
    std::vector<std::uint32_t> scratch_;
    std::vector<double> left_counts_, node_counts_;

public:
    static Forest build(const Matrix& x, ForestTask task, std::span<const double> y, std::span<const int> cls,
                        int n_classes, const ForestParams& params, std::uint64_t seed) {
        if (x.rows() < 2) throw Error("forest needs at least two training rows");
        if (x.cols() < 1) throw Error("forest needs at least one feature");
        Forest f;
        f.task_ = task;
        f.n_classes_ = n_classes;
        f.n_features_ = x.cols();
        f.params_ = resolve_params(params, task, x.cols());
        ForestBuilder builder(x, task, y, cls, n_classes, f.params_);
        f.trees_.reserve(static_cast<std::size_t>(f.params_.n_trees));
        for (int t = 0; t < f.params_.n_trees; ++t) f.trees_.push_back(builder.grow(derive_seed(seed, static_cast<std::uint64_t>(t))));
        return f;
    }
};

Forest Forest::fit_regression(const Matrix& x, std::span<const double> y, const ForestParams& params, std::uint64_t seed) {
    if (y.size() != x.rows()) throw Error("forest: label length does not match row count");
    for (double v : y)
        if (!std::isfinite(v)) throw Error("forest: non-finite label");
    return ForestBuilder::build(x, ForestTask::regression, y, {}, 0, params, seed);
}

Forest Forest::fit_classification(const Matrix& x, std::span<const int> classes, int n_classes, const ForestParams& params,
                                  std::uint64_t seed) {
    if (classes.size() != x.rows()) throw Error("forest: label length does not match row count");
    if (n_classes < 1) throw Error("forest: need at least one class");
    for (int c : classes)
        if (c < 0 || c >= n_classes) throw Error("forest: class id out of range");
    return ForestBuilder::build(x, ForestTask::classification, {}, classes, n_classes, params, seed);
}

const Forest::Node& Forest::leaf_for(const Tree& t, std::span<const double> x) const {
    const Node* nd = &t.nodes[0];
    while (nd->feature >= 0) nd = &t.nodes[static_cast<std::size_t>(nd->left + (x[static_cast<std::size_t>(nd->feature)] <= nd->value ? 0 : 1))];
    return *nd;
}

void Forest::check_width(std::size_t cols) const {
    if (cols != n_features_)
        throw Error("forest expects " + std::to_string(n_features_) + " features, got " + std::to_string(cols));
}

double Forest::predict_row(std::span<const double> x) const {
    if (task_ != ForestTask::regression) throw Error("predict_row is for regression forests");
    check_width(x.size());
    double sum = 0.0;
    for (const auto& t : trees_) sum += leaf_for(t, x).value;
    return sum / static_cast<double>(trees_.size());
}

std::vector<double> Forest::predict(const Matrix& x) const {
    if (task_ != ForestTask::regression) throw Error("predict is for regression forests; use predict_proba");
    check_width(x.cols());
    std::vector<double> out(x.rows(), 0.0);
    for (const auto& t : trees_)
        for (std::size_t i = 0; i < x.rows(); ++i) out[i] += leaf_for(t, x.row(i)).value;
    const double inv = 1.0 / static_cast<double>(trees_.size());
    for (double& v : out) v *= inv;
    return out;
}

void Forest::predict_proba_row(std::span<const double> x, std::span<double> out) const {
    if (task_ != ForestTask::classification) throw Error("predict_proba is for classification forests");
    check_width(x.size());
    if (out.size() != static_cast<std::size_t>(n_classes_)) throw Error("probability buffer has the wrong length");
    std::fill(out.begin(), out.end(), 0.0);
    for (const auto& t : trees_) {
        const double* freq = t.leaf_values.data() + leaf_for(t, x).left;
        for (int c = 0; c < n_classes_; ++c) out[static_cast<std::size_t>(c)] += freq[c];
    }
    double total = 0.0;
    for (double v : out) total += v;
    for (double& v : out) v /= total;
}

Matrix Forest::predict_proba(const Matrix& x) const {
    check_width(x.cols());
    Matrix out(x.rows(), static_cast<std::size_t>(n_classes_));
    for (std::size_t i = 0; i < x.rows(); ++i) predict_proba_row(x.row(i), out.row(i));
    return out;
}

std::vector<int> Forest::predict_class(const Matrix& x) const {
    Matrix prob = predict_proba(x);
    std::vector<int> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto r = prob.row(i);
        out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
    }
    return out;
}

std::size_t Forest::node_count() const {
    std::size_t total = 0;
    for (const auto& t : trees_) total += t.nodes.size();
    return total;
}

bool Forest::well_formed() const {
    if (trees_.size() != static_cast<std::size_t>(params_.n_trees)) return false;
    for (const auto& t : trees_) {
        for (std::size_t k = 0; k < t.nodes.size(); ++k) {
            const auto& nd = t.nodes[k];
            if (nd.feature >= 0) {
                if (nd.left <= static_cast<int>(k) || static_cast<std::size_t>(nd.left) + 1 >= t.nodes.size()) return false;
            } else if (task_ == ForestTask::regression) {
                if (!std::isfinite(nd.value)) return false;
            } else {
                for (int c = 0; c < n_classes_; ++c)
                    if (!std::isfinite(t.leaf_values[static_cast<std::size_t>(nd.left + c)])) return false;
            }
        }
    }
    return true;
}

} // namespace geest

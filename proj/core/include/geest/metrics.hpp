#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geest/hierarchy.hpp"
#include "geest/matrix.hpp"

namespace geest {

struct MetricResult {
    double value = 0.0;
    /// When present, `value` is the (possibly weighted) mean of these.
    std::optional<std::vector<double>> per_observation;
    std::string name;
    std::map<std::string, std::string> params;
};

/// First-order inclusion probabilities of the sampled units and the
/// population size. Design weights are 1/pi.
struct SamplingDesign {
    std::vector<double> pi;
    std::int64_t population_size = 0;

    /// Throws unless every pi lies in (0,1] and N >= the number of units.
    void validate() const;
};

MetricResult mse(std::span<const double> y, std::span<const double> yhat);

/// Horvitz-Thompson mean loss: (1/N) * sum_i L_i / pi_i.
MetricResult ht_loss(std::span<const double> losses, const SamplingDesign& design);
/// Hajek mean loss: sum_i w_i L_i / sum_i w_i with w_i = 1/pi_i.
MetricResult hajek_loss(std::span<const double> losses, const SamplingDesign& design);

enum class Averaging { micro, macro };

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Macro precision averages over classes predicted at least once, macro
/// recall over classes present in y. F1 is 0 when precision + recall is 0.
PrecisionRecall flat_prf(std::span<const int> y, std::span<const int> yhat, Averaging averaging);
MetricResult accuracy(std::span<const int> y, std::span<const int> yhat);

/// Precision/recall on ancestor-augmented label sets. Macro averages run
/// over predicted classes (precision) and true classes (recall).
PrecisionRecall hier_prf(const CategoryTree& tree, std::span<const NodeId> y, std::span<const NodeId> yhat,
                         Averaging averaging);

/// Mean size of the symmetric difference of the augmented sets.
MetricResult sym_diff_loss(const CategoryTree& tree, std::span<const NodeId> y, std::span<const NodeId> yhat);

/// Mean weighted length of the y-yhat path. An edge weighs the entry of
/// `level_weights` for the level of its deeper endpoint (root = level 0).
/// Without weights every edge counts 1.
MetricResult shortest_path_loss(const CategoryTree& tree, std::span<const NodeId> y, std::span<const NodeId> yhat,
                                const std::optional<std::vector<double>>& level_weights = std::nullopt);

/// Charges costs[l-1] at the first level l where the augmented paths differ.
MetricResult h_loss(const CategoryTree& tree, std::span<const NodeId> y, std::span<const NodeId> yhat,
                    std::span<const double> costs);

/// Win score of leaf probability rows (columns follow tree.leaves()). A node
/// counts as correctly classified when it is the argmax child of its parent,
/// with ties going to the smaller label; m = 1 at the first node below the
/// root.
MetricResult win_score(const CategoryTree& tree, std::span<const NodeId> y, const Matrix& leaf_probs);

/// Mean of per-split values; per_observation holds the split values.
MetricResult aggregate_plan(std::span<const double> per_split_values);

/// 0.5^(l-1) for l = 1..height.
std::vector<double> default_level_weights(const CategoryTree& tree);

} // namespace geest

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "geest/dataset.hpp"
#include "geest/hierarchy.hpp"
#include "geest/metrics.hpp"
#include "geest/rng.hpp"

namespace geest {

// --- clustered ----------------------------------------------------------------

enum class FeatureMode { all_iid, x1_cluster_constant, x2_cluster_constant };

FeatureMode parse_feature_mode(const std::string& s);
std::string to_string(FeatureMode m);

/// y = x1 + x2 - x3 + b_m1 + b_m2 * x1 + eps with five standard-normal
/// features, b_m1 ~ N(0, sigma2_1), b_m2 ~ N(0, sigma2_2), eps ~ N(0, sigma2).
struct ClusteredConfig {
    int M = 10;
    int n_m = 10;
    double sigma2 = 1.0;
    double sigma2_1 = 0.0;
    double sigma2_2 = 0.0;
    FeatureMode feature_mode = FeatureMode::all_iid;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Clusters are numbered 1..M; rows of a cluster are contiguous.
Dataset gen_clustered(const ClusteredConfig& cfg);

// --- unequal sampling probabilities ---------------------------------------------

/// y = 5 + x1 + x2 + eps, x1, x2 ~ Gamma(shape 0.1, rate 0.1),
/// x3..x5 ~ N(0,1), eps ~ N(0,1). Size variable u ~ N(y, 1) redrawn until
/// positive; pi = n u / sum(u).
struct NsrsConfig {
    std::int64_t N = 10000;
    /// 0 means N / 100.
    std::int64_t n = 0;
    /// Drop x2 from the features after the labels are realized.
    bool misspecified = false;
    std::uint64_t seed = 0;

    std::int64_t sample_size() const noexcept { return n > 0 ? n : N / 100; }
    void validate() const;
};

struct NsrsPopulation {
    Dataset population;  // inclusion_prob and population_size set
    SamplingDesign design;
    /// Units whose pi was capped below 1.
    std::size_t truncated = 0;
};

NsrsPopulation gen_nsrs_population(const NsrsConfig& cfg);

/// Fresh draws from the superpopulation model (no design columns), used as
/// a test set for the true GE.
Dataset nsrs_draw(const NsrsConfig& cfg, std::size_t rows, std::uint64_t seed);

/// Caps pi at 1 - 1e-9 and rescales the uncapped units so the total stays
/// the same, repeating until no value reaches 1. Returns the capped count.
std::size_t truncate_inclusion_probs(std::vector<double>& pi);

/// Systematic PPS sampling on a uniformly random permutation of the units.
/// Returns round(sum pi) sorted indices.
std::vector<std::size_t> draw_pps_sample(const SamplingDesign& design, std::uint64_t seed);

// --- concept drift ---------------------------------------------------------------

enum class DriftLevel { none, weak, medium, strong };

DriftLevel parse_drift_level(const std::string& s);
std::string to_string(DriftLevel d);
/// none/weak/medium/strong -> 0, 0.5, 1, 2.
double drift_slope(DriftLevel d);

/// y = beta0(t) + 2 x1 - x2 + 2 x3 + eps, t in [0,1], with beta0(t) = d_y t,
/// x1..x3 ~ N(d_x t, 1), x4, x5 ~ N(0,1), eps ~ N(0, 1 + d_sigma t).
struct DriftConfig {
    int n_train = 500;
    int seasons = 10;
    int observed_seasons = 8;
    DriftLevel label_drift = DriftLevel::none;
    DriftLevel feature_drift = DriftLevel::none;
    double variance_drift = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Draws observations of the drift model at given times.
class DriftGenerator {
public:
    explicit DriftGenerator(const DriftConfig& cfg);

    /// Rows at a fixed time t; season and time columns are set.
    Dataset at(double t, std::size_t rows, std::uint64_t seed) const;
    /// Rows with t uniform on [t_lo, t_hi).
    Dataset over(double t_lo, double t_hi, std::size_t rows, std::uint64_t seed) const;

    const DriftConfig& config() const noexcept { return cfg_; }

private:
    void draw_row(double t, Rng& rng, std::span<double> x, double& y) const;
    Dataset make(std::vector<double> times, Rng& rng) const;

    DriftConfig cfg_;
};

struct DriftData {
    Dataset observed;
    DriftGenerator generator;
};

/// n_train rows with t uniform over the observed seasons, sorted by t.
DriftData gen_drift(const DriftConfig& cfg);

/// Tag and time of the true-GE evaluation points after the observation
/// period of the default ten-season layout.
struct TimePoint {
    std::string tag;
    double t;
};
std::vector<TimePoint> default_drift_timepoints(const DriftConfig& cfg);

// --- hierarchical --------------------------------------------------------------

struct HierConfig {
    int n_leaves = 50;
    /// Includes the root.
    int internal_nodes = 39;
    int p = 5;
    /// Coefficient spread at level 1 and its per-level decay factor.
    double effect_scale = 3.0;
    double effect_decay = 0.5;
    int n_train = 1000;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Random tree with exactly n_leaves leaves and internal_nodes internal
/// nodes of arity 2 or 3, grown by expanding uniformly chosen leaves.
CategoryTree generate_tree(const HierConfig& cfg);

/// Multinomial-logit descent model over a fixed tree: at each internal
/// node, child c has coefficient vector beta_c ~ N(0, s_d^2 I) where d is the
/// child's level and s_d = effect_scale * effect_decay^(d-1).
struct HierModel {
    std::shared_ptr<const CategoryTree> tree;
    int p = 5;
    /// Indexed by node id; rows follow children(node). Empty for leaves.
    std::vector<Matrix> coefficients;

    /// Child probabilities at `node` for feature row x.
    std::vector<double> child_probs(NodeId node, std::span<const double> x) const;
};

HierModel make_hier_model(std::shared_ptr<const CategoryTree> tree, const HierConfig& cfg, std::uint64_t seed);

/// Standard-normal features; labels drawn by descending the model.
Dataset gen_hier_data(const HierModel& model, std::size_t rows, std::uint64_t seed);

} // namespace geest

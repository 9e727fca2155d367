#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "geest/dataset.hpp"
#include "geest/forest.hpp"
#include "geest/metrics.hpp"
#include "geest/plan.hpp"
#include "geest/simgen.hpp"

namespace geest {

/// "ols", "forest" or "topdown". Forest parameters apply to "forest" and to
/// the local forests of "topdown".
struct LearnerSpec {
    std::string name = "ols";
    std::string id;  // defaults to name
    ForestParams forest;

    const std::string& label() const noexcept { return id.empty() ? name : id; }
};

/// Metric name plus optional level weights ("weighted_shortest_path") or
/// costs ("h_loss"). Both default to 0.5^(l-1).
struct MetricSpec {
    std::string name = "mse";
    std::vector<double> weights;
};

/// Whether the metric averages a per-observation loss (and so admits design
/// weighting).
bool is_pointwise(const std::string& metric);
/// Whether larger values are better.
bool is_reward(const std::string& metric);
std::vector<std::string> known_metrics();

enum class Weighting { none, ht, hajek };
Weighting parse_weighting(const std::string& s);
std::string to_string(Weighting w);

/// Scheme name plus parameters as text, e.g. {"k","5"}. Dashes in names are
/// read as underscores.
struct SchemeSpec {
    std::string scheme;
    std::map<std::string, std::string> params;
};

std::vector<std::string> known_schemes();

/// Builds a plan from the dataset's metadata (cluster ids, classes, coords,
/// units, seasons) as each scheme requires.
ResamplingPlan build_plan(const Dataset& d, const SchemeSpec& spec, std::uint64_t seed);

struct EstimateOptions {
    Weighting weighting = Weighting::none;
    /// Falls back to the dataset's inclusion probabilities and population
    /// size when absent.
    std::optional<SamplingDesign> design;
    std::uint64_t seed = 0;
};

/// Per-split fit and evaluation, aggregated over the plan. With design
/// weighting, fold unit i enters with inclusion probability
/// pi_i * |test| / n: the chance of being sampled and then landing in a test
/// fold of that size. Splits whose learner fails to fit are skipped and
/// counted in params["skipped"]; if every split fails the call throws.
std::vector<MetricResult> estimate_ge(const Dataset& d, const ResamplingPlan& plan, const LearnerSpec& learner,
                                      const std::vector<MetricSpec>& metrics, const EstimateOptions& options = {});
MetricResult estimate_ge(const Dataset& d, const ResamplingPlan& plan, const LearnerSpec& learner,
                         const MetricSpec& metric, const EstimateOptions& options = {});

/// Fits once on all of `train` and evaluates on `test`.
std::vector<MetricResult> approximate_true_ge(const Dataset& train, const LearnerSpec& learner,
                                              const std::vector<MetricSpec>& metrics, const Dataset& test,
                                              std::uint64_t seed);

// --- studies -------------------------------------------------------------------

enum class StudyKind { clustered, nsrs, drift, hierarchical, custom };
StudyKind parse_study(const std::string& s);
std::string to_string(StudyKind k);

struct ResamplingSpec {
    std::string name;
    SchemeSpec scheme;
    Weighting weighting = Weighting::none;
};

/// Data file for custom studies; replicates differ only in plan and learner
/// seeds.
struct CustomSource {
    std::string data;
    std::string tree;  // category tree file for hierarchical labels
};

struct Setting {
    std::string id;
    ClusteredConfig clustered;
    NsrsConfig nsrs;
    DriftConfig drift;
    HierConfig hier;
    CustomSource custom;
    /// Whether the generator carried its own seed (hierarchical tree seed).
    bool has_seed = false;
};

struct ExperimentSpec {
    StudyKind study = StudyKind::clustered;
    std::vector<Setting> settings;
    std::vector<LearnerSpec> learners;
    std::vector<MetricSpec> metrics;
    std::vector<ResamplingSpec> resampling;
    int replicates = 100;
    std::uint64_t seed = 0;
    int workers = 1;
    /// Rows of the fresh test set for true-GE columns; 0 disables them.
    std::size_t test_size = 200000;
    bool timing = false;
    std::string output;

    void validate() const;
};

/// Parses a JSON study config; unknown keys are errors.
ExperimentSpec parse_experiment(const std::string& json_text);
ExperimentSpec load_experiment(const std::string& path);

struct ResultRow {
    int replicate = 0;
    std::string setting;
    /// "<resampling>|<learner>|<metric>"
    std::string method;
    double estimate = 0.0;
    /// Same order as ExperimentResult::true_ge_tags.
    std::vector<double> true_ge;
    double wall_ms = 0.0;
    /// Splits skipped because the learner failed.
    int skipped = 0;
};

struct ExperimentResult {
    /// Empty tag = a single "true_ge" column.
    std::vector<std::string> true_ge_tags;
    bool timing = false;
    std::vector<ResultRow> rows;
};

/// Replicates run on `spec.workers` threads; every random stream is derived
/// from (seed, replicate, setting), so the result does not depend on the
/// worker count. Rows are sorted by (replicate, setting, method).
ExperimentResult run_study(const ExperimentSpec& spec);

/// `#schema=1` line, header, then one line per row.
void write_result(std::ostream& out, const ExperimentResult& result);
void write_result(const std::string& path, const ExperimentResult& result);

struct SimulatedData {
    Dataset data;
    /// Category tree of hierarchical studies.
    std::shared_ptr<const CategoryTree> tree;
};

/// One dataset of a generated study. Hierarchical settings draw their tree
/// and descent model from the setting's own seed when it has one, else from
/// `seed`; the data always come from `seed`. NSRS settings return the PPS
/// sample with its inclusion probabilities.
SimulatedData simulate(StudyKind study, const Setting& setting, std::uint64_t seed);

/// Parses one generator object (the entries of a study's "generator").
Setting parse_setting(StudyKind study, const std::string& json_text);

} // namespace geest

#include "geest/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include "geest/error.hpp"
#include "geest/linear.hpp"
#include "geest/rng.hpp"
#include "geest/splitters.hpp"
#include "geest/topdown.hpp"

namespace geest {
namespace {

const std::set<std::string> kPointwise{"mse", "accuracy", "sym_diff", "shortest_path", "weighted_shortest_path",
                                       "h_loss", "win"};
const std::set<std::string> kFlatPrf{"precision_micro", "recall_micro", "f1_micro",
                                     "precision_macro", "recall_macro", "f1_macro"};
const std::set<std::string> kHierPrf{"hprecision_micro", "hrecall_micro", "hf1_micro",
                                     "hprecision_macro", "hrecall_macro", "hf1_macro"};

std::string format_real(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string normalize(std::string s) {
    std::replace(s.begin(), s.end(), '-', '_');
    return s;
}

// --- fitted learners ---------------------------------------------------------

struct Fitted {
    std::optional<LinearModel> ols;
    std::optional<Forest> forest;
    std::optional<TopDownClassifier> topdown;
    LabelKind kind = LabelKind::real;
    std::shared_ptr<const CategoryTree> tree;
};

struct Predictions {
    std::vector<double> real;
    std::vector<int> labels;
    std::optional<Matrix> leaf_probs;
};

Fitted fit_learner(const LearnerSpec& learner, const Dataset& train, std::uint64_t seed) {
    Fitted f;
    f.kind = train.label_kind;
    f.tree = train.tree;
    if (learner.name == "ols") {
        if (train.label_kind != LabelKind::real) throw Error("learner 'ols' needs a real-valued label");
        f.ols = fit_ols(train.features, train.y);
    } else if (learner.name == "forest") {
        switch (train.label_kind) {
        case LabelKind::real: f.forest = Forest::fit_regression(train.features, train.y, learner.forest, seed); break;
        case LabelKind::class_id: {
            int n_classes = static_cast<int>(train.class_names.size());
            if (n_classes == 0) n_classes = *std::max_element(train.classes.begin(), train.classes.end()) + 1;
            f.forest = Forest::fit_classification(train.features, train.classes, n_classes, learner.forest, seed);
            break;
        }
        case LabelKind::hierarchical: {
            std::vector<int> idx(train.classes.size());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = train.tree->leaf_index(train.classes[i]);
            f.forest = Forest::fit_classification(train.features, idx, static_cast<int>(train.tree->leaves().size()),
                                                  learner.forest, seed);
            break;
        }
        }
    } else if (learner.name == "topdown") {
        if (train.label_kind != LabelKind::hierarchical) throw Error("learner 'topdown' needs hierarchical labels");
        f.topdown = TopDownClassifier::fit(train.features, train.classes, train.tree, learner.forest, seed);
    } else {
        throw Error("unknown learner '" + learner.name + "'");
    }
    return f;
}

Predictions predict_learner(const Fitted& f, const Dataset& test, bool need_probs) {
    Predictions p;
    if (f.ols) {
        p.real = f.ols->predict(test.features);
    } else if (f.topdown) {
        p.labels = f.topdown->predict(test.features);
        if (need_probs) p.leaf_probs = f.topdown->predict_leaf_probs(test.features);
    } else if (f.kind == LabelKind::real) {
        p.real = f.forest->predict(test.features);
    } else {
        Matrix prob = f.forest->predict_proba(test.features);
        p.labels.resize(prob.rows());
        for (std::size_t i = 0; i < prob.rows(); ++i) {
            auto r = prob.row(i);
            auto c = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
            p.labels[i] = f.kind == LabelKind::hierarchical ? f.tree->leaves()[c] : static_cast<int>(c);
        }
        if (need_probs) p.leaf_probs = std::move(prob);
    }
    return p;
}

std::vector<double> weights_or_default(const MetricSpec& m, const CategoryTree& tree) {
    return m.weights.empty() ? default_level_weights(tree) : m.weights;
}

MetricResult evaluate(const MetricSpec& m, const Dataset& test, const Predictions& p) {
    const std::string& name = m.name;
    if (name == "mse") {
        if (test.label_kind != LabelKind::real) throw Error("metric 'mse' needs a real-valued label");
        return mse(test.y, p.real);
    }
    if (test.label_kind == LabelKind::real) throw Error("metric '" + name + "' needs class labels");
    if (name == "accuracy") return accuracy(test.classes, p.labels);
    if (kFlatPrf.count(name) || kHierPrf.count(name)) {
        const bool macro = name.ends_with("macro");
        const auto avg = macro ? Averaging::macro : Averaging::micro;
        PrecisionRecall pr;
        if (kHierPrf.count(name)) {
            if (test.label_kind != LabelKind::hierarchical) throw Error("metric '" + name + "' needs hierarchical labels");
            pr = hier_prf(*test.tree, test.classes, p.labels, avg);
        } else {
            pr = flat_prf(test.classes, p.labels, avg);
        }
        MetricResult r;
        r.name = name;
        r.value = name.find("precision") != std::string::npos ? pr.precision
                  : name.find("recall") != std::string::npos  ? pr.recall
                                                              : pr.f1;
        return r;
    }
    if (test.label_kind != LabelKind::hierarchical) throw Error("metric '" + name + "' needs hierarchical labels");
    const CategoryTree& tree = *test.tree;
    MetricResult r;
    if (name == "sym_diff") r = sym_diff_loss(tree, test.classes, p.labels);
    else if (name == "shortest_path") r = shortest_path_loss(tree, test.classes, p.labels);
    else if (name == "weighted_shortest_path") r = shortest_path_loss(tree, test.classes, p.labels, weights_or_default(m, tree));
    else if (name == "h_loss") r = h_loss(tree, test.classes, p.labels, weights_or_default(m, tree));
    else if (name == "win") {
        if (!p.leaf_probs) throw Error("metric 'win' needs leaf probabilities");
        r = win_score(tree, test.classes, *p.leaf_probs);
    } else {
        throw Error("unknown metric '" + name + "'");
    }
    r.name = name;
    return r;
}

// --- scheme parameters ---------------------------------------------------------

class Params {
public:
    Params(const SchemeSpec& spec, std::set<std::string> allowed) : spec_(spec) {
        for (const auto& [k, v] : spec.params)
            if (!allowed.count(normalize(k)))
                throw Error("scheme '" + spec.scheme + "' has no parameter '" + k + "'");
        for (const auto& [k, v] : spec.params) values_[normalize(k)] = v;
    }
    bool has(const std::string& k) const { return values_.count(k) > 0; }
    std::string text(const std::string& k, const std::string& def) const {
        auto it = values_.find(k);
        return it == values_.end() ? def : it->second;
    }
    double real(const std::string& k, std::optional<double> def = std::nullopt) const {
        auto it = values_.find(k);
        if (it == values_.end()) {
            if (!def) throw Error("scheme '" + spec_.scheme + "' needs parameter '" + k + "'");
            return *def;
        }
        try {
            std::size_t used = 0;
            double v = std::stod(it->second, &used);
            if (used != it->second.size() || !std::isfinite(v)) throw Error("");
            return v;
        } catch (...) {
            throw Error("parameter '" + k + "' is not a number: '" + it->second + "'");
        }
    }
    std::size_t count(const std::string& k, std::optional<std::size_t> def = std::nullopt) const {
        auto it = values_.find(k);
        if (it == values_.end()) {
            if (!def) throw Error("scheme '" + spec_.scheme + "' needs parameter '" + k + "'");
            return *def;
        }
        const std::string& s = it->second;
        std::size_t v = 0;
        auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
            throw Error("parameter '" + k + "' is not a non-negative integer: '" + s + "'");
        return v;
    }

private:
    const SchemeSpec& spec_;
    std::map<std::string, std::string> values_;
};

std::vector<double> parse_list(const std::string& s, char sep) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto end = s.find(sep, start);
        if (end == std::string::npos) end = s.size();
        const std::string tok = s.substr(start, end - start);
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw Error("");
        } catch (...) {
            throw Error("cannot parse number '" + tok + "'");
        }
        start = end + 1;
    }
    return out;
}

Boundary parse_boundary(const std::string& s) {
    auto colon = s.find(':');
    if (colon == std::string::npos) throw Error("boundary must be 'halfplane:a,b,c' or 'polygon:x,y;x,y;...'");
    const std::string kind = s.substr(0, colon), body = s.substr(colon + 1);
    if (kind == "halfplane") {
        auto v = parse_list(body, ',');
        if (v.size() != 3) throw Error("halfplane boundary needs three numbers a,b,c");
        return HalfPlane{v[0], v[1], v[2]};
    }
    if (kind == "polygon") {
        Polygon poly;
        std::size_t start = 0;
        while (start < body.size()) {
            auto end = body.find(';', start);
            if (end == std::string::npos) end = body.size();
            auto v = parse_list(body.substr(start, end - start), ',');
            if (v.size() != 2) throw Error("polygon vertices are 'x,y' pairs separated by ';'");
            poly.vertices.push_back({v[0], v[1]});
            start = end + 1;
        }
        return poly;
    }
    throw Error("unknown boundary kind '" + kind + "'");
}

const Matrix& need_coords(const Dataset& d, const std::string& scheme) {
    if (!d.coords) throw Error("scheme '" + scheme + "' needs coordinate columns");
    return *d.coords;
}

} // namespace

bool is_pointwise(const std::string& metric) { return kPointwise.count(metric) > 0; }

bool is_reward(const std::string& metric) {
    return metric == "accuracy" || metric == "win" || kFlatPrf.count(metric) || kHierPrf.count(metric);
}

std::vector<std::string> known_metrics() {
    std::vector<std::string> out(kPointwise.begin(), kPointwise.end());
    out.insert(out.end(), kFlatPrf.begin(), kFlatPrf.end());
    out.insert(out.end(), kHierPrf.begin(), kHierPrf.end());
    std::sort(out.begin(), out.end());
    return out;
}

Weighting parse_weighting(const std::string& s) {
    if (s == "none") return Weighting::none;
    if (s == "ht") return Weighting::ht;
    if (s == "hajek") return Weighting::hajek;
    throw Error("unknown weighting '" + s + "' (expected none, ht or hajek)");
}

std::string to_string(Weighting w) {
    switch (w) {
    case Weighting::none: return "none";
    case Weighting::ht: return "ht";
    case Weighting::hajek: return "hajek";
    }
    return "?";
}

std::vector<std::string> known_schemes() {
    return {"holdout",          "kfold",       "repeated_kfold",     "grouped_kfold", "stratified_kfold",
            "single_spatial_split", "rectangular_tiles", "clustered_groups", "loo_buffer", "leave_one_disc_out",
            "geo_units",        "timeseries_cv", "out_of_sample"};
}

ResamplingPlan build_plan(const Dataset& d, const SchemeSpec& spec, std::uint64_t seed) {
    const std::string scheme = normalize(spec.scheme);
    if (scheme == "holdout") {
        Params p(spec, {"test_fraction"});
        return holdout(d.n(), p.real("test_fraction", 0.2), seed);
    }
    if (scheme == "kfold" || scheme == "repeated_kfold") {
        Params p(spec, {"k", "repeats"});
        return repeated_kfold(d.n(), p.count("k", 5), p.count("repeats", scheme == "kfold" ? 1 : 10), seed);
    }
    if (scheme == "grouped_kfold") {
        Params p(spec, {"k", "repeats", "group"});
        const std::string group = p.text("group", d.cluster_id ? "cluster" : "unit");
        const std::vector<std::int64_t>* ids = group == "cluster" ? (d.cluster_id ? &*d.cluster_id : nullptr)
                                               : group == "unit"  ? (d.unit_id ? &*d.unit_id : nullptr)
                                                                  : throw Error("group must be 'cluster' or 'unit'");
        if (!ids) throw Error("grouped_kfold needs a " + group + " column");
        const std::size_t groups = std::set<std::int64_t>(ids->begin(), ids->end()).size();
        const std::size_t k = p.has("k") ? p.count("k") : std::min<std::size_t>(5, groups);
        return grouped_kfold(*ids, k, seed, p.count("repeats", 1));
    }
    if (scheme == "stratified_kfold") {
        Params p(spec, {"k", "repeats"});
        if (d.label_kind == LabelKind::real) throw Error("stratified_kfold needs class labels");
        return stratified_kfold(d.classes, p.count("k", 5), seed, p.count("repeats", 1));
    }
    if (scheme == "single_spatial_split") {
        Params p(spec, {"boundary", "buffer"});
        if (!p.has("boundary")) throw Error("single_spatial_split needs parameter 'boundary'");
        return single_spatial_split(need_coords(d, scheme), parse_boundary(p.text("boundary", "")), p.real("buffer", 0.0));
    }
    if (scheme == "rectangular_tiles") {
        Params p(spec, {"rows", "cols", "mode", "k", "extent"});
        Grid g{p.count("rows"), p.count("cols"), std::nullopt};
        if (p.has("extent")) {
            auto e = parse_list(p.text("extent", ""), ',');
            if (e.size() != 4) throw Error("extent needs xmin,xmax,ymin,ymax");
            g.extent = std::array<double, 4>{e[0], e[1], e[2], e[3]};
        }
        const std::string mode = p.text("mode", "one_block_per_fold");
        TileMode tm = mode == "one_block_per_fold"  ? TileMode::one_block_per_fold
                      : mode == "blocks_to_k_folds" ? TileMode::blocks_to_k_folds
                                                    : throw Error("unknown tile mode '" + mode + "'");
        return rectangular_tiles(need_coords(d, scheme), g, tm, p.count("k", 5), seed);
    }
    if (scheme == "clustered_groups") {
        Params p(spec, {"k", "source"});
        const std::string source = p.text("source", "coords");
        if (source == "coords") return clustered_groups(need_coords(d, scheme), p.count("k", 5), seed, "coords");
        if (source == "features") return clustered_groups(d.features, p.count("k", 5), seed, "features");
        throw Error("source must be 'coords' or 'features'");
    }
    if (scheme == "loo_buffer") {
        Params p(spec, {"radius"});
        return loo_buffer(need_coords(d, scheme), p.real("radius"));
    }
    if (scheme == "leave_one_disc_out") {
        Params p(spec, {"k", "radius", "buffer"});
        return leave_one_disc_out(need_coords(d, scheme), p.count("k", 5), p.real("radius"), p.real("buffer", 0.0), seed);
    }
    if (scheme == "geo_units") {
        Params p(spec, {"mode", "k"});
        if (!d.unit_id) throw Error("geo_units needs a unit column");
        const std::string mode = p.text("mode", "one_unit_per_fold");
        UnitMode um = mode == "one_unit_per_fold"  ? UnitMode::one_unit_per_fold
                      : mode == "units_to_k_folds" ? UnitMode::units_to_k_folds
                                                   : throw Error("unknown unit mode '" + mode + "'");
        return geo_units(*d.unit_id, um, p.count("k", 5), seed);
    }
    if (scheme == "timeseries_cv" || scheme == "out_of_sample") {
        if (!d.season) throw Error("scheme '" + scheme + "' needs a season or time column");
        if (scheme == "timeseries_cv") {
            Params p(spec, {"gap"});
            return timeseries_cv(*d.season, static_cast<int>(p.count("gap", 0)));
        }
        Params p(spec, {"test_seasons", "gap"});
        return out_of_sample(*d.season, static_cast<int>(p.count("test_seasons", 1)), static_cast<int>(p.count("gap", 0)));
    }
    throw Error("unknown scheme '" + spec.scheme + "'");
}

std::vector<MetricResult> estimate_ge(const Dataset& d, const ResamplingPlan& plan, const LearnerSpec& learner,
                                      const std::vector<MetricSpec>& metrics, const EstimateOptions& options) {
    if (metrics.empty()) throw Error("estimate_ge needs at least one metric");
    if (plan.n != d.n())
        throw Error("plan was built for " + std::to_string(plan.n) + " rows but the dataset has " +
                    std::to_string(d.n()) + " rows");
    check_plan(plan, d.n());

    std::optional<SamplingDesign> design;
    if (options.weighting != Weighting::none) {
        for (const auto& m : metrics)
            if (!is_pointwise(m.name)) throw Error("design weighting needs a point-wise metric, got '" + m.name + "'");
        if (options.design) {
            design = options.design;
        } else {
            if (!d.inclusion_prob || !d.population_size)
                throw Error("design weighting needs inclusion probabilities and a population size");
            design = SamplingDesign{*d.inclusion_prob, *d.population_size};
        }
        if (design->pi.size() != d.n())
            throw Error("design has " + std::to_string(design->pi.size()) + " units but the dataset has " +
                        std::to_string(d.n()) + " rows");
        design->validate();
    }
    const bool need_probs = std::any_of(metrics.begin(), metrics.end(), [](const auto& m) { return m.name == "win"; });

    std::vector<std::vector<double>> values(metrics.size());
    int skipped = 0;
    std::string first_failure;
    for (std::size_t j = 0; j < plan.splits.size(); ++j) {
        const Split& s = plan.splits[j];
        Dataset train = subset(d, s.train);
        Dataset test = subset(d, s.test);
        Predictions pred;
        try {
            Fitted f = fit_learner(learner, train, derive_seed(options.seed, j));
            pred = predict_learner(f, test, need_probs);
        } catch (const Error& e) {
            if (first_failure.empty()) first_failure = e.what();
            ++skipped;
            continue;
        }
        SamplingDesign fold;
        if (design) {
            fold.population_size = design->population_size;
            const double share = static_cast<double>(s.test.size()) / static_cast<double>(d.n());
            for (std::size_t i : s.test) fold.pi.push_back(design->pi[i] * share);
        }
        for (std::size_t m = 0; m < metrics.size(); ++m) {
            MetricResult r = evaluate(metrics[m], test, pred);
            double v = r.value;
            if (design) v = options.weighting == Weighting::ht ? ht_loss(*r.per_observation, fold).value
                                                               : hajek_loss(*r.per_observation, fold).value;
            values[m].push_back(v);
        }
    }
    if (values[0].empty())
        throw Error("every split failed to fit (" + std::to_string(skipped) + " splits); first error: " + first_failure);

    std::vector<MetricResult> out;
    for (std::size_t m = 0; m < metrics.size(); ++m) {
        MetricResult r = aggregate_plan(values[m]);
        r.name = metrics[m].name;
        r.params["skipped"] = std::to_string(skipped);
        r.params["weighting"] = to_string(options.weighting);
        out.push_back(std::move(r));
    }
    return out;
}

MetricResult estimate_ge(const Dataset& d, const ResamplingPlan& plan, const LearnerSpec& learner,
                         const MetricSpec& metric, const EstimateOptions& options) {
    return estimate_ge(d, plan, learner, std::vector<MetricSpec>{metric}, options).front();
}

std::vector<MetricResult> approximate_true_ge(const Dataset& train, const LearnerSpec& learner,
                                              const std::vector<MetricSpec>& metrics, const Dataset& test,
                                              std::uint64_t seed) {
    if (test.n() < 1) throw Error("true GE needs a nonempty test set");
    const bool need_probs = std::any_of(metrics.begin(), metrics.end(), [](const auto& m) { return m.name == "win"; });
    Fitted f = fit_learner(learner, train, seed);
    Predictions pred = predict_learner(f, test, need_probs);
    std::vector<MetricResult> out;
    for (const auto& m : metrics) {
        MetricResult r = evaluate(m, test, pred);
        r.per_observation.reset();
        out.push_back(std::move(r));
    }
    return out;
}

// --- studies -------------------------------------------------------------------

StudyKind parse_study(const std::string& s) {
    if (s == "clustered") return StudyKind::clustered;
    if (s == "nsrs") return StudyKind::nsrs;
    if (s == "drift") return StudyKind::drift;
    if (s == "hierarchical") return StudyKind::hierarchical;
    if (s == "custom") return StudyKind::custom;
    throw Error("unknown study '" + s + "' (expected clustered, nsrs, drift, hierarchical or custom)");
}

std::string to_string(StudyKind k) {
    switch (k) {
    case StudyKind::clustered: return "clustered";
    case StudyKind::nsrs: return "nsrs";
    case StudyKind::drift: return "drift";
    case StudyKind::hierarchical: return "hierarchical";
    case StudyKind::custom: return "custom";
    }
    return "?";
}

void ExperimentSpec::validate() const {
    if (settings.empty()) throw Error("study needs at least one generator setting");
    if (learners.empty()) throw Error("study needs at least one learner");
    if (metrics.empty()) throw Error("study needs at least one metric");
    if (resampling.empty()) throw Error("study needs at least one resampling scheme");
    if (replicates < 1) throw Error("replicates must be at least 1");
    if (workers < 1) throw Error("workers must be at least 1");
    std::set<std::string> ids;
    for (const auto& s : settings)
        if (!ids.insert(s.id).second) throw Error("duplicate setting id '" + s.id + "'");
    const bool real = study == StudyKind::clustered || study == StudyKind::nsrs || study == StudyKind::drift;
    const bool hier = study == StudyKind::hierarchical;
    for (const auto& m : metrics) {
        if (m.name == "mse" ? !real && study != StudyKind::custom : real)
            throw Error("metric '" + m.name + "' does not fit the labels of the " + to_string(study) + " study");
        if (!is_pointwise(m.name) && !kFlatPrf.count(m.name) && !kHierPrf.count(m.name))
            throw Error("unknown metric '" + m.name + "'");
    }
    std::set<std::string> labels;
    for (const auto& l : learners) {
        if (l.name != "ols" && l.name != "forest" && l.name != "topdown") throw Error("unknown learner '" + l.name + "'");
        if (l.name == "ols" && hier) throw Error("learner 'ols' cannot fit hierarchical labels");
        if (l.name == "topdown" && real) throw Error("learner 'topdown' needs hierarchical labels");
        if (!labels.insert(l.label()).second) throw Error("duplicate learner id '" + l.label() + "'");
    }
    std::set<std::string> names;
    for (const auto& r : resampling) {
        if (!names.insert(r.name).second) throw Error("duplicate resampling name '" + r.name + "'");
        if (r.weighting != Weighting::none) {
            if (study != StudyKind::nsrs && study != StudyKind::custom)
                throw Error("design weighting is only available for nsrs and custom studies");
            for (const auto& m : metrics)
                if (!is_pointwise(m.name)) throw Error("design weighting needs point-wise metrics, got '" + m.name + "'");
        }
    }
}

namespace {

constexpr std::uint64_t kTreeStream = 0x74726565ULL;

struct SettingRuntime {
    const Setting* setting = nullptr;
    std::shared_ptr<const CategoryTree> tree;
    std::optional<HierModel> model;
    std::optional<Dataset> custom;
};

SettingRuntime make_runtime(StudyKind study, const Setting& s, std::uint64_t seed) {
    SettingRuntime rt;
    rt.setting = &s;
    if (study == StudyKind::hierarchical) {
        HierConfig cfg = s.hier;
        cfg.seed = s.has_seed ? s.hier.seed : derive_seed(seed, kTreeStream);
        rt.tree = std::make_shared<const CategoryTree>(generate_tree(cfg));
        rt.model = make_hier_model(rt.tree, cfg, derive_seed(cfg.seed, 1));
    } else if (study == StudyKind::custom) {
        if (!s.custom.tree.empty()) rt.tree = std::make_shared<const CategoryTree>(CategoryTree::read_file(s.custom.tree));
        rt.custom = load_dataset(s.custom.data, rt.tree);
    }
    return rt;
}

struct Replicate {
    Dataset data;
    /// Test sets for the true-GE columns, in tag order.
    std::vector<Dataset> tests;
};

Dataset draw_data(StudyKind study, const SettingRuntime& rt, std::uint64_t seed) {
    const Setting& s = *rt.setting;
    switch (study) {
    case StudyKind::clustered: {
        ClusteredConfig cfg = s.clustered;
        cfg.seed = seed;
        return gen_clustered(cfg);
    }
    case StudyKind::nsrs: {
        NsrsConfig cfg = s.nsrs;
        cfg.seed = derive_seed(seed, 0);
        NsrsPopulation pop = gen_nsrs_population(cfg);
        auto idx = draw_pps_sample(pop.design, derive_seed(seed, 1));
        return subset(pop.population, idx);
    }
    case StudyKind::drift: {
        DriftConfig cfg = s.drift;
        cfg.seed = seed;
        return gen_drift(cfg).observed;
    }
    case StudyKind::hierarchical: return gen_hier_data(*rt.model, static_cast<std::size_t>(s.hier.n_train), seed);
    case StudyKind::custom: return *rt.custom;
    }
    throw Error("unknown study");
}

std::vector<std::string> tags_for(StudyKind study, const ExperimentSpec& spec) {
    if (spec.test_size == 0 || study == StudyKind::custom) return {};
    if (study == StudyKind::drift) {
        std::vector<std::string> tags;
        for (const auto& tp : default_drift_timepoints(spec.settings.front().drift)) tags.push_back(tp.tag);
        return tags;
    }
    return {""};
}

std::vector<Dataset> draw_tests(StudyKind study, const SettingRuntime& rt, std::size_t rows, std::uint64_t seed) {
    const Setting& s = *rt.setting;
    std::vector<Dataset> out;
    switch (study) {
    case StudyKind::clustered: {
        ClusteredConfig cfg = s.clustered;
        cfg.M = std::max(2, static_cast<int>((rows + static_cast<std::size_t>(cfg.n_m) - 1) / static_cast<std::size_t>(cfg.n_m)));
        cfg.seed = seed;
        out.push_back(gen_clustered(cfg));
        break;
    }
    case StudyKind::nsrs: out.push_back(nsrs_draw(s.nsrs, rows, seed)); break;
    case StudyKind::drift: {
        DriftGenerator gen(s.drift);
        const auto tps = default_drift_timepoints(s.drift);
        for (std::size_t k = 0; k < tps.size(); ++k) out.push_back(gen.at(tps[k].t, rows, derive_seed(seed, k)));
        break;
    }
    case StudyKind::hierarchical: out.push_back(gen_hier_data(*rt.model, rows, seed)); break;
    case StudyKind::custom: break;
    }
    return out;
}

std::vector<ResultRow> run_replicate(const ExperimentSpec& spec, const std::vector<SettingRuntime>& runtimes, int rep,
                                     std::size_t n_tags) {
    using clock = std::chrono::steady_clock;
    std::vector<ResultRow> rows;
    const std::uint64_t rep_seed = derive_seed(spec.seed, static_cast<std::uint64_t>(rep));
    for (std::size_t si = 0; si < spec.settings.size(); ++si) {
        const std::uint64_t base = derive_seed(rep_seed, si);
        const SettingRuntime& rt = runtimes[si];
        Dataset data = draw_data(spec.study, rt, derive_seed(base, 0));
        std::vector<Dataset> tests;
        if (n_tags > 0) tests = draw_tests(spec.study, rt, spec.test_size, derive_seed(base, 2));

        // true_ge[learner][metric][tag]
        std::vector<std::vector<std::vector<double>>> truth(spec.learners.size());
        for (std::size_t li = 0; li < spec.learners.size(); ++li) {
            truth[li].assign(spec.metrics.size(), std::vector<double>(tests.size()));
            if (tests.empty()) continue;
            const std::uint64_t fit_seed = derive_seed(derive_seed(base, 5), li);
            const bool need_probs =
                std::any_of(spec.metrics.begin(), spec.metrics.end(), [](const auto& m) { return m.name == "win"; });
            Fitted f = fit_learner(spec.learners[li], data, fit_seed);
            for (std::size_t k = 0; k < tests.size(); ++k) {
                Predictions pred = predict_learner(f, tests[k], need_probs);
                for (std::size_t m = 0; m < spec.metrics.size(); ++m)
                    truth[li][m][k] = evaluate(spec.metrics[m], tests[k], pred).value;
            }
        }

        for (std::size_t ri = 0; ri < spec.resampling.size(); ++ri) {
            const ResamplingSpec& rs = spec.resampling[ri];
            ResamplingPlan plan = build_plan(data, rs.scheme, derive_seed(derive_seed(base, 3), ri));
            for (std::size_t li = 0; li < spec.learners.size(); ++li) {
                EstimateOptions opt;
                opt.weighting = rs.weighting;
                opt.seed = derive_seed(derive_seed(derive_seed(base, 4), ri), li);
                const auto start = clock::now();
                auto results = estimate_ge(data, plan, spec.learners[li], spec.metrics, opt);
                const double ms = std::chrono::duration<double, std::milli>(clock::now() - start).count();
                for (std::size_t m = 0; m < spec.metrics.size(); ++m) {
                    ResultRow row;
                    row.replicate = rep;
                    row.setting = spec.settings[si].id;
                    row.method = rs.name + "|" + spec.learners[li].label() + "|" + spec.metrics[m].name;
                    row.estimate = results[m].value;
                    row.true_ge = truth[li][m];
                    row.wall_ms = ms;
                    row.skipped = std::stoi(results[m].params.at("skipped"));
                    rows.push_back(std::move(row));
                }
            }
        }
    }
    return rows;
}

} // namespace

ExperimentResult run_study(const ExperimentSpec& spec) {
    spec.validate();
    ExperimentResult result;
    result.timing = spec.timing;
    result.true_ge_tags = tags_for(spec.study, spec);

    std::vector<SettingRuntime> runtimes;
    for (std::size_t si = 0; si < spec.settings.size(); ++si)
        runtimes.push_back(make_runtime(spec.study, spec.settings[si], derive_seed(spec.seed, kTreeStream + si)));

    std::vector<std::vector<ResultRow>> per_rep(static_cast<std::size_t>(spec.replicates));
    std::atomic<int> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    std::string error_context;
    auto work = [&] {
        for (;;) {
            const int rep = next.fetch_add(1);
            if (rep >= spec.replicates) return;
            {
                std::lock_guard lock(error_mutex);
                if (error) return;
            }
            try {
                per_rep[static_cast<std::size_t>(rep)] = run_replicate(spec, runtimes, rep, result.true_ge_tags.size());
            } catch (const std::exception& e) {
                std::lock_guard lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                    error_context = "replicate " + std::to_string(rep) + ": " + e.what();
                }
                return;
            }
        }
    };
    const int n_threads = std::min(spec.workers, spec.replicates);
    if (n_threads <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
    }
    if (error) throw Error(error_context);

    for (auto& rows : per_rep)
        for (auto& r : rows) result.rows.push_back(std::move(r));
    std::stable_sort(result.rows.begin(), result.rows.end(), [](const ResultRow& a, const ResultRow& b) {
        return std::tie(a.replicate, a.setting, a.method) < std::tie(b.replicate, b.setting, b.method);
    });
    return result;
}

void write_result(std::ostream& out, const ExperimentResult& result) {
    out << "#schema=1\n";
    out << "replicate,setting,method,estimate";
    for (const auto& tag : result.true_ge_tags) out << ",true_ge" << (tag.empty() ? "" : "_" + tag);
    if (result.timing) out << ",wall_ms";
    out << '\n';
    for (const auto& r : result.rows) {
        out << r.replicate << ',' << r.setting << ',' << r.method << ',' << format_real(r.estimate);
        for (double v : r.true_ge) out << ',' << format_real(v);
        if (result.timing) out << ',' << format_real(r.wall_ms);
        out << '\n';
    }
    for (const auto& r : result.rows)
        if (r.skipped > 0)
            out << "#skipped replicate=" << r.replicate << " setting=" << r.setting << " method=" << r.method
                << " splits=" << r.skipped << '\n';
}

void write_result(const std::string& path, const ExperimentResult& result) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write result file '" + path + "'");
    write_result(out, result);
    if (!out) throw Error("failed writing result file '" + path + "'");
}

SimulatedData simulate(StudyKind study, const Setting& setting, std::uint64_t seed) {
    if (study == StudyKind::custom) throw Error("custom studies have no generator");
    SettingRuntime rt = make_runtime(study, setting, seed);
    SimulatedData out{draw_data(study, rt, derive_seed(seed, 0)), rt.tree};
    return out;
}

} // namespace geest

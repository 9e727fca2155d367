#include <fstream>
#include <set>
#include <sstream>

#include "geest/error.hpp"
#include "geest/experiments.hpp"
#include "json.hpp"

namespace geest {
namespace {

using json = nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw Error(where + " must be a JSON object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key)) throw Error("unknown key '" + key + "' in " + where);
}

template <class T>
void get(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error("key '" + std::string(key) + "' in " + where + " has the wrong type");
    }
}

std::string text_of(const json& v, const std::string& key) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
    if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
    if (v.is_number_float()) return v.dump();
    throw Error("parameter '" + key + "' must be a string, number or boolean");
}

Setting setting_from(StudyKind study, const json& j, std::size_t index) {
    const std::string where = "generator";
    Setting s;
    s.id = "s" + std::to_string(index + 1);
    get(j, "id", s.id, where);
    if (s.id.empty() || s.id.find_first_of(",|\n") != std::string::npos)
        throw Error("setting id must be nonempty and must not contain ',' or '|'");
    std::string text;
    switch (study) {
    case StudyKind::clustered: {
        check_keys(j, {"id", "M", "n_m", "sigma2", "sigma2_1", "sigma2_2", "feature_mode", "seed"}, where);
        auto& c = s.clustered;
        get(j, "M", c.M, where);
        get(j, "n_m", c.n_m, where);
        get(j, "sigma2", c.sigma2, where);
        get(j, "sigma2_1", c.sigma2_1, where);
        get(j, "sigma2_2", c.sigma2_2, where);
        text = to_string(c.feature_mode);
        get(j, "feature_mode", text, where);
        c.feature_mode = parse_feature_mode(text);
        get(j, "seed", c.seed, where);
        c.validate();
        break;
    }
    case StudyKind::nsrs: {
        check_keys(j, {"id", "N", "n", "misspecified", "seed"}, where);
        auto& c = s.nsrs;
        get(j, "N", c.N, where);
        get(j, "n", c.n, where);
        get(j, "misspecified", c.misspecified, where);
        get(j, "seed", c.seed, where);
        c.validate();
        break;
    }
    case StudyKind::drift: {
        check_keys(j, {"id", "n_train", "seasons", "observed_seasons", "label_drift", "feature_drift", "variance_drift",
                       "seed"},
                   where);
        auto& c = s.drift;
        get(j, "n_train", c.n_train, where);
        get(j, "seasons", c.seasons, where);
        get(j, "observed_seasons", c.observed_seasons, where);
        text = to_string(c.label_drift);
        get(j, "label_drift", text, where);
        c.label_drift = parse_drift_level(text);
        text = to_string(c.feature_drift);
        get(j, "feature_drift", text, where);
        c.feature_drift = parse_drift_level(text);
        get(j, "variance_drift", c.variance_drift, where);
        get(j, "seed", c.seed, where);
        c.validate();
        break;
    }
    case StudyKind::hierarchical: {
        check_keys(j, {"id", "n_leaves", "internal_nodes", "p", "effect_scale", "effect_decay", "n_train", "seed"}, where);
        auto& c = s.hier;
        get(j, "n_leaves", c.n_leaves, where);
        get(j, "internal_nodes", c.internal_nodes, where);
        get(j, "p", c.p, where);
        get(j, "effect_scale", c.effect_scale, where);
        get(j, "effect_decay", c.effect_decay, where);
        get(j, "n_train", c.n_train, where);
        s.has_seed = j.contains("seed");
        get(j, "seed", c.seed, where);
        c.validate();
        break;
    }
    case StudyKind::custom:
        check_keys(j, {"id", "data", "tree"}, where);
        get(j, "data", s.custom.data, where);
        get(j, "tree", s.custom.tree, where);
        if (s.custom.data.empty()) throw Error("custom generator needs a 'data' file");
        break;
    }
    return s;
}

LearnerSpec learner_from(const json& j) {
    LearnerSpec l;
    if (j.is_string()) {
        l.name = j.get<std::string>();
        return l;
    }
    check_keys(j, {"name", "id", "n_trees", "mtry", "min_node_size", "bootstrap"}, "learner");
    if (!j.contains("name")) throw Error("learner needs a 'name'");
    get(j, "name", l.name, "learner");
    get(j, "id", l.id, "learner");
    get(j, "n_trees", l.forest.n_trees, "learner");
    get(j, "mtry", l.forest.mtry, "learner");
    get(j, "min_node_size", l.forest.min_node_size, "learner");
    get(j, "bootstrap", l.forest.bootstrap, "learner");
    return l;
}

MetricSpec metric_from(const json& j) {
    MetricSpec m;
    if (j.is_string()) {
        m.name = j.get<std::string>();
        return m;
    }
    check_keys(j, {"name", "weights", "costs"}, "metric");
    if (!j.contains("name")) throw Error("metric needs a 'name'");
    get(j, "name", m.name, "metric");
    get(j, "weights", m.weights, "metric");
    get(j, "costs", m.weights, "metric");
    return m;
}

ResamplingSpec resampling_from(const json& j, std::size_t index) {
    check_keys(j, {"name", "scheme", "params", "weighting"}, "resampling");
    ResamplingSpec r;
    if (!j.contains("scheme")) throw Error("resampling entry needs a 'scheme'");
    get(j, "scheme", r.scheme.scheme, "resampling");
    r.name = r.scheme.scheme;
    get(j, "name", r.name, "resampling");
    if (r.name.empty()) r.name = "r" + std::to_string(index + 1);
    if (r.name.find_first_of(",|\n") != std::string::npos) throw Error("resampling name must not contain ',' or '|'");
    if (j.contains("params")) {
        const json& p = j.at("params");
        if (!p.is_object()) throw Error("resampling params must be an object");
        for (const auto& [k, v] : p.items()) r.scheme.params[k] = text_of(v, k);
    }
    std::string w = "none";
    get(j, "weighting", w, "resampling");
    r.weighting = parse_weighting(w);
    return r;
}

json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(std::string("invalid JSON: ") + e.what());
    }
}

} // namespace

Setting parse_setting(StudyKind study, const std::string& json_text) {
    return setting_from(study, parse_json(json_text), 0);
}

ExperimentSpec parse_experiment(const std::string& json_text) {
    const json j = parse_json(json_text);
    check_keys(j, {"study", "generator", "learners", "metrics", "resampling", "replicates", "seed", "workers", "test_size",
                   "timing", "output"},
               "study config");
    ExperimentSpec spec;
    if (!j.contains("study")) throw Error("study config needs a 'study'");
    std::string study;
    get(j, "study", study, "study config");
    spec.study = parse_study(study);

    if (j.contains("generator")) {
        const json& g = j.at("generator");
        if (g.is_array()) {
            for (std::size_t i = 0; i < g.size(); ++i) spec.settings.push_back(setting_from(spec.study, g[i], i));
        } else {
            spec.settings.push_back(setting_from(spec.study, g, 0));
        }
    } else if (spec.study != StudyKind::custom) {
        spec.settings.push_back(setting_from(spec.study, json::object(), 0));
    }
    auto list = [&](const char* key, auto fn) {
        if (!j.contains(key)) return;
        const json& v = j.at(key);
        if (!v.is_array()) throw Error(std::string("'") + key + "' must be an array");
        for (std::size_t i = 0; i < v.size(); ++i) fn(v[i], i);
    };
    list("learners", [&](const json& v, std::size_t) { spec.learners.push_back(learner_from(v)); });
    list("metrics", [&](const json& v, std::size_t) { spec.metrics.push_back(metric_from(v)); });
    list("resampling", [&](const json& v, std::size_t i) { spec.resampling.push_back(resampling_from(v, i)); });
    get(j, "replicates", spec.replicates, "study config");
    get(j, "seed", spec.seed, "study config");
    get(j, "workers", spec.workers, "study config");
    get(j, "test_size", spec.test_size, "study config");
    get(j, "timing", spec.timing, "study config");
    get(j, "output", spec.output, "study config");
    spec.validate();
    return spec;
}

ExperimentSpec load_experiment(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_experiment(ss.str());
}

} // namespace geest

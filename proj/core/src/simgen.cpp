#include "geest/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "geest/error.hpp"

namespace geest {
namespace {

std::vector<std::string> names(int p) {
    std::vector<std::string> out;
    for (int j = 1; j <= p; ++j) out.push_back("x" + std::to_string(j));
    return out;
}

double std_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

} // namespace

// --- clustered ----------------------------------------------------------------

FeatureMode parse_feature_mode(const std::string& s) {
    if (s == "all_iid") return FeatureMode::all_iid;
    if (s == "x1_cluster_constant") return FeatureMode::x1_cluster_constant;
    if (s == "x2_cluster_constant") return FeatureMode::x2_cluster_constant;
    throw Error("unknown feature mode '" + s + "'");
}

std::string to_string(FeatureMode m) {
    switch (m) {
    case FeatureMode::all_iid: return "all_iid";
    case FeatureMode::x1_cluster_constant: return "x1_cluster_constant";
    case FeatureMode::x2_cluster_constant: return "x2_cluster_constant";
    }
    return "?";
}

void ClusteredConfig::validate() const {
    if (M < 2) throw Error("clustered: M must be at least 2");
    if (n_m < 1) throw Error("clustered: n_m must be at least 1");
    if (!(sigma2 >= 0.0 && sigma2_1 >= 0.0 && sigma2_2 >= 0.0)) throw Error("clustered: variances must be non-negative");
}

Dataset gen_clustered(const ClusteredConfig& cfg) {
    cfg.validate();
    constexpr int p = 5;
    const auto n = static_cast<std::size_t>(cfg.M) * static_cast<std::size_t>(cfg.n_m);
    Rng rng(cfg.seed);
    Dataset d;
    d.features = Matrix(n, p);
    d.feature_names = names(p);
    d.y.resize(n);
    d.cluster_id = std::vector<std::int64_t>(n);
    const int constant_col = cfg.feature_mode == FeatureMode::x1_cluster_constant   ? 0
                             : cfg.feature_mode == FeatureMode::x2_cluster_constant ? 1
                                                                                    : -1;
    const double s = std::sqrt(cfg.sigma2), s1 = std::sqrt(cfg.sigma2_1), s2 = std::sqrt(cfg.sigma2_2);
    std::size_t i = 0;
    for (int m = 1; m <= cfg.M; ++m) {
        const double b1 = s1 * std_normal(rng);
        const double b2 = s2 * std_normal(rng);
        const double shared = std_normal(rng);
        for (int r = 0; r < cfg.n_m; ++r, ++i) {
            auto x = d.features.row(i);
            for (int j = 0; j < p; ++j) x[static_cast<std::size_t>(j)] = j == constant_col ? shared : std_normal(rng);
            d.y[i] = x[0] + x[1] - x[2] + b1 + b2 * x[0] + s * std_normal(rng);
            (*d.cluster_id)[i] = m;
        }
    }
    d.validate();
    return d;
}

// --- unequal sampling probabilities ---------------------------------------------

void NsrsConfig::validate() const {
    if (N < 100) throw Error("nsrs: N must be at least 100");
    const auto ns = sample_size();
    if (ns < 1 || ns >= N) throw Error("nsrs: sample size must lie in [1, N)");
}

namespace {

void nsrs_rows(Rng& rng, Matrix& x, std::vector<double>& y) {
    std::gamma_distribution<double> gamma(0.1, 10.0);  // shape 0.1, rate 0.1
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto r = x.row(i);
        r[0] = gamma(rng);
        r[1] = gamma(rng);
        for (std::size_t j = 2; j < 5; ++j) r[j] = std_normal(rng);
        y[i] = 5.0 + r[0] + r[1] + std_normal(rng);
    }
}

void finish_nsrs(Dataset& d, bool misspecified) {
    d.feature_names = names(5);
    if (misspecified) {
        d.features = d.features.drop_column(1);
        d.feature_names.erase(d.feature_names.begin() + 1);
    }
}

} // namespace

NsrsPopulation gen_nsrs_population(const NsrsConfig& cfg) {
    cfg.validate();
    const auto N = static_cast<std::size_t>(cfg.N);
    Rng rng(cfg.seed);
    NsrsPopulation out;
    Dataset& d = out.population;
    d.features = Matrix(N, 5);
    d.y.resize(N);
    nsrs_rows(rng, d.features, d.y);

    std::vector<double> u(N);
    double total = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        do {
            u[i] = d.y[i] + std_normal(rng);
        } while (!(u[i] > 0.0));
        total += u[i];
    }
    const auto n = static_cast<double>(cfg.sample_size());
    std::vector<double> pi(N);
    for (std::size_t i = 0; i < N; ++i) pi[i] = n * u[i] / total;
    out.truncated = truncate_inclusion_probs(pi);

    finish_nsrs(d, cfg.misspecified);
    d.inclusion_prob = pi;
    d.population_size = cfg.N;
    out.design = {std::move(pi), cfg.N};
    d.validate();
    return out;
}

Dataset nsrs_draw(const NsrsConfig& cfg, std::size_t rows, std::uint64_t seed) {
    Rng rng(seed);
    Dataset d;
    d.features = Matrix(rows, 5);
    d.y.resize(rows);
    nsrs_rows(rng, d.features, d.y);
    finish_nsrs(d, cfg.misspecified);
    return d;
}

std::size_t truncate_inclusion_probs(std::vector<double>& pi) {
    constexpr double cap = 1.0 - 1e-9;
    const double target = std::accumulate(pi.begin(), pi.end(), 0.0);
    std::vector<char> capped(pi.size(), 0);
    std::size_t n_capped = 0;
    for (;;) {
        bool changed = false;
        for (std::size_t i = 0; i < pi.size(); ++i)
            if (!capped[i] && pi[i] >= 1.0) {
                capped[i] = 1;
                pi[i] = cap;
                ++n_capped;
                changed = true;
            }
        if (!changed) return n_capped;
        double free_total = 0.0;
        for (std::size_t i = 0; i < pi.size(); ++i)
            if (!capped[i]) free_total += pi[i];
        const double room = target - static_cast<double>(n_capped) * cap;
        if (!(free_total > 0.0) || !(room > 0.0)) throw Error("inclusion probabilities cannot be truncated below 1");
        for (std::size_t i = 0; i < pi.size(); ++i)
            if (!capped[i]) pi[i] *= room / free_total;
    }
}

std::vector<std::size_t> draw_pps_sample(const SamplingDesign& design, std::uint64_t seed) {
    const auto& pi = design.pi;
    if (pi.empty()) throw Error("pps: empty design");
    double total = 0.0;
    for (double p : pi) {
        if (!(p > 0.0) || p >= 1.0) throw Error("pps: inclusion probabilities must lie in (0,1)");
        total += p;
    }
    const double n_real = std::round(total);
    if (n_real < 1.0 || std::abs(total - n_real) > 1e-6 * n_real)
        throw Error("pps: inclusion probabilities must sum to an integer sample size");
    const auto n = static_cast<std::size_t>(n_real);

    Rng rng(seed);
    std::vector<std::size_t> perm(pi.size());
    std::iota(perm.begin(), perm.end(), 0);
    shuffle(perm.begin(), perm.end(), rng);
    const double u = uniform01(rng);

    // Unit j is taken when floor(C_j - u) steps up; pinning the last
    // cumulative sum to n makes the sample size exactly n.
    std::vector<std::size_t> out;
    out.reserve(n);
    const double scale = n_real / total;
    double cum = 0.0, prev_floor = std::floor(-u);
    for (std::size_t k = 0; k < perm.size(); ++k) {
        cum = k + 1 == perm.size() ? n_real : cum + pi[perm[k]] * scale;
        const double f = std::floor(cum - u);
        if (f > prev_floor) {
            if (f > prev_floor + 1.0) throw Error("pps: a unit crossed two selection points");
            out.push_back(perm[k]);
        }
        prev_floor = f;
    }
    std::sort(out.begin(), out.end());
    return out;
}

// --- concept drift ---------------------------------------------------------------

DriftLevel parse_drift_level(const std::string& s) {
    if (s == "none") return DriftLevel::none;
    if (s == "weak") return DriftLevel::weak;
    if (s == "medium") return DriftLevel::medium;
    if (s == "strong") return DriftLevel::strong;
    throw Error("unknown drift level '" + s + "'");
}

std::string to_string(DriftLevel d) {
    switch (d) {
    case DriftLevel::none: return "none";
    case DriftLevel::weak: return "weak";
    case DriftLevel::medium: return "medium";
    case DriftLevel::strong: return "strong";
    }
    return "?";
}

double drift_slope(DriftLevel d) {
    switch (d) {
    case DriftLevel::none: return 0.0;
    case DriftLevel::weak: return 0.5;
    case DriftLevel::medium: return 1.0;
    case DriftLevel::strong: return 2.0;
    }
    return 0.0;
}

void DriftConfig::validate() const {
    if (n_train < 1) throw Error("drift: n_train must be positive");
    if (seasons < 2) throw Error("drift: need at least two seasons");
    if (observed_seasons < 1 || observed_seasons > seasons) throw Error("drift: observed seasons must lie in [1, seasons]");
    if (!(1.0 + variance_drift > 0.0)) throw Error("drift: noise variance must stay positive on [0,1]");
}

DriftGenerator::DriftGenerator(const DriftConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

void DriftGenerator::draw_row(double t, Rng& rng, std::span<double> x, double& y) const {
    const double mu = drift_slope(cfg_.feature_drift) * t;
    for (std::size_t j = 0; j < 5; ++j) x[j] = (j < 3 ? mu : 0.0) + std_normal(rng);
    const double sd = std::sqrt(1.0 + cfg_.variance_drift * t);
    y = drift_slope(cfg_.label_drift) * t + 2.0 * x[0] - x[1] + 2.0 * x[2] + sd * std_normal(rng);
}

Dataset DriftGenerator::make(std::vector<double> times, Rng& rng) const {
    Dataset d;
    d.features = Matrix(times.size(), 5);
    d.feature_names = names(5);
    d.y.resize(times.size());
    std::vector<int> season(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        draw_row(times[i], rng, d.features.row(i), d.y[i]);
        season[i] = season_of(times[i], cfg_.seasons);
    }
    d.time = std::move(times);
    d.season = std::move(season);
    return d;
}

Dataset DriftGenerator::at(double t, std::size_t rows, std::uint64_t seed) const {
    if (!(t >= 0.0 && t <= 1.0)) throw Error("drift: time must lie in [0,1]");
    Rng rng(seed);
    return make(std::vector<double>(rows, t), rng);
}

Dataset DriftGenerator::over(double t_lo, double t_hi, std::size_t rows, std::uint64_t seed) const {
    if (!(t_lo >= 0.0 && t_hi <= 1.0 && t_lo < t_hi)) throw Error("drift: invalid time range");
    Rng rng(seed);
    std::vector<double> times(rows);
    for (double& t : times) t = t_lo + (t_hi - t_lo) * uniform01(rng);
    std::sort(times.begin(), times.end());
    return make(std::move(times), rng);
}

DriftData gen_drift(const DriftConfig& cfg) {
    DriftGenerator gen(cfg);
    const double t_end = static_cast<double>(cfg.observed_seasons) / cfg.seasons;
    Dataset observed = gen.over(0.0, t_end, static_cast<std::size_t>(cfg.n_train), cfg.seed);
    observed.validate();
    return {std::move(observed), std::move(gen)};
}

std::vector<TimePoint> default_drift_timepoints(const DriftConfig& cfg) {
    const double S = cfg.seasons;
    const double end = cfg.observed_seasons / S;
    std::vector<TimePoint> out{{"Els", end}};
    for (int k = 1; k <= 2 && cfg.observed_seasons + k <= cfg.seasons; ++k) {
        out.push_back({"M" + std::to_string(k) + "fus", (cfg.observed_seasons + k - 0.5) / S});
        out.push_back({"E" + std::to_string(k) + "fus", (cfg.observed_seasons + k) / S});
    }
    return out;
}

// --- hierarchical --------------------------------------------------------------

void HierConfig::validate() const {
    if (internal_nodes < 1) throw Error("hierarchical: need at least one internal node");
    const int ternary = n_leaves - internal_nodes - 1;
    if (ternary < 0 || ternary > internal_nodes)
        throw Error("hierarchical: " + std::to_string(n_leaves) + " leaves and " + std::to_string(internal_nodes) +
                    " internal nodes cannot be built from arities 2 and 3");
    if (p < 1) throw Error("hierarchical: p must be positive");
    if (!(effect_scale >= 0.0) || !(effect_decay > 0.0 && effect_decay < 1.0))
        throw Error("hierarchical: need effect_scale >= 0 and effect_decay in (0,1)");
    if (n_train < 1) throw Error("hierarchical: n_train must be positive");
}

CategoryTree generate_tree(const HierConfig& cfg) {
    cfg.validate();
    const int ternary = cfg.n_leaves - cfg.internal_nodes - 1;
    std::vector<int> arity(static_cast<std::size_t>(cfg.internal_nodes), 2);
    std::fill(arity.begin(), arity.begin() + ternary, 3);
    Rng rng(cfg.seed);
    shuffle(arity.begin(), arity.end(), rng);

    CategoryTree tree;
    std::vector<NodeId> open{CategoryTree::root};
    for (int a : arity) {
        const std::size_t pick = uniform_index(rng, open.size());
        const NodeId node = open[pick];
        open.erase(open.begin() + static_cast<std::ptrdiff_t>(pick));
        const std::string prefix = node == CategoryTree::root ? "" : tree.label(node) + ".";
        for (int c = 1; c <= a; ++c) open.push_back(tree.add_child(node, prefix + std::to_string(c)));
    }
    return tree;
}

std::vector<double> HierModel::child_probs(NodeId node, std::span<const double> x) const {
    const Matrix& beta = coefficients.at(static_cast<std::size_t>(node));
    std::vector<double> out(beta.rows());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < beta.rows(); ++c) {
        double eta = 0.0;
        for (std::size_t j = 0; j < beta.cols(); ++j) eta += beta(c, j) * x[j];
        out[c] = eta;
        top = std::max(top, eta);
    }
    double total = 0.0;
    for (double& v : out) total += v = std::exp(v - top);
    for (double& v : out) v /= total;
    return out;
}

HierModel make_hier_model(std::shared_ptr<const CategoryTree> tree, const HierConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    HierModel m;
    m.tree = tree;
    m.p = cfg.p;
    m.coefficients.resize(tree->size());
    Rng rng(seed);
    for (NodeId node : tree->internal_nodes()) {
        const double sd = cfg.effect_scale * std::pow(cfg.effect_decay, tree->depth(node));
        Matrix beta(tree->children(node).size(), static_cast<std::size_t>(cfg.p));
        for (std::size_t c = 0; c < beta.rows(); ++c)
            for (std::size_t j = 0; j < beta.cols(); ++j) beta(c, j) = sd * std_normal(rng);
        m.coefficients[static_cast<std::size_t>(node)] = std::move(beta);
    }
    return m;
}

Dataset gen_hier_data(const HierModel& model, std::size_t rows, std::uint64_t seed) {
    Rng rng(seed);
    Dataset d;
    d.features = Matrix(rows, static_cast<std::size_t>(model.p));
    d.feature_names = names(model.p);
    d.label_kind = LabelKind::hierarchical;
    d.tree = model.tree;
    d.classes.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        auto x = d.features.row(i);
        for (double& v : x) v = std_normal(rng);
        NodeId node = CategoryTree::root;
        while (!model.tree->is_leaf(node)) {
            const auto probs = model.child_probs(node, x);
            const double u = uniform01(rng);
            std::size_t c = 0;
            for (double cum = probs[0]; c + 1 < probs.size() && u >= cum; cum += probs[++c]) {
            }
            node = model.tree->children(node)[c];
        }
        d.classes[i] = node;
    }
    return d;
}

} // namespace geest

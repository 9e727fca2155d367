#include "geest/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "geest/error.hpp"
#include "geest/experiments.hpp"
#include "geest/plan.hpp"

namespace geest {
namespace {

struct SchemeFlags {
    std::string scheme;
    std::map<std::string, std::string> values;

    void add_to(CLI::App& app) {
        app.add_option("--scheme", scheme, "Resampling scheme")->check(CLI::IsMember(known_schemes(), [](std::string s) {
            std::replace(s.begin(), s.end(), '-', '_');
            return s;
        }));
        for (const char* flag : {"k", "repeats", "test-fraction", "group", "boundary", "buffer", "rows", "cols", "mode",
                                 "extent", "source", "radius", "gap", "test-seasons"})
            app.add_option(std::string("--") + flag, values[flag], std::string("Scheme parameter ") + flag);
    }

    SchemeSpec spec() const {
        SchemeSpec s{scheme, {}};
        for (const auto& [k, v] : values)
            if (!v.empty()) s.params[k] = v;
        return s;
    }
};

std::shared_ptr<const CategoryTree> load_tree(const std::string& path) {
    if (path.empty()) return nullptr;
    return std::make_shared<const CategoryTree>(CategoryTree::read_file(path));
}

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"Generalization-error estimation under non-i.i.d. data"};
    app.name("geest");
    app.require_subcommand(1);
    std::uint64_t seed = 1;

    // simulate
    auto* sim = app.add_subcommand("simulate", "Generate one dataset of a simulation study");
    std::string sim_study, sim_config, sim_out;
    sim->add_option("study", sim_study, "clustered | nsrs | drift | hierarchical")->required();
    sim->add_option("--config", sim_config, "JSON generator settings");
    sim->add_option("--out", sim_out, "Output CSV")->required();
    sim->add_option("--seed", seed, "Random seed");

    // split
    auto* split = app.add_subcommand("split", "Build a resampling plan for a dataset");
    SchemeFlags split_flags;
    std::string split_data, split_out, split_tree;
    split_flags.add_to(*split);
    split->get_option("--scheme")->required();
    split->add_option("--data", split_data, "Dataset CSV with role headers")->required();
    split->add_option("--tree", split_tree, "Category tree file for hierarchical labels");
    split->add_option("--out", split_out, "Output plan file")->required();
    split->add_option("--seed", seed, "Random seed");

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "Estimate the generalization error of a learner");
    SchemeFlags eval_flags;
    std::string eval_data, eval_plan, eval_tree, eval_design = "none";
    LearnerSpec learner;
    std::vector<std::string> eval_metrics;
    std::int64_t population_size = 0;
    eval_flags.add_to(*eval);
    eval->add_option("--data", eval_data, "Dataset CSV with role headers")->required();
    auto* plan_opt = eval->add_option("--plan", eval_plan, "Plan file written by `split`");
    plan_opt->excludes(eval->get_option("--scheme"));
    eval->add_option("--tree", eval_tree, "Category tree file for hierarchical labels");
    eval->add_option("--learner", learner.name, "ols | forest | topdown")->required();
    eval->add_option("--n-trees", learner.forest.n_trees, "Trees per forest");
    eval->add_option("--mtry", learner.forest.mtry, "Features tried per split (0 = default)");
    eval->add_option("--min-node-size", learner.forest.min_node_size, "Minimum node size (0 = default)");
    eval->add_option("--metric", eval_metrics, "Metric name (repeatable)")->required();
    eval->add_option("--design", eval_design, "Weight losses by the pi column: none | ht | hajek");
    eval->add_option("--population-size", population_size, "Population size N when the data file has none");
    eval->add_option("--seed", seed, "Random seed");

    // study
    auto* study = app.add_subcommand("study", "Run a simulation study from a JSON config");
    std::string study_config, study_out;
    int workers = 0;
    study->add_option("--config", study_config, "JSON study config")->required();
    study->add_option("--out", study_out, "Result CSV (defaults to the config's output)");
    study->add_option("--workers", workers, "Worker threads (overrides the config)");
    auto* study_seed = study->add_option("--seed", seed, "Master seed (overrides the config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "geest: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (*sim) {
            const StudyKind kind = parse_study(sim_study);
            const Setting setting = parse_setting(kind, sim_config.empty() ? "{}" : read_text(sim_config));
            SimulatedData out = simulate(kind, setting, seed);
            write_dataset(sim_out, out.data);
            if (out.tree) {
                std::ofstream t(sim_out + ".tree");
                if (!t) throw Error("cannot write tree file '" + sim_out + ".tree'");
                out.tree->write(t);
            }
        } else if (*split) {
            Dataset d = load_dataset(split_data, load_tree(split_tree));
            write_plan(split_out, build_plan(d, split_flags.spec(), seed));
        } else if (*eval) {
            Dataset d = load_dataset(eval_data, load_tree(eval_tree));
            if (population_size > 0) d.population_size = population_size;
            ResamplingPlan plan;
            if (!eval_plan.empty()) plan = read_plan_file(eval_plan);
            else if (!eval_flags.scheme.empty()) plan = build_plan(d, eval_flags.spec(), seed);
            else throw Error("evaluate needs --plan or --scheme");
            std::vector<MetricSpec> metrics;
            for (const auto& m : eval_metrics) metrics.push_back({m, {}});
            EstimateOptions opt;
            opt.weighting = parse_weighting(eval_design);
            opt.seed = seed;
            auto results = estimate_ge(d, plan, learner, metrics, opt);
            std::cout << "metric,estimate,splits,skipped\n";
            for (const auto& r : results) {
                std::ostringstream v;
                v.precision(17);
                v << r.value;
                std::cout << r.name << ',' << v.str() << ',' << r.params.at("B") << ',' << r.params.at("skipped") << '\n';
            }
        } else if (*study) {
            ExperimentSpec spec = load_experiment(study_config);
            if (workers > 0) spec.workers = workers;
            if (study_seed->count() > 0) spec.seed = seed;
            const std::string out = study_out.empty() ? spec.output : study_out;
            if (out.empty()) throw Error("study needs --out or an 'output' key in the config");
            write_result(out, run_study(spec));
        }
    } catch (const std::exception& e) {
        std::cerr << "geest: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

} // namespace geest

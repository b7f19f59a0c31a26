// bhcsvm: build, train, compress and evaluate hierarchical SVM classifiers.
//
//   bhcsvm generate --classes 6 --dim 8 --seed 7          -> dataset.csv
//   bhcsvm build-tree --probs 20,20,5,5,10,40              -> model.txt
//   bhcsvm train --model model.txt --data dataset.csv      -> model.txt
//   bhcsvm optimize --epsilon 2.5 [--exact]                -> model.opt.txt
//   bhcsvm sweep [--grid 0,0.5,1] [--floor 0.9]            -> sweep.csv
//   bhcsvm stats --model model.txt
//
// Exit codes: 0 success, 1 pipeline error (or no sweep point meets the
// accuracy floor), 2 usage error.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bhcsvm/bhcsvm.hpp"

namespace {

using namespace bhcsvm;

struct Globals {
    std::uint64_t seed = 7;
    std::string output;
    std::string format = "csv";
};

std::string output_or(const Globals& g, const char* fallback) { return g.output.empty() ? fallback : g.output; }

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

void print_stats(const TreeStats& s) {
    std::cout << "depth " << s.depth << " E(I) " << text::real_short(s.expected_instructions);
    if (s.initial_overlap_pct)
        std::cout << " stored " << s.stored_vectors << " distinct " << s.distinct_vectors << " overlap_pct "
                  << fmt(*s.initial_overlap_pct);
    std::cout << '\n';
}

/// Loads a tree; when untrained, trains it on the seeded split of `data`.
ClassifierTree ready_tree(const std::string& model_path, const Split& split, const TrainConfig& tcfg) {
    auto tree = load_tree(model_path);
    if (!is_trained(tree)) {
        tree = attach_classifiers(std::move(tree), split.train, tcfg);
        std::cout << "trained " << internal_nodes(tree).size() << " node models on " << split.train.size() << " samples\n";
    }
    return tree;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical SVM construction and support-vector compression"};
    app.set_config("--config", "", "TOML/INI file with the same keys as the flags");
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand name

    Globals g;
    app.add_option("--seed", g.seed, "Seed for data generation and the train/test split")->capture_default_str();
    app.add_option("--output", g.output, "Output path (each subcommand has its own default)");
    app.add_option("--format", g.format, "Report format")->check(CLI::IsMember({"csv", "text"}))->capture_default_str();

    TrainConfig tcfg;
    auto add_train_flags = [&](CLI::App* sub) {
        sub->add_option("--C", tcfg.C, "SVM regularization")->capture_default_str();
        sub->add_option("--tol", tcfg.kkt_tolerance, "KKT tolerance")->capture_default_str();
        sub->add_option("--max-passes", tcfg.max_passes, "SMO iteration budget in passes")->capture_default_str();
    };

    // generate
    SynthSpec synth;
    synth.n_classes = 6;
    synth.dimension = 8;
    auto* gen = app.add_subcommand("generate", "Write a seeded synthetic dataset");
    gen->add_option("--classes", synth.n_classes)->capture_default_str();
    gen->add_option("--dim", synth.dimension)->capture_default_str();
    gen->add_option("--per-class", synth.samples_per_class)->capture_default_str();
    gen->add_option("--separation", synth.separation)->capture_default_str();
    gen->add_option("--spread", synth.spread)->capture_default_str();

    // ingest
    std::string recording;
    WindowSpec window;
    std::optional<double> sample_rate;
    auto* ing = app.add_subcommand("ingest", "Window a sensor CSV into a feature dataset");
    ing->add_option("--input", recording, "CSV with header t,<channels>,label")->required();
    ing->add_option("--window", window.length, "Window length in samples")->capture_default_str();
    ing->add_option("--stride", window.stride, "Window stride in samples")->capture_default_str();
    ing->add_option("--sample-rate", sample_rate, "Override the rate inferred from timestamps");

    // build-tree
    std::vector<double> probs;
    std::optional<std::size_t> depth_limit;
    std::string data_path = "dataset.csv";
    std::string model_path = "model.txt";
    auto* build = app.add_subcommand("build-tree", "Build the tree shape from class probabilities");
    build->add_option("--probs", probs, "Class probabilities (percent or fractions)")->delimiter(',');
    build->add_option("--depth-limit", depth_limit, "Maximum tree depth L");
    build->add_option("--data", data_path, "Use this dataset's empirical class frequencies when --probs is absent");

    // train
    auto* train = app.add_subcommand("train", "Train every internal node on the seeded train split");
    train->add_option("--model", model_path)->capture_default_str();
    train->add_option("--data", data_path)->capture_default_str();
    add_train_flags(train);

    // optimize
    double epsilon = 0.0;
    bool exact = false;
    std::size_t exact_limit = default_exact_limit;
    auto* opt = app.add_subcommand("optimize", "Share support vectors within radius epsilon");
    opt->add_option("--epsilon", epsilon, "Substitution radius (feature units)")->required();
    opt->add_flag("--exact", exact, "Use the exact minimum cover");
    opt->add_option("--exact-limit", exact_limit, "Largest ISV count for the exact solver")->capture_default_str();
    opt->add_option("--model", model_path)->capture_default_str();
    opt->add_option("--data", data_path)->capture_default_str();
    add_train_flags(opt);

    // sweep
    SweepConfig scfg;
    auto* sweep = app.add_subcommand("sweep", "Savings/accuracy over a grid of radii");
    sweep->add_option("--grid", scfg.epsilon_grid, "Ascending radii (default: 21 points from the ISV spacing)")->delimiter(',');
    sweep->add_option("--floor", scfg.accuracy_floor, "Accuracy floor CA in [0,1]")->capture_default_str();
    sweep->add_flag("--exact", scfg.exact_oracle, "Use the exact cover when within the limit");
    sweep->add_option("--exact-limit", scfg.exact_limit)->capture_default_str();
    sweep->add_option("--model", model_path)->capture_default_str();
    sweep->add_option("--data", data_path)->capture_default_str();
    add_train_flags(sweep);

    // stats
    auto* stats = app.add_subcommand("stats", "Depth, E(I) and support-vector overlap of a model");
    stats->add_option("--model", model_path)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        const ReportFormat format = g.format == "text" ? ReportFormat::text : ReportFormat::csv;

        if (*gen) {
            synth.seed = g.seed;
            const auto ds = synth_generate(synth);
            const auto out = output_or(g, "dataset.csv");
            save_dataset(out, ds);
            std::cout << "generated " << ds.size() << " samples, " << ds.classes.size() << " classes, dim " << ds.dimension
                      << " -> " << out << '\n';
        } else if (*ing) {
            CsvSchema schema;
            schema.sample_rate = sample_rate;
            const auto rec = load_csv(recording, schema);
            const auto ds = extract_features(rec, window);
            const auto out = output_or(g, "dataset.csv");
            save_dataset(out, ds);
            std::cout << "ingested " << rec.length() << " samples at " << fmt(rec.sample_rate) << " Hz into " << ds.size()
                      << " windows (dim " << ds.dimension << ") -> " << out << '\n';
        } else if (*build) {
            std::vector<ActivityClass> classes;
            if (!probs.empty()) {
                classes = make_classes(probs);
            } else {
                classes = load_dataset(data_path).classes;
            }
            TreeBuildConfig bcfg;
            bcfg.depth_limit = depth_limit;
            const auto tree = build_tree(std::move(classes), bcfg);
            const auto out = output_or(g, "model.txt");
            save_tree(out, tree);
            std::cout << "tree " << topology_string(tree) << " -> " << out << '\n';
            print_stats(tree_stats(tree));
        } else if (*train) {
            const auto split = stratified_split(load_dataset(data_path), g.seed);
            auto tree = attach_classifiers(load_tree(model_path), split.train, tcfg);
            const auto out = output_or(g, model_path.c_str());
            save_tree(out, tree);
            for (int id : internal_nodes(tree)) {
                const auto& node = tree.nodes[static_cast<std::size_t>(id)];
                std::cout << "node " << id << " sv " << node.model->entries.size() << " train_accuracy "
                          << fmt(*node.train_accuracy) << '\n';
            }
            std::cout << "test accuracy " << fmt(accuracy(tree, split.test)) << " -> " << out << '\n';
        } else if (*opt) {
            const auto split = stratified_split(load_dataset(data_path), g.seed);
            const auto tree = ready_tree(model_path, split, tcfg);
            const auto problem = make_cover_problem(tree, split.train.features, epsilon);
            const auto sel = exact ? exact_moc(problem.coverage, exact_limit) : greedy_moc(problem.coverage);
            const auto rebuilt = rebuild_models(tree, problem, sel, split.train);
            const auto s = savings(problem.isvs, sel);
            const auto out = output_or(g, "model.opt.txt");
            save_tree(out, rebuilt, ModelLayout::pooled);
            std::cout << "epsilon " << text::real_short(epsilon) << " stored " << s.initial_stored << " -> " << s.final_stored
                      << " savings_pct " << fmt(s.savings_pct) << " overlap " << s.overlap_count << " accuracy "
                      << fmt(accuracy(tree, split.test)) << " -> " << fmt(accuracy(rebuilt, split.test)) << " -> " << out
                      << '\n';
        } else if (*sweep) {
            scfg.split_seed = g.seed;
            const auto split = stratified_split(load_dataset(data_path), g.seed);
            const auto tree = ready_tree(model_path, split, tcfg);
            const auto report = sweep_epsilon(tree, split, scfg);
            const auto out = output_or(g, format == ReportFormat::csv ? "sweep.csv" : "sweep.txt");
            emit_report(report, out, format);
            std::size_t meeting = 0;
            for (const auto& r : report.records) meeting += r.meets_floor ? 1 : 0;
            std::cout << "sweep " << report.records.size() << " radii, baseline accuracy " << fmt(report.baseline_accuracy)
                      << ", " << meeting << " meet floor " << fmt(scfg.accuracy_floor) << " -> " << out << '\n';
            if (!any_meets_floor(report)) {
                std::cerr << "error: no radius meets the accuracy floor\n";
                return 1;
            }
        } else if (*stats) {
            const auto tree = load_tree(model_path);
            std::cout << "tree " << topology_string(tree) << '\n';
            const auto s = tree_stats(tree);
            print_stats(s);
            if (format == ReportFormat::text)
                for (const auto& n : s.nodes) {
                    std::cout << "node " << n.node << " sv " << n.support_vectors;
                    if (n.train_accuracy) std::cout << " train_accuracy " << fmt(*n.train_accuracy);
                    std::cout << '\n';
                }
        }
    } catch (const bhcsvm::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

// Command-line front end: zero-shot label propagation over a semantic
// class graph, with an optional hierarchical multi-loss feature learner.

#include "semprop/semprop.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

namespace {

using namespace semprop;
namespace fs = std::filesystem;

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> parts;
    std::string part;
    std::stringstream ss(s);
    while (std::getline(ss, part, ',')) parts.push_back(part);
    return parts;
}

std::vector<int> parse_int_list(const std::string& s, const std::string& key) {
    std::vector<int> out;
    for (const auto& p : split_list(s)) {
        try {
            out.push_back(std::stoi(p));
        } catch (...) {
            throw Error("config: cannot parse integer '" + p + "' for " + key);
        }
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& s, const std::string& key) {
    std::vector<double> out;
    for (const auto& p : split_list(s))
        out.push_back(semprop::detail::parse_double(p, "config key " + key));
    return out;
}

bool parse_bool(const std::string& s, const std::string& key) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw Error("config: cannot parse boolean '" + s + "' for " + key);
}

PiMode parse_pi_mode(const std::string& s) {
    if (s == "literal") return PiMode::paper_literal;
    if (s == "stationary") return PiMode::stationary;
    throw Error("pi-mode must be 'literal' or 'stationary', got '" + s + "'");
}

ArgmaxMode parse_argmax(const std::string& s) {
    if (s == "unseen") return ArgmaxMode::unseen_only;
    if (s == "all") return ArgmaxMode::all_classes;
    throw Error("argmax must be 'unseen' or 'all', got '" + s + "'");
}

DomainTap parse_domain_tap(const std::string& s) {
    if (s == "head") return DomainTap::species_penultimate;
    if (s == "trunk") return DomainTap::species_trunk_tap;
    throw Error("net.domain-tap must be 'head' or 'trunk', got '" + s + "'");
}

struct CliState {
    ExperimentConfig cfg;
    TuneGrid grid;
    bool standardize = false;
    // Subcommand-specific inputs.
    std::string seeds_path;
    std::string net_path;
    SynthConfig synth;
    // String mirrors for enum-valued flags.
    std::string pi_mode_str = "literal";
    std::string argmax_str = "unseen";
    std::string domain_tap_str = "head";
};

// Flat `key = value` configuration file; CLI flags override its values.
void apply_config_file(const std::string& path, CliState& st) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            const auto b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error("config '" + path + "' line " + std::to_string(lineno) +
                        ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        auto& cfg = st.cfg;
        if (key == "features") cfg.features_path = value;
        else if (key == "vectors") cfg.vectors_path = value;
        else if (key == "hierarchy") cfg.hierarchy_path = value;
        else if (key == "splits") cfg.splits_path = value;
        else if (key == "out") cfg.output_dir = value;
        else if (key == "folds") cfg.n_folds = std::stoi(value);
        else if (key == "k1") cfg.k1 = std::stoi(value);
        else if (key == "k2") cfg.k2 = std::stoi(value);
        else if (key == "eta") cfg.eta = semprop::detail::parse_double(value, key);
        else if (key == "alpha") cfg.alpha = semprop::detail::parse_double(value, key);
        else if (key == "c") cfg.c = semprop::detail::parse_double(value, key);
        else if (key == "pi-mode") { st.pi_mode_str = value; cfg.pi_mode = parse_pi_mode(value); }
        else if (key == "argmax") { st.argmax_str = value; cfg.argmax = parse_argmax(value); }
        else if (key == "zscore") cfg.zscore_vectors = parse_bool(value, key);
        else if (key == "standardize") st.standardize = parse_bool(value, key);
        else if (key == "seed") cfg.seed = std::stoull(value);
        else if (key == "train-net" || key == "net.enabled") cfg.net.enabled = parse_bool(value, key);
        else if (key == "net.trunk") cfg.net.trunk_widths = parse_int_list(value, key);
        else if (key == "net.taps") {
            const auto taps = parse_int_list(value, key);
            if (taps.size() != 3) throw Error("config: net.taps needs exactly three entries");
            cfg.net.taps = {taps[0], taps[1], taps[2]};
        }
        else if (key == "net.family-hidden") cfg.net.family_hidden = std::stoi(value);
        else if (key == "net.genus-hidden") cfg.net.genus_hidden = std::stoi(value);
        else if (key == "net.species-hidden") cfg.net.species_hidden = std::stoi(value);
        else if (key == "net.domain-hidden") cfg.net.domain_hidden = parse_int_list(value, key);
        else if (key == "net.domain-tap") { st.domain_tap_str = value; cfg.net.domain_tap = parse_domain_tap(value); }
        else if (key == "net.epochs") cfg.net.epochs = std::stoi(value);
        else if (key == "mu-f") cfg.net.train.mu_f = semprop::detail::parse_double(value, key);
        else if (key == "mu-g") cfg.net.train.mu_g = semprop::detail::parse_double(value, key);
        else if (key == "mu-d") cfg.net.train.mu_d = semprop::detail::parse_double(value, key);
        else if (key == "net.lr") cfg.net.train.learning_rate = semprop::detail::parse_double(value, key);
        else if (key == "net.momentum") cfg.net.train.momentum = semprop::detail::parse_double(value, key);
        else if (key == "net.batch") cfg.net.train.batch_size = std::stoi(value);
        else if (key == "net.seed") cfg.net.train.seed = std::stoull(value);
        else if (key == "grid.k1") st.grid.k1 = parse_int_list(value, key);
        else if (key == "grid.k2") st.grid.k2 = parse_int_list(value, key);
        else if (key == "grid.alpha") st.grid.alpha = parse_double_list(value, key);
        else throw Error("config '" + path + "' line " + std::to_string(lineno) +
                         ": unknown key '" + key + "'");
    }
}

void add_common_flags(CLI::App* cmd, CliState& st) {
    cmd->add_option("--config", "flat key = value config file (flags win)");
    cmd->add_option("--k1", st.cfg.k1, "seen-neighbor count per seen class");
    cmd->add_option("--k2", st.cfg.k2, "unseen-neighbor count per seen class");
    cmd->add_option("--eta", st.cfg.eta, "teleport normalization weight");
    cmd->add_option("--alpha", st.cfg.alpha, "propagation strength in [0,1)");
    cmd->add_option("--c", st.cfg.c, "logistic regression data-term weight");
    cmd->add_option("--mu-f", st.cfg.net.train.mu_f, "family loss weight");
    cmd->add_option("--mu-g", st.cfg.net.train.mu_g, "genus loss weight");
    cmd->add_option("--mu-d", st.cfg.net.train.mu_d, "domain loss weight");
    cmd->add_option("--pi-mode", st.pi_mode_str, "row-mass mode: literal|stationary")
        ->check(CLI::IsMember({"literal", "stationary"}));
    cmd->add_option("--argmax", st.argmax_str, "prediction restriction: unseen|all")
        ->check(CLI::IsMember({"unseen", "all"}));
    cmd->add_option("--seed", st.cfg.seed, "master seed");
    cmd->add_option("--out", st.cfg.output_dir, "output directory");
    cmd->add_option("--features", st.cfg.features_path, "feature CSV path");
    cmd->add_option("--vectors", st.cfg.vectors_path, "semantic vector CSV path");
    cmd->add_option("--hierarchy", st.cfg.hierarchy_path, "hierarchy CSV path");
    cmd->add_option("--splits", st.cfg.splits_path, "seen/unseen split JSON path");
    cmd->add_flag("--zscore", st.cfg.zscore_vectors, "z-score semantic vectors");
}

fs::path ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory '" + dir + "': " + ec.message());
    return fs::path(dir);
}

SemanticSpace space_from_config(const CliState& st) {
    if (st.cfg.vectors_path.empty()) throw Error("--vectors is required");
    if (st.cfg.splits_path.empty()) throw Error("--splits is required");
    const auto table = load_semantic_vectors(st.cfg.vectors_path);
    const auto [seen, unseen] = load_split(st.cfg.splits_path);
    SemanticSpace space = make_space(seen, unseen, table.vectors);
    if (st.cfg.zscore_vectors) space = zscore_vectors(space);
    return space;
}

int cmd_run(CliState& st) {
    if (st.cfg.features_path.empty()) throw Error("run: --features is required");
    if (st.cfg.vectors_path.empty()) throw Error("run: --vectors is required");
    const EvalReport report = run_experiment(st.cfg);
    emit_report(report, st.cfg.output_dir);
    for (const auto& f : report.folds)
        std::cout << "fold " << f.index << ": accuracy " << f.accuracy << " (" << f.n_test
                  << " test images, " << f.split.unseen.size() << " unseen classes)\n";
    if (report.has_mean) std::cout << "mean accuracy: " << report.mean_accuracy << "\n";
    std::cout << "report written to " << (fs::path(st.cfg.output_dir) / "report.json").string()
              << "\n";
    return 0;
}

int cmd_build_graph(CliState& st) {
    const auto out = ensure_out_dir(st.cfg.output_dir);
    const SemanticSpace space = space_from_config(st);
    std::vector<std::string> warnings;
    const ClassGraph graph = build_weight_matrix(space, st.cfg.k1, st.cfg.k2, &warnings);
    save_weight_matrix((out / "graph.csv").string(), graph);
    json meta;
    meta["k1"] = graph.k1;
    meta["k2"] = graph.k2;
    meta["class_order"] = graph.class_order;
    meta["seen_count"] = graph.seen_count;
    meta["warnings"] = warnings;
    auto mf = semprop::detail::open_out((out / "graph_meta.json").string());
    mf << meta.dump(2) << "\n";
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "graph over " << graph.total() << " classes written to "
              << (out / "graph.csv").string() << "\n";
    return 0;
}

int cmd_propagate(CliState& st) {
    if (st.seeds_path.empty()) throw Error("propagate: --seeds is required");
    const auto out = ensure_out_dir(st.cfg.output_dir);
    const SemanticSpace space = space_from_config(st);
    const ScoreMatrix seeds = load_score_matrix(st.seeds_path, space.seen_ids, space.unseen_ids);
    const ClassGraph graph = build_weight_matrix(space, st.cfg.k1, st.cfg.k2);
    const PropagationOperator op =
        build_operator(graph, st.cfg.alpha, st.cfg.eta, st.cfg.pi_mode);
    SolveInfo info;
    const ScoreMatrix scores = propagate_closed(seeds, op, &info);
    save_score_matrix((out / "scores.csv").string(), scores);

    const auto labels = predict_labels(scores, st.cfg.argmax);
    auto pf = semprop::detail::open_out((out / "predictions.csv").string());
    pf << "image_id,predicted_class\n";
    for (std::size_t i = 0; i < labels.size(); ++i)
        pf << scores.image_ids[i] << ',' << labels[i] << "\n";

    OperatorDiagnostics diag = operator_diagnostics(op);
    diag.fixed_point_residual = info.residual;
    auto df = semprop::detail::open_out((out / "diagnostics.json").string());
    df << diagnostics_to_json(diag).dump(2) << "\n";
    std::cout << "propagated " << scores.rows() << " images over " << scores.classes()
              << " classes; outputs in " << out.string() << "\n";
    return 0;
}

int cmd_train_seeder(CliState& st) {
    if (st.cfg.features_path.empty()) throw Error("train-seeder: --features is required");
    if (st.cfg.splits_path.empty()) throw Error("train-seeder: --splits is required");
    const auto out = ensure_out_dir(st.cfg.output_dir);
    const auto [seen, unseen] = load_split(st.cfg.splits_path);
    const FeatureDataset all = load_features(st.cfg.features_path);

    std::unordered_set<ClassId> seen_set(seen.begin(), seen.end());
    FeatureDataset train = all.filter([&](const ClassId& l) { return seen_set.count(l) > 0; });
    FeatureDataset test = all.filter([&](const ClassId& l) { return !seen_set.count(l); });
    if (st.standardize && train.size() > 0) {
        semprop::detail::Standardizer stdz;
        stdz.fit(train.features);
        train.features = stdz.apply(train.features);
        if (test.size() > 0) test.features = stdz.apply(test.features);
    }
    const LogRegModel model = train_logreg(train, seen, st.cfg.c);
    save_logreg_model((out / "model.json").string(), model);
    std::cout << "seeder trained on " << train.size() << " rows over " << seen.size()
              << " seen classes; model in " << (out / "model.json").string() << "\n";
    if (test.size() > 0) {
        const ScoreMatrix seeds = seed_matrix(test, model, unseen);
        save_score_matrix((out / "seeds.csv").string(), seeds);
        std::cout << "seed matrix for " << test.size() << " test rows in "
                  << (out / "seeds.csv").string() << "\n";
    }
    return 0;
}

int cmd_train_net(CliState& st) {
    if (st.cfg.features_path.empty()) throw Error("train-net: --features is required");
    if (st.cfg.hierarchy_path.empty()) throw Error("train-net: --hierarchy is required");
    const auto out = ensure_out_dir(st.cfg.output_dir);
    const FeatureDataset all = load_features(st.cfg.features_path);
    const Hierarchy hier = load_hierarchy(st.cfg.hierarchy_path);

    // With a split file, unseen-labeled rows become unlabeled target-domain
    // samples; otherwise every labeled row is source and unlabeled rows are
    // the target domain.
    std::unordered_set<ClassId> source_classes;
    if (!st.cfg.splits_path.empty()) {
        for (const auto& id : load_split(st.cfg.splits_path).first) source_classes.insert(id);
    } else {
        for (const auto& l : all.labels)
            if (!l.empty()) source_classes.insert(l);
    }
    FeatureDataset source =
        all.filter([&](const ClassId& l) { return !l.empty() && source_classes.count(l) > 0; });
    FeatureDataset target =
        all.filter([&](const ClassId& l) { return l.empty() || !source_classes.count(l); });
    for (auto& l : target.labels) l.clear();
    if (source.size() == 0) throw Error("train-net: no labeled source rows");

    std::vector<ClassId> source_species;
    for (const auto& sp : hier.species_ids)
        if (source_classes.count(sp)) source_species.push_back(sp);
    const Hierarchy sub = semprop::detail::sub_hierarchy(hier, source_species);

    HierNetShape shape;
    shape.input_dim = static_cast<int>(source.dim());
    shape.trunk_widths = st.cfg.net.trunk_widths;
    shape.taps = st.cfg.net.taps;
    shape.family_hidden = st.cfg.net.family_hidden;
    shape.genus_hidden = st.cfg.net.genus_hidden;
    shape.species_hidden = st.cfg.net.species_hidden;
    shape.family_classes = static_cast<int>(sub.family_ids.size());
    shape.genus_classes = static_cast<int>(sub.genus_ids.size());
    shape.species_classes = static_cast<int>(sub.species_ids.size());
    shape.domain_hidden = st.cfg.net.domain_hidden;
    shape.domain_tap = st.cfg.net.domain_tap;

    HierNetParams params = init_params(shape, st.cfg.net.train.seed);
    auto samples = make_samples(source, sub, 0);
    for (auto& s : make_samples(target, sub, 1)) samples.push_back(std::move(s));

    const double initial = mean_hierarchical_loss(samples, params, st.cfg.net.train);
    train_network(samples, params, st.cfg.net.train, st.cfg.net.epochs);
    const double final_loss = mean_hierarchical_loss(samples, params, st.cfg.net.train);
    save_hiernet((out / "net.json").string(), params);

    json meta;
    meta["species"] = sub.species_ids;
    meta["genera"] = sub.genus_ids;
    meta["families"] = sub.family_ids;
    meta["epochs"] = st.cfg.net.epochs;
    meta["initial_hierarchical_loss"] = initial;
    meta["final_hierarchical_loss"] = final_loss;
    auto mf = semprop::detail::open_out((out / "net_meta.json").string());
    mf << meta.dump(2) << "\n";
    std::cout << "network trained for " << st.cfg.net.epochs << " epochs; mean hierarchical loss "
              << initial << " -> " << final_loss << "; parameters in "
              << (out / "net.json").string() << "\n";
    return 0;
}

int cmd_extract_features(CliState& st) {
    if (st.net_path.empty()) throw Error("extract-features: --net is required");
    if (st.cfg.features_path.empty()) throw Error("extract-features: --features is required");
    const auto out = ensure_out_dir(st.cfg.output_dir);
    const HierNetParams params = load_hiernet(st.net_path);
    FeatureDataset data = load_features(st.cfg.features_path);
    Matrix mapped(data.size(), extract_features(Vector::Zero(data.dim()), params).size());
    for (Eigen::Index i = 0; i < data.size(); ++i)
        mapped.row(i) = extract_features(data.features.row(i).transpose(), params);
    data.features = std::move(mapped);
    save_features((out / "features_extracted.csv").string(), data);
    std::cout << "extracted " << data.dim() << "-d features for " << data.size() << " rows into "
              << (out / "features_extracted.csv").string() << "\n";
    return 0;
}

int cmd_tune(CliState& st) {
    if (st.cfg.features_path.empty()) throw Error("tune: --features is required");
    if (st.cfg.vectors_path.empty()) throw Error("tune: --vectors is required");
    const auto out = ensure_out_dir(st.cfg.output_dir);
    const TuneResult result = tune_hyperparameters(st.cfg, st.grid);
    auto tf = semprop::detail::open_out((out / "tune.json").string());
    tf << tune_to_json(result).dump(2) << "\n";
    const auto& best = result.entries[static_cast<std::size_t>(result.best)];
    std::cout << "best: k1=" << best.k1 << " k2=" << best.k2 << " alpha=" << best.alpha
              << " (validation accuracy " << best.accuracy << "); grid in "
              << (out / "tune.json").string() << "\n";
    return 0;
}

int cmd_make_folds(CliState& st) {
    if (st.cfg.vectors_path.empty()) throw Error("make-folds: --vectors is required");
    const auto out = ensure_out_dir(st.cfg.output_dir);
    const auto table = load_semantic_vectors(st.cfg.vectors_path);
    const auto folds = make_folds(table.ids, st.cfg.n_folds, st.cfg.seed);
    for (std::size_t i = 0; i < folds.size(); ++i)
        save_split((out / ("split_fold" + std::to_string(i) + ".json")).string(), folds[i].seen,
                   folds[i].unseen);
    std::cout << folds.size() << " fold splits written to " << out.string() << "\n";
    return 0;
}

int cmd_gen_data(CliState& st) {
    const auto out = ensure_out_dir(st.cfg.output_dir);
    st.synth.seed = st.cfg.seed ? st.cfg.seed : st.synth.seed;
    const SynthData data = make_synthetic(st.synth);
    save_features((out / "features.csv").string(), data.images);
    save_semantic_vectors((out / "vectors.csv").string(), data.species_order,
                          data.semantic_vectors);
    save_hierarchy((out / "hierarchy.csv").string(), data.hierarchy);
    std::cout << "synthetic dataset: " << data.species_order.size() << " species, "
              << data.images.size() << " images, dim " << data.images.dim() << "; files in "
              << out.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CliState st;

    // The config file seeds the defaults; parsed flags then overwrite them.
    try {
        for (int i = 1; i < argc; ++i) {
            const std::string arg = argv[i];
            if (arg == "--config" && i + 1 < argc) apply_config_file(argv[i + 1], st);
            else if (arg.rfind("--config=", 0) == 0) apply_config_file(arg.substr(9), st);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    CLI::App app{"Zero-shot classification by label propagation over a semantic class graph"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "full cross-validation pipeline");
    add_common_flags(run, st);
    run->add_option("--folds", st.cfg.n_folds, "number of class folds");
    run->add_flag("--train-net", st.cfg.net.enabled, "train the feature network per fold");
    run->add_option("--net-epochs", st.cfg.net.epochs, "network training epochs");

    auto* build_graph = app.add_subcommand("build-graph", "construct the class graph");
    add_common_flags(build_graph, st);

    auto* propagate = app.add_subcommand("propagate", "propagate a seed matrix over the graph");
    add_common_flags(propagate, st);
    propagate->add_option("--seeds", st.seeds_path, "seed score CSV");

    auto* train_seeder = app.add_subcommand("train-seeder", "train the logistic-regression seeder");
    add_common_flags(train_seeder, st);
    train_seeder->add_flag("--standardize", st.standardize, "z-score features on the training rows");

    auto* train_net = app.add_subcommand("train-net", "train the hierarchical feature network");
    add_common_flags(train_net, st);
    train_net->add_option("--net-epochs", st.cfg.net.epochs, "network training epochs");

    auto* extract = app.add_subcommand("extract-features", "map features through a trained network");
    add_common_flags(extract, st);
    extract->add_option("--net", st.net_path, "trained network JSON");

    auto* tune = app.add_subcommand("tune", "grid sweep on a nested split of the seen classes");
    add_common_flags(tune, st);
    tune->add_option("--grid-k1", st.grid.k1, "k1 grid")->delimiter(',');
    tune->add_option("--grid-k2", st.grid.k2, "k2 grid")->delimiter(',');
    tune->add_option("--grid-alpha", st.grid.alpha, "alpha grid")->delimiter(',');

    auto* make_folds_cmd = app.add_subcommand("make-folds", "write seeded cross-validation splits");
    add_common_flags(make_folds_cmd, st);
    make_folds_cmd->add_option("--folds", st.cfg.n_folds, "number of class folds");

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic hierarchical dataset");
    add_common_flags(gen, st);
    gen->add_option("--families", st.synth.families, "family count");
    gen->add_option("--genera-per-family", st.synth.genera_per_family, "genera per family");
    gen->add_option("--species-per-genus", st.synth.species_per_genus, "species per genus");
    gen->add_option("--dim", st.synth.dim, "feature/semantic dimension");
    gen->add_option("--images-per-class", st.synth.images_per_class, "images per species");
    gen->add_option("--feature-noise", st.synth.feature_noise, "image scatter");
    gen->add_option("--semantic-noise", st.synth.semantic_noise, "semantic vector noise");

    CLI11_PARSE(app, argc, argv);

    try {
        st.cfg.pi_mode = parse_pi_mode(st.pi_mode_str);
        st.cfg.argmax = parse_argmax(st.argmax_str);
        st.cfg.net.domain_tap = parse_domain_tap(st.domain_tap_str);

        if (run->parsed()) return cmd_run(st);
        if (build_graph->parsed()) return cmd_build_graph(st);
        if (propagate->parsed()) return cmd_propagate(st);
        if (train_seeder->parsed()) return cmd_train_seeder(st);
        if (train_net->parsed()) return cmd_train_net(st);
        if (extract->parsed()) return cmd_extract_features(st);
        if (tune->parsed()) return cmd_tune(st);
        if (make_folds_cmd->parsed()) return cmd_make_folds(st);
        if (gen->parsed()) return cmd_gen_data(st);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

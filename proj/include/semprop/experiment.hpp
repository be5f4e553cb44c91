#pragma once

#include "semprop/folds.hpp"
#include "semprop/hiernet.hpp"
#include "semprop/io.hpp"
#include "semprop/propagation.hpp"
#include "semprop/seeder.hpp"
#include "semprop/semantic_graph.hpp"
#include "semprop/types.hpp"

#include <filesystem>
#include <map>
#include <unordered_set>

namespace semprop {

struct NetConfig {
    bool enabled = false;
    std::vector<int> trunk_widths{32, 32, 32};
    std::array<int, 3> taps{1, 2, 3};
    int family_hidden = 16, genus_hidden = 16, species_hidden = 16;
    std::vector<int> domain_hidden{16, 8};
    DomainTap domain_tap = DomainTap::species_penultimate;
    int epochs = 150;
    TrainConfig train;
};

struct ExperimentConfig {
    std::string features_path;
    std::string vectors_path;
    std::string hierarchy_path;  // required only when the net stage runs
    std::string splits_path;     // optional: single fold from file
    std::string output_dir = "out";
    int n_folds = 4;
    int k1 = 5;
    int k2 = 3;
    double eta = 0.001;
    double alpha = 0.8;
    double c = 0.01;
    PiMode pi_mode = PiMode::paper_literal;
    ArgmaxMode argmax = ArgmaxMode::unseen_only;
    bool zscore_vectors = false;
    std::uint64_t seed = 0;
    NetConfig net;
};

struct FoldOutcome {
    int index = 0;
    FoldSplit split;
    double accuracy = 0.0;
    Eigen::Index n_test = 0;
    std::vector<std::string> image_ids;
    std::vector<ClassId> true_labels;
    std::vector<ClassId> predicted;
    std::map<ClassId, std::map<ClassId, int>> confusion;  // true -> predicted -> count
    OperatorDiagnostics diagnostics;
    std::vector<std::string> warnings;
};

struct EvalReport {
    std::vector<FoldOutcome> folds;
    bool has_mean = false;
    double mean_accuracy = 0.0;
    json config_echo;
};

inline json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["features"] = cfg.features_path;
    j["vectors"] = cfg.vectors_path;
    j["hierarchy"] = cfg.hierarchy_path;
    j["splits"] = cfg.splits_path;
    j["out"] = cfg.output_dir;
    j["folds"] = cfg.n_folds;
    j["k1"] = cfg.k1;
    j["k2"] = cfg.k2;
    j["eta"] = cfg.eta;
    j["alpha"] = cfg.alpha;
    j["c"] = cfg.c;
    j["pi_mode"] = cfg.pi_mode == PiMode::paper_literal ? "literal" : "stationary";
    j["argmax"] = cfg.argmax == ArgmaxMode::unseen_only ? "unseen" : "all";
    j["zscore"] = cfg.zscore_vectors;
    j["seed"] = cfg.seed;
    json net;
    net["enabled"] = cfg.net.enabled;
    net["trunk"] = cfg.net.trunk_widths;
    net["taps"] = cfg.net.taps;
    net["family_hidden"] = cfg.net.family_hidden;
    net["genus_hidden"] = cfg.net.genus_hidden;
    net["species_hidden"] = cfg.net.species_hidden;
    net["domain_hidden"] = cfg.net.domain_hidden;
    net["domain_tap"] = cfg.net.domain_tap == DomainTap::species_penultimate
                            ? "species_penultimate"
                            : "species_trunk_tap";
    net["epochs"] = cfg.net.epochs;
    net["mu_f"] = cfg.net.train.mu_f;
    net["mu_g"] = cfg.net.train.mu_g;
    net["mu_d"] = cfg.net.train.mu_d;
    net["learning_rate"] = cfg.net.train.learning_rate;
    net["momentum"] = cfg.net.train.momentum;
    net["batch_size"] = cfg.net.train.batch_size;
    j["net"] = std::move(net);
    return j;
}

namespace detail {

/// Per-column standardization fitted on the training rows; the pipeline
/// owns preprocessing so the seeder sees well-scaled inputs.
struct Standardizer {
    Vector mean, scale;

    void fit(const Matrix& X) {
        mean = X.colwise().mean();
        Vector var = (X.rowwise() - mean.transpose()).array().square().colwise().mean();
        scale.resize(var.size());
        for (Eigen::Index j = 0; j < var.size(); ++j)
            scale[j] = var[j] > 0.0 ? 1.0 / std::sqrt(var[j]) : 1.0;
    }

    Matrix apply(const Matrix& X) const {
        return (X.rowwise() - mean.transpose()).array().rowwise() * scale.transpose().array();
    }
};

template <typename F>
auto run_stage(int fold, const char* name, F&& f) {
    try {
        return f();
    } catch (const std::exception& e) {
        throw Error("fold " + std::to_string(fold) + ", stage " + name + ": " + e.what());
    }
}

inline Hierarchy sub_hierarchy(const Hierarchy& full, const std::vector<ClassId>& species) {
    Hierarchy sub;
    for (const auto& sp : species) {
        const auto genus = full.genus_of(sp);
        sub.add(sp, genus, full.family_of_genus.at(genus));
    }
    return sub;
}

}  // namespace detail

/// Inputs shared by every fold; loaded once from the configured paths.
struct ExperimentInputs {
    VectorTable vectors;
    FeatureDataset images;
    Hierarchy hierarchy;
    bool has_hierarchy = false;
};

inline ExperimentInputs load_inputs(const ExperimentConfig& cfg) {
    ExperimentInputs inputs;
    inputs.vectors = load_semantic_vectors(cfg.vectors_path);
    inputs.images = load_features(cfg.features_path);
    if (!cfg.hierarchy_path.empty()) {
        inputs.hierarchy = load_hierarchy(cfg.hierarchy_path);
        inputs.has_hierarchy = true;
    }
    if (cfg.net.enabled && !inputs.has_hierarchy)
        throw Error("network training requires a hierarchy file");
    return inputs;
}

/// Runs one cross-validation fold of the full pipeline: optional network
/// training and feature extraction, seeding, graph construction, closed-form
/// propagation, prediction, and scoring.
inline FoldOutcome run_fold(const ExperimentConfig& cfg, const ExperimentInputs& inputs,
                            const FoldSplit& split, int fold_index) {
    using detail::run_stage;
    FoldOutcome outcome;
    outcome.index = fold_index;
    outcome.split = split;

    const std::unordered_set<ClassId> seen_set(split.seen.begin(), split.seen.end());
    const std::unordered_set<ClassId> unseen_set(split.unseen.begin(), split.unseen.end());

    auto [train, test] = run_stage(fold_index, "ingest", [&] {
        FeatureDataset train_rows =
            inputs.images.filter([&](const ClassId& l) { return seen_set.count(l) > 0; });
        FeatureDataset test_rows =
            inputs.images.filter([&](const ClassId& l) { return unseen_set.count(l) > 0; });
        for (const auto& l : train_rows.labels)
            if (unseen_set.count(l))
                throw Error("unseen class '" + l + "' leaked into the training labels");
        if (train_rows.size() == 0) throw Error("no training rows for this fold");
        if (test_rows.size() == 0) throw Error("no test rows for this fold");
        return std::pair{std::move(train_rows), std::move(test_rows)};
    });

    outcome.image_ids = test.image_ids;
    outcome.true_labels = test.labels;

    if (cfg.net.enabled) {
        run_stage(fold_index, "train-net", [&] {
            const Hierarchy sub = detail::sub_hierarchy(inputs.hierarchy, split.seen);
            HierNetShape shape;
            shape.input_dim = static_cast<int>(train.dim());
            shape.trunk_widths = cfg.net.trunk_widths;
            shape.taps = cfg.net.taps;
            shape.family_hidden = cfg.net.family_hidden;
            shape.genus_hidden = cfg.net.genus_hidden;
            shape.species_hidden = cfg.net.species_hidden;
            shape.family_classes = static_cast<int>(sub.family_ids.size());
            shape.genus_classes = static_cast<int>(sub.genus_ids.size());
            shape.species_classes = static_cast<int>(sub.species_ids.size());
            shape.domain_hidden = cfg.net.domain_hidden;
            shape.domain_tap = cfg.net.domain_tap;

            TrainConfig tc = cfg.net.train;
            tc.seed = cfg.net.train.seed + static_cast<std::uint64_t>(fold_index);
            HierNetParams params = init_params(shape, tc.seed);

            auto samples = make_samples(train, sub, 0);
            FeatureDataset unlabeled = test;
            for (auto& l : unlabeled.labels) l.clear();
            for (auto& s : make_samples(unlabeled, sub, 1)) samples.push_back(std::move(s));
            train_network(samples, params, tc, cfg.net.epochs);

            auto remap = [&](FeatureDataset& data) {
                Matrix mapped(data.size(), extract_features(Vector::Zero(data.dim()), params).size());
                for (Eigen::Index i = 0; i < data.size(); ++i)
                    mapped.row(i) = extract_features(data.features.row(i).transpose(), params);
                data.features = std::move(mapped);
            };
            remap(train);
            remap(test);
            return 0;
        });
    }

    run_stage(fold_index, "standardize", [&] {
        detail::Standardizer stdz;
        stdz.fit(train.features);
        train.features = stdz.apply(train.features);
        test.features = stdz.apply(test.features);
        return 0;
    });

    const LogRegModel model = run_stage(fold_index, "train-seeder",
                                        [&] { return train_logreg(train, split.seen, cfg.c); });
    const ScoreMatrix seeds =
        run_stage(fold_index, "seed", [&] { return seed_matrix(test, model, split.unseen); });

    const ClassGraph graph = run_stage(fold_index, "build-graph", [&] {
        SemanticSpace space = make_space(split.seen, split.unseen, inputs.vectors.vectors);
        if (cfg.zscore_vectors) space = zscore_vectors(space);
        return build_weight_matrix(space, cfg.k1, cfg.k2, &outcome.warnings);
    });

    const PropagationOperator op = run_stage(fold_index, "build-operator", [&] {
        return build_operator(graph, cfg.alpha, cfg.eta, cfg.pi_mode);
    });

    SolveInfo solve_info;
    const ScoreMatrix propagated = run_stage(
        fold_index, "propagate", [&] { return propagate_closed(seeds, op, &solve_info); });
    outcome.diagnostics = operator_diagnostics(op);
    outcome.diagnostics.fixed_point_residual = solve_info.residual;

    outcome.predicted =
        run_stage(fold_index, "predict", [&] { return predict_labels(propagated, cfg.argmax); });

    outcome.n_test = test.size();
    int correct = 0;
    for (std::size_t i = 0; i < outcome.predicted.size(); ++i) {
        ++outcome.confusion[outcome.true_labels[i]][outcome.predicted[i]];
        if (outcome.predicted[i] == outcome.true_labels[i]) ++correct;
    }
    outcome.accuracy = static_cast<double>(correct) / static_cast<double>(outcome.n_test);
    return outcome;
}

inline EvalReport run_experiment(const ExperimentConfig& cfg) {
    const ExperimentInputs inputs = load_inputs(cfg);

    std::vector<FoldSplit> folds;
    if (!cfg.splits_path.empty()) {
        auto [seen, unseen] = load_split(cfg.splits_path);
        folds.push_back({std::move(seen), std::move(unseen)});
    } else {
        folds = make_folds(inputs.vectors.ids, cfg.n_folds, cfg.seed);
    }

    EvalReport report;
    report.config_echo = config_to_json(cfg);
    for (std::size_t i = 0; i < folds.size(); ++i)
        report.folds.push_back(run_fold(cfg, inputs, folds[i], static_cast<int>(i)));

    if (!report.folds.empty()) {
        double total = 0.0;
        for (const auto& f : report.folds) total += f.accuracy;
        report.mean_accuracy = total / static_cast<double>(report.folds.size());
        report.has_mean = true;
    }
    return report;
}

inline json report_to_json(const EvalReport& report) {
    json j;
    j["config"] = report.config_echo;
    json folds = json::array();
    for (const auto& f : report.folds) {
        json jf;
        jf["fold"] = f.index;
        jf["accuracy"] = f.accuracy;
        jf["n_test"] = f.n_test;
        jf["seen"] = f.split.seen;
        jf["unseen"] = f.split.unseen;
        json confusion;
        for (const auto& [true_id, row] : f.confusion) {
            json jrow;
            for (const auto& [pred_id, count] : row) jrow[pred_id] = count;
            confusion[true_id] = std::move(jrow);
        }
        jf["confusion"] = std::move(confusion);
        jf["diagnostics"] = diagnostics_to_json(f.diagnostics);
        jf["warnings"] = f.warnings;
        folds.push_back(std::move(jf));
    }
    j["folds"] = std::move(folds);
    j["mean_accuracy"] = report.has_mean ? json(report.mean_accuracy) : json(nullptr);
    return j;
}

/// Writes report.json plus per-fold prediction CSVs and diagnostics.
inline void emit_report(const EvalReport& report, const std::string& output_dir) {
    std::error_code ec;
    std::filesystem::create_directories(output_dir, ec);
    if (ec) throw Error("cannot create output directory '" + output_dir + "': " + ec.message());
    const std::filesystem::path out(output_dir);

    {
        auto f = detail::open_out((out / "report.json").string());
        f << report_to_json(report).dump(2) << "\n";
    }
    for (const auto& fold : report.folds) {
        auto pred = detail::open_out(
            (out / ("predictions_fold" + std::to_string(fold.index) + ".csv")).string());
        pred << "image_id,true_class,predicted_class\n";
        for (std::size_t i = 0; i < fold.predicted.size(); ++i)
            pred << fold.image_ids[i] << ',' << fold.true_labels[i] << ',' << fold.predicted[i]
                 << "\n";

        auto diag = detail::open_out(
            (out / ("diagnostics_fold" + std::to_string(fold.index) + ".json")).string());
        diag << diagnostics_to_json(fold.diagnostics).dump(2) << "\n";
    }
}

// ---- hyperparameter sweep on a nested zero-shot split within the seen classes ----

struct TuneGrid {
    std::vector<int> k1{3, 5, 8};
    std::vector<int> k2{2, 3};
    std::vector<double> alpha{0.5, 0.8, 0.95};
};

struct TuneEntry {
    int k1 = 0, k2 = 0;
    double alpha = 0.0;
    double accuracy = 0.0;
    bool valid = false;
    std::string note;
};

struct TuneResult {
    std::vector<TuneEntry> entries;
    int best = -1;  // index into entries
    std::vector<ClassId> inner_seen, inner_val;
};

inline TuneResult tune_hyperparameters(const ExperimentConfig& cfg, const TuneGrid& grid) {
    const ExperimentInputs inputs = load_inputs(cfg);

    std::vector<ClassId> pool = inputs.vectors.ids;
    if (!cfg.splits_path.empty()) pool = load_split(cfg.splits_path).first;
    if (pool.size() < 3) throw Error("tune: need at least 3 classes in the tuning pool");

    // Hold out one third of the pool as pseudo-unseen validation classes.
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(cfg.seed);
    detail::seeded_shuffle(order, rng);
    const std::size_t val_count = std::max<std::size_t>(1, pool.size() / 3);
    std::unordered_set<std::size_t> val_idx(order.begin(),
                                            order.begin() + static_cast<std::ptrdiff_t>(val_count));
    TuneResult result;
    for (std::size_t i = 0; i < pool.size(); ++i)
        (val_idx.count(i) ? result.inner_val : result.inner_seen).push_back(pool[i]);

    double best_acc = -1.0;
    for (int k1 : grid.k1)
        for (int k2 : grid.k2)
            for (double alpha : grid.alpha) {
                TuneEntry entry;
                entry.k1 = k1;
                entry.k2 = k2;
                entry.alpha = alpha;
                ExperimentConfig inner = cfg;
                inner.k1 = k1;
                inner.k2 = k2;
                inner.alpha = alpha;
                inner.net.enabled = false;
                try {
                    FoldSplit split{result.inner_seen, result.inner_val};
                    entry.accuracy = run_fold(inner, inputs, split, 0).accuracy;
                    entry.valid = true;
                    if (entry.accuracy > best_acc) {
                        best_acc = entry.accuracy;
                        result.best = static_cast<int>(result.entries.size());
                    }
                } catch (const std::exception& e) {
                    entry.note = e.what();
                }
                result.entries.push_back(std::move(entry));
            }
    if (result.best < 0) throw Error("tune: no grid combination produced a valid run");
    return result;
}

inline json tune_to_json(const TuneResult& result) {
    json j;
    j["inner_seen"] = result.inner_seen;
    j["inner_val"] = result.inner_val;
    json entries = json::array();
    for (const auto& e : result.entries) {
        json je;
        je["k1"] = e.k1;
        je["k2"] = e.k2;
        je["alpha"] = e.alpha;
        if (e.valid)
            je["accuracy"] = e.accuracy;
        else
            je["error"] = e.note;
        entries.push_back(std::move(je));
    }
    j["grid"] = std::move(entries);
    const auto& b = result.entries[static_cast<std::size_t>(result.best)];
    j["best"] = {{"k1", b.k1}, {"k2", b.k2}, {"alpha", b.alpha}, {"accuracy", b.accuracy}};
    return j;
}

}  // namespace semprop

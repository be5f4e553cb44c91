#pragma once

#include "semprop/dataset.hpp"
#include "semprop/hiernet.hpp"
#include "semprop/propagation.hpp"
#include "semprop/seeder.hpp"
#include "semprop/types.hpp"

#include "json.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace semprop {

using json = nlohmann::json;

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s, const std::string& context) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw Error("cannot parse number '" + s + "' in " + context);
    return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "' for reading");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    return out;
}

}  // namespace detail

// ---- semantic vectors: CSV `class_id,v0,...,v{d-1}` ----

struct VectorTable {
    std::vector<ClassId> ids;  // file order
    std::unordered_map<ClassId, Vector> vectors;
};

inline VectorTable load_semantic_vectors(const std::string& path) {
    const auto lines = detail::read_lines(path);
    if (lines.empty()) throw Error("semantic vectors file '" + path + "' is empty");
    const auto header = detail::split_csv_line(lines[0]);
    if (header.empty() || header[0] != "class_id")
        throw Error("semantic vectors file '" + path + "' must start with a class_id header");
    const std::size_t dim = header.size() - 1;
    VectorTable table;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = detail::split_csv_line(lines[r]);
        if (fields.size() != dim + 1)
            throw Error("semantic vectors row " + std::to_string(r) + " has " +
                        std::to_string(fields.size() - 1) + " values, expected " +
                        std::to_string(dim));
        Vector v(static_cast<Eigen::Index>(dim));
        for (std::size_t j = 0; j < dim; ++j)
            v[static_cast<Eigen::Index>(j)] = detail::parse_double(fields[j + 1], path);
        if (!table.vectors.emplace(fields[0], std::move(v)).second)
            throw Error("duplicate class id '" + fields[0] + "' in '" + path + "'");
        table.ids.push_back(fields[0]);
    }
    return table;
}

inline void save_semantic_vectors(const std::string& path, const std::vector<ClassId>& ids,
                                  const std::unordered_map<ClassId, Vector>& vectors) {
    auto out = detail::open_out(path);
    const Eigen::Index dim = ids.empty() ? 0 : vectors.at(ids.front()).size();
    out << "class_id";
    for (Eigen::Index j = 0; j < dim; ++j) out << ",v" << j;
    out << "\n";
    for (const auto& id : ids) {
        out << id;
        const Vector& v = vectors.at(id);
        for (Eigen::Index j = 0; j < dim; ++j) out << ',' << detail::format_double(v[j]);
        out << "\n";
    }
}

// ---- split: JSON {"seen": [...], "unseen": [...]} ----

inline std::pair<std::vector<ClassId>, std::vector<ClassId>> load_split(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open split file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error("split file '" + path + "' is not valid JSON: " + e.what());
    }
    if (!j.contains("seen") || !j.contains("unseen"))
        throw Error("split file '" + path + "' must contain 'seen' and 'unseen' arrays");
    return {j.at("seen").get<std::vector<ClassId>>(), j.at("unseen").get<std::vector<ClassId>>()};
}

inline void save_split(const std::string& path, const std::vector<ClassId>& seen,
                       const std::vector<ClassId>& unseen) {
    auto out = detail::open_out(path);
    json j;
    j["seen"] = seen;
    j["unseen"] = unseen;
    out << j.dump(2) << "\n";
}

// ---- features: CSV `image_id,label,f0,...` (empty label = test row) ----

inline FeatureDataset load_features(const std::string& path) {
    const auto lines = detail::read_lines(path);
    if (lines.empty()) throw Error("feature file '" + path + "' is empty");
    const auto header = detail::split_csv_line(lines[0]);
    if (header.size() < 3 || header[0] != "image_id" || header[1] != "label")
        throw Error("feature file '" + path + "' must start with image_id,label,f0,...");
    const std::size_t dim = header.size() - 2;
    FeatureDataset data;
    data.features.resize(static_cast<Eigen::Index>(lines.size() - 1),
                         static_cast<Eigen::Index>(dim));
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = detail::split_csv_line(lines[r]);
        if (fields.size() != dim + 2)
            throw Error("feature row " + std::to_string(r) + " in '" + path + "' has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(dim + 2));
        data.image_ids.push_back(fields[0]);
        data.labels.push_back(fields[1]);
        for (std::size_t j = 0; j < dim; ++j)
            data.features(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(j)) =
                detail::parse_double(fields[j + 2], path);
    }
    data.validate();
    return data;
}

inline void save_features(const std::string& path, const FeatureDataset& data) {
    data.validate();
    auto out = detail::open_out(path);
    out << "image_id,label";
    for (Eigen::Index j = 0; j < data.dim(); ++j) out << ",f" << j;
    out << "\n";
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        out << data.image_ids[static_cast<std::size_t>(i)] << ','
            << data.labels[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < data.dim(); ++j)
            out << ',' << detail::format_double(data.features(i, j));
        out << "\n";
    }
}

// ---- hierarchy: CSV `species_id,genus_id,family_id` ----

inline Hierarchy load_hierarchy(const std::string& path) {
    const auto lines = detail::read_lines(path);
    if (lines.empty()) throw Error("hierarchy file '" + path + "' is empty");
    const auto header = detail::split_csv_line(lines[0]);
    if (header.size() != 3 || header[0] != "species_id")
        throw Error("hierarchy file '" + path + "' must start with species_id,genus_id,family_id");
    Hierarchy hier;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = detail::split_csv_line(lines[r]);
        if (fields.size() != 3)
            throw Error("hierarchy row " + std::to_string(r) + " in '" + path +
                        "' must have 3 fields");
        hier.add(fields[0], fields[1], fields[2]);
    }
    return hier;
}

inline void save_hierarchy(const std::string& path, const Hierarchy& hier) {
    auto out = detail::open_out(path);
    out << "species_id,genus_id,family_id\n";
    for (const auto& sp : hier.species_ids) {
        const auto genus = hier.genus_of(sp);
        out << sp << ',' << genus << ',' << hier.family_of_genus.at(genus) << "\n";
    }
}

// ---- score matrices: CSV `image_id,<class_id_0>,...` in class order ----

inline void save_score_matrix(const std::string& path, const ScoreMatrix& scores) {
    auto out = detail::open_out(path);
    out << "image_id";
    for (const auto& id : scores.class_order) out << ',' << id;
    out << "\n";
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        out << scores.image_ids[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < scores.classes(); ++j)
            out << ',' << detail::format_double(scores.values(i, j));
        out << "\n";
    }
}

/// Loads a score matrix and checks the column order against the expected
/// seen ++ unseen partition.
inline ScoreMatrix load_score_matrix(const std::string& path, const std::vector<ClassId>& seen,
                                     const std::vector<ClassId>& unseen) {
    const auto lines = detail::read_lines(path);
    if (lines.empty()) throw Error("score file '" + path + "' is empty");
    const auto header = detail::split_csv_line(lines[0]);
    if (header.empty() || header[0] != "image_id")
        throw Error("score file '" + path + "' must start with an image_id header");
    std::vector<ClassId> expected = seen;
    expected.insert(expected.end(), unseen.begin(), unseen.end());
    if (header.size() != expected.size() + 1)
        throw Error("score file '" + path + "' has " + std::to_string(header.size() - 1) +
                    " class columns, expected " + std::to_string(expected.size()));
    for (std::size_t j = 0; j < expected.size(); ++j)
        if (header[j + 1] != expected[j])
            throw Error("score file '" + path + "' column " + std::to_string(j + 1) + " is '" +
                        header[j + 1] + "', expected '" + expected[j] +
                        "' (class order must be seen then unseen)");

    ScoreMatrix scores;
    scores.class_order = expected;
    scores.seen_count = static_cast<Eigen::Index>(seen.size());
    scores.values.resize(static_cast<Eigen::Index>(lines.size() - 1),
                         static_cast<Eigen::Index>(expected.size()));
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = detail::split_csv_line(lines[r]);
        if (fields.size() != expected.size() + 1)
            throw Error("score row " + std::to_string(r) + " in '" + path +
                        "' has the wrong field count");
        scores.image_ids.push_back(fields[0]);
        for (std::size_t j = 0; j < expected.size(); ++j)
            scores.values(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(j)) =
                detail::parse_double(fields[j + 1], path);
    }
    return scores;
}

// ---- graph weight matrix: CSV `class_id,<class ids...>` ----

inline void save_weight_matrix(const std::string& path, const ClassGraph& graph) {
    auto out = detail::open_out(path);
    out << "class_id";
    for (const auto& id : graph.class_order) out << ',' << id;
    out << "\n";
    for (Eigen::Index i = 0; i < graph.weight.rows(); ++i) {
        out << graph.class_order[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < graph.weight.cols(); ++j)
            out << ',' << detail::format_double(graph.weight(i, j));
        out << "\n";
    }
}

// ---- logistic-regression model: JSON ----

inline void save_logreg_model(const std::string& path, const LogRegModel& model) {
    json j;
    j["class_order"] = model.class_order;
    j["c"] = model.c;
    json rows = json::array();
    for (Eigen::Index k = 0; k < model.weights.rows(); ++k) {
        json row = json::array();
        for (Eigen::Index d = 0; d < model.weights.cols(); ++d) row.push_back(model.weights(k, d));
        rows.push_back(std::move(row));
    }
    j["weights"] = std::move(rows);
    auto out = detail::open_out(path);
    out << j.dump(2) << "\n";
}

inline LogRegModel load_logreg_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open model file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error("model file '" + path + "' is not valid JSON: " + e.what());
    }
    LogRegModel model;
    model.class_order = j.at("class_order").get<std::vector<ClassId>>();
    model.c = j.at("c").get<double>();
    const auto& rows = j.at("weights");
    if (rows.empty() || rows.size() != model.class_order.size())
        throw Error("model file '" + path + "' weight rows do not match class_order");
    model.weights.resize(static_cast<Eigen::Index>(rows.size()),
                         static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t k = 0; k < rows.size(); ++k)
        for (std::size_t d = 0; d < rows[k].size(); ++d)
            model.weights(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d)) =
                rows[k][d].get<double>();
    return model;
}

// ---- hierarchical network parameters: JSON (shapes + row-major values) ----

namespace detail {

inline json layer_to_json(const Layer& layer) {
    json j;
    j["rows"] = layer.W.rows();
    j["cols"] = layer.W.cols();
    json w = json::array();
    for (Eigen::Index i = 0; i < layer.W.rows(); ++i)
        for (Eigen::Index k = 0; k < layer.W.cols(); ++k) w.push_back(layer.W(i, k));
    j["W"] = std::move(w);
    json b = json::array();
    for (Eigen::Index i = 0; i < layer.b.size(); ++i) b.push_back(layer.b[i]);
    j["b"] = std::move(b);
    return j;
}

inline Layer layer_from_json(const json& j) {
    Layer layer;
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& w = j.at("W");
    if (static_cast<Eigen::Index>(w.size()) != rows * cols)
        throw Error("network layer has wrong weight count");
    layer.W.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index k = 0; k < cols; ++k)
            layer.W(i, k) = w[static_cast<std::size_t>(i * cols + k)].get<double>();
    const auto& b = j.at("b");
    if (static_cast<Eigen::Index>(b.size()) != rows)
        throw Error("network layer has wrong bias count");
    layer.b.resize(rows);
    for (Eigen::Index i = 0; i < rows; ++i) layer.b[i] = b[static_cast<std::size_t>(i)].get<double>();
    return layer;
}

inline json layers_to_json(const std::vector<Layer>& layers) {
    json arr = json::array();
    for (const auto& l : layers) arr.push_back(layer_to_json(l));
    return arr;
}

inline std::vector<Layer> layers_from_json(const json& arr) {
    std::vector<Layer> layers;
    for (const auto& j : arr) layers.push_back(layer_from_json(j));
    return layers;
}

}  // namespace detail

inline void save_hiernet(const std::string& path, const HierNetParams& params) {
    json j;
    j["trunk"] = detail::layers_to_json(params.trunk);
    j["family_head"] = detail::layers_to_json(params.family_head);
    j["genus_head"] = detail::layers_to_json(params.genus_head);
    j["species_head"] = detail::layers_to_json(params.species_head);
    j["domain_head"] = detail::layers_to_json(params.domain_head);
    j["taps"] = params.taps;
    j["domain_tap"] =
        params.domain_tap == DomainTap::species_penultimate ? "species_penultimate" : "species_trunk_tap";
    auto out = detail::open_out(path);
    out << j.dump(2) << "\n";
}

inline HierNetParams load_hiernet(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open network file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error("network file '" + path + "' is not valid JSON: " + e.what());
    }
    HierNetParams params;
    params.trunk = detail::layers_from_json(j.at("trunk"));
    params.family_head = detail::layers_from_json(j.at("family_head"));
    params.genus_head = detail::layers_from_json(j.at("genus_head"));
    params.species_head = detail::layers_from_json(j.at("species_head"));
    params.domain_head = detail::layers_from_json(j.at("domain_head"));
    const auto taps = j.at("taps").get<std::vector<int>>();
    if (taps.size() != 3) throw Error("network file '" + path + "' must list three taps");
    params.taps = {taps[0], taps[1], taps[2]};
    params.domain_tap = j.at("domain_tap").get<std::string>() == "species_trunk_tap"
                            ? DomainTap::species_trunk_tap
                            : DomainTap::species_penultimate;
    return params;
}

// ---- operator diagnostics: JSON ----

inline json diagnostics_to_json(const OperatorDiagnostics& d) {
    json j;
    j["row_sum_error"] = d.row_sum_error;
    j["theta_asymmetry"] = d.theta_asymmetry;
    j["spectral_radius_estimate"] = d.spectral_radius;
    j["condition_rcond"] = d.rcond;
    j["fixed_point_residual"] = d.fixed_point_residual;
    j["alpha_degenerate"] = d.alpha_degenerate;
    return j;
}

}  // namespace semprop

#pragma once

#include "semprop/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace semprop {

inline double euclidean_distance(const Vector& a, const Vector& b) {
    if (a.size() != b.size())
        throw Error("euclidean_distance: dimension mismatch (" + std::to_string(a.size()) +
                    " vs " + std::to_string(b.size()) + ")");
    return (a - b).norm();
}

inline double edge_weight(double dist) {
    if (dist < 0.0 || !std::isfinite(dist))
        throw Error("edge_weight: distance must be a finite nonnegative value, got " +
                    std::to_string(dist));
    return std::exp(-dist);
}

/// k nearest candidates to the query class by Euclidean distance on the
/// semantic vectors. The query itself is excluded from the candidate set;
/// exact distance ties break by ascending class-order index.
inline std::vector<ClassId> knn_neighbors(const ClassId& query_id,
                                          const std::vector<ClassId>& candidates, int k,
                                          const SemanticSpace& space) {
    if (k <= 0) throw Error("knn_neighbors: k must be positive, got " + std::to_string(k));
    const Vector& query = space.vector_of(query_id);

    std::unordered_map<ClassId, std::size_t> order_index;
    {
        const auto order = space.class_order();
        for (std::size_t i = 0; i < order.size(); ++i) order_index.emplace(order[i], i);
    }

    struct Entry {
        double dist;
        std::size_t index;
        const ClassId* id;
    };
    std::vector<Entry> entries;
    entries.reserve(candidates.size());
    for (const auto& cand : candidates) {
        if (cand == query_id) continue;
        auto it = order_index.find(cand);
        if (it == order_index.end())
            throw Error("knn_neighbors: candidate '" + cand + "' is not in the semantic space");
        entries.push_back({euclidean_distance(query, space.vector_of(cand)), it->second, &cand});
    }
    if (static_cast<std::size_t>(k) > entries.size())
        throw Error("knn_neighbors: k=" + std::to_string(k) + " exceeds the " +
                    std::to_string(entries.size()) + " available candidates for class '" +
                    query_id + "'");

    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        return a.index < b.index;
    });

    std::vector<ClassId> result;
    result.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) result.push_back(*entries[static_cast<std::size_t>(i)].id);
    return result;
}

/// Assembles the block weight matrix: each seen class gets directed edges
/// of weight exp(-distance) to its k1 nearest seen and k2 nearest unseen
/// classes; each unseen class carries a unit self-loop and nothing else.
/// Distance-zero edges (duplicate semantic vectors) are kept with weight 1
/// and reported through `warnings` when provided.
inline ClassGraph build_weight_matrix(const SemanticSpace& space, int k1, int k2,
                                      std::vector<std::string>* warnings = nullptr) {
    space.validate();
    const Eigen::Index p = space.p();
    const Eigen::Index q = space.q();
    if (k1 < 1) throw Error("build_weight_matrix: k1 must be positive, got " + std::to_string(k1));
    if (k2 < 1) throw Error("build_weight_matrix: k2 must be positive, got " + std::to_string(k2));
    if (k1 > p - 1)
        throw Error("build_weight_matrix: k1=" + std::to_string(k1) + " needs at least " +
                    std::to_string(k1 + 1) + " seen classes, have " + std::to_string(p));
    if (k2 > q)
        throw Error("build_weight_matrix: k2=" + std::to_string(k2) + " exceeds the " +
                    std::to_string(q) + " unseen classes");

    ClassGraph graph;
    graph.k1 = k1;
    graph.k2 = k2;
    graph.class_order = space.class_order();
    graph.seen_count = p;
    graph.weight = Matrix::Zero(p + q, p + q);

    std::unordered_map<ClassId, Eigen::Index> col_of;
    for (Eigen::Index j = 0; j < p + q; ++j) col_of.emplace(graph.class_order[j], j);

    for (Eigen::Index i = 0; i < p; ++i) {
        const ClassId& src = space.seen_ids[static_cast<std::size_t>(i)];
        const Vector& v = space.vector_of(src);
        auto add_edges = [&](const std::vector<ClassId>& neighbors) {
            for (const auto& dst : neighbors) {
                const double dist = euclidean_distance(v, space.vector_of(dst));
                graph.weight(i, col_of.at(dst)) = edge_weight(dist);
                if (dist == 0.0 && warnings)
                    warnings->push_back("classes '" + src + "' and '" + dst +
                                        "' share identical semantic vectors (edge weight 1)");
            }
        };
        add_edges(knn_neighbors(src, space.seen_ids, k1, space));
        add_edges(knn_neighbors(src, space.unseen_ids, k2, space));
    }
    for (Eigen::Index i = 0; i < q; ++i) graph.weight(p + i, p + i) = 1.0;
    return graph;
}

/// Assembles a SemanticSpace from a seen/unseen partition and a vector
/// table covering both sides.
inline SemanticSpace make_space(const std::vector<ClassId>& seen,
                                const std::vector<ClassId>& unseen,
                                const std::unordered_map<ClassId, Vector>& vectors) {
    SemanticSpace space;
    space.seen_ids = seen;
    space.unseen_ids = unseen;
    for (const auto& id : space.class_order()) {
        auto it = vectors.find(id);
        if (it == vectors.end()) throw Error("no semantic vector for class '" + id + "'");
        space.vectors.emplace(id, it->second);
    }
    space.validate();
    return space;
}

/// Optional preprocessing: z-scores every semantic dimension across all
/// classes. Dimensions with zero spread are centered only.
inline SemanticSpace zscore_vectors(const SemanticSpace& space) {
    space.validate();
    const Eigen::Index d = space.dim();
    const auto order = space.class_order();
    const auto n = static_cast<double>(order.size());

    Vector mean = Vector::Zero(d);
    for (const auto& id : order) mean += space.vector_of(id);
    mean /= n;
    Vector var = Vector::Zero(d);
    for (const auto& id : order) var += (space.vector_of(id) - mean).array().square().matrix();
    var /= n;

    Vector scale(d);
    for (Eigen::Index j = 0; j < d; ++j) scale[j] = var[j] > 0.0 ? 1.0 / std::sqrt(var[j]) : 1.0;

    SemanticSpace out;
    out.seen_ids = space.seen_ids;
    out.unseen_ids = space.unseen_ids;
    for (const auto& id : order)
        out.vectors[id] = ((space.vector_of(id) - mean).array() * scale.array()).matrix();
    return out;
}

}  // namespace semprop

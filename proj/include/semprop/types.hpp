#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace semprop {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ClassId = std::string;

/// Error type thrown by all semprop operations on invalid input or
/// numerically degenerate state. The message is meant for the CLI user.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Seen/unseen class partition with one semantic vector per class.
struct SemanticSpace {
    std::vector<ClassId> seen_ids;
    std::vector<ClassId> unseen_ids;
    std::unordered_map<ClassId, Vector> vectors;

    Eigen::Index p() const { return static_cast<Eigen::Index>(seen_ids.size()); }
    Eigen::Index q() const { return static_cast<Eigen::Index>(unseen_ids.size()); }
    Eigen::Index total() const { return p() + q(); }

    Eigen::Index dim() const {
        if (vectors.empty()) return 0;
        return vectors.begin()->second.size();
    }

    // Row/column indexing everywhere: seen classes first, then unseen.
    std::vector<ClassId> class_order() const {
        std::vector<ClassId> order = seen_ids;
        order.insert(order.end(), unseen_ids.begin(), unseen_ids.end());
        return order;
    }

    const Vector& vector_of(const ClassId& id) const {
        auto it = vectors.find(id);
        if (it == vectors.end()) throw Error("no semantic vector for class '" + id + "'");
        return it->second;
    }

    void validate() const {
        if (seen_ids.empty()) throw Error("semantic space has no seen classes");
        if (unseen_ids.empty()) throw Error("semantic space has no unseen classes");
        std::unordered_set<ClassId> seen_set;
        for (const auto& id : seen_ids)
            if (!seen_set.insert(id).second)
                throw Error("duplicate seen class id '" + id + "'");
        std::unordered_set<ClassId> unseen_set;
        for (const auto& id : unseen_ids) {
            if (!unseen_set.insert(id).second)
                throw Error("duplicate unseen class id '" + id + "'");
            if (seen_set.count(id))
                throw Error("class '" + id + "' appears in both seen and unseen sets");
        }
        const Eigen::Index d = dim();
        for (const auto& id : class_order()) {
            auto it = vectors.find(id);
            if (it == vectors.end())
                throw Error("class '" + id + "' has no semantic vector");
            if (it->second.size() != d)
                throw Error("semantic vector for class '" + id + "' has dimension " +
                            std::to_string(it->second.size()) + ", expected " + std::to_string(d));
            if (!it->second.allFinite())
                throw Error("semantic vector for class '" + id + "' has non-finite entries");
        }
    }
};

/// Directed weighted graph over all classes. Rows/columns follow
/// class_order (seen first). The unseen block is forced to [0 | I].
struct ClassGraph {
    Matrix weight;                     // (p+q) x (p+q)
    int k1 = 0;
    int k2 = 0;
    std::vector<ClassId> class_order;  // seen_ids ++ unseen_ids
    Eigen::Index seen_count = 0;

    Eigen::Index total() const { return static_cast<Eigen::Index>(class_order.size()); }
    Eigen::Index unseen_count() const { return total() - seen_count; }
};

/// Per-image scores over all classes (seed or propagated).
struct ScoreMatrix {
    Matrix values;                     // N x (p+q)
    std::vector<std::string> image_ids;
    std::vector<ClassId> class_order;
    Eigen::Index seen_count = 0;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index classes() const { return values.cols(); }
};

/// Checks the SeedMatrix contract: nonnegative entries, unseen columns
/// all zero, seen columns summing to one per row.
inline void validate_seed_matrix(const ScoreMatrix& seeds, double tol = 1e-9) {
    const Eigen::Index p = seeds.seen_count;
    const Eigen::Index n = seeds.classes();
    if (p <= 0 || p > n) throw Error("seed matrix has invalid seen-class count");
    if ((seeds.values.array() < 0.0).any()) throw Error("seed matrix has negative entries");
    for (Eigen::Index i = 0; i < seeds.rows(); ++i) {
        if (p < n && seeds.values.row(i).tail(n - p).cwiseAbs().maxCoeff() != 0.0)
            throw Error("seed matrix row " + std::to_string(i) + " has nonzero unseen entries");
        const double s = seeds.values.row(i).head(p).sum();
        if (std::abs(s - 1.0) > tol)
            throw Error("seed matrix row " + std::to_string(i) + " sums to " + std::to_string(s) +
                        " over seen classes, expected 1");
    }
}

}  // namespace semprop

#pragma once

#include "semprop/dataset.hpp"
#include "semprop/types.hpp"

#include <cmath>
#include <unordered_set>

namespace semprop {

/// One-vs-rest L2-regularized logistic regression over the seen classes.
/// weights is p x (d_feat + 1); the last column is the bias, which is
/// regularized together with the weights (augmented-feature convention).
struct LogRegModel {
    Matrix weights;
    double c = 0.01;
    std::vector<ClassId> class_order;  // seen classes

    Eigen::Index feature_dim() const { return weights.cols() - 1; }
};

inline double stable_sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

inline double stable_softplus(double t) {  // log(1 + exp(t))
    if (t > 0.0) return t + std::log1p(std::exp(-t));
    return std::log1p(std::exp(t));
}

inline Matrix augment_bias(const Matrix& X) {
    Matrix Xa(X.rows(), X.cols() + 1);
    Xa.leftCols(X.cols()) = X;
    Xa.col(X.cols()).setOnes();
    return Xa;
}

/// f(w) = 0.5 ||w||^2 + c * sum_i log(1 + exp(-z_i w.x_i)), z_i in {-1,+1}.
inline double logreg_objective(const Matrix& Xa, const Vector& z, const Vector& w, double c) {
    const Vector margins = Xa * w;
    double data = 0.0;
    for (Eigen::Index i = 0; i < margins.size(); ++i)
        data += stable_softplus(-z[i] * margins[i]);
    return 0.5 * w.squaredNorm() + c * data;
}

inline Vector logreg_gradient(const Matrix& Xa, const Vector& z, const Vector& w, double c) {
    const Vector margins = Xa * w;
    Vector coeff(margins.size());
    for (Eigen::Index i = 0; i < margins.size(); ++i)
        coeff[i] = -z[i] * stable_sigmoid(-z[i] * margins[i]);
    return w + c * (Xa.transpose() * coeff);
}

struct FitReport {
    int iterations = 0;
    double grad_norm = 0.0;
    bool converged = false;
};

/// Full-batch gradient descent with Armijo backtracking, started at zero.
/// Stops at gradient norm <= tol or after max_iter steps.
inline Vector fit_binary_logreg(const Matrix& Xa, const Vector& z, double c,
                                FitReport* report = nullptr, int max_iter = 10000,
                                double tol = 1e-6) {
    Vector w = Vector::Zero(Xa.cols());
    double f = logreg_objective(Xa, z, w, c);
    double step = 1.0;
    FitReport rep;
    for (int iter = 0; iter < max_iter; ++iter) {
        const Vector g = logreg_gradient(Xa, z, w, c);
        rep.grad_norm = g.norm();
        rep.iterations = iter;
        if (rep.grad_norm <= tol) {
            rep.converged = true;
            break;
        }
        const double gg = g.squaredNorm();
        step = std::min(step * 2.0, 1e6);
        Vector trial;
        double f_trial;
        while (true) {
            trial = w - step * g;
            f_trial = logreg_objective(Xa, z, trial, c);
            if (f_trial <= f - 1e-4 * step * gg) break;
            step *= 0.5;
            if (step < 1e-18)
                throw Error("fit_binary_logreg: backtracking line search stalled");
        }
        w = trial;
        f = f_trial;
    }
    if (report) *report = rep;
    return w;
}

inline LogRegModel train_logreg(const FeatureDataset& train, const std::vector<ClassId>& seen_ids,
                                double c) {
    train.validate();
    if (!(c > 0.0)) throw Error("train_logreg: c must be positive, got " + std::to_string(c));
    if (seen_ids.size() < 2) throw Error("train_logreg: need at least two seen classes");

    std::unordered_set<ClassId> seen_set(seen_ids.begin(), seen_ids.end());
    std::unordered_map<ClassId, int> counts;
    for (const auto& label : train.labels) {
        if (!seen_set.count(label))
            throw Error("train_logreg: training label '" + label + "' is not a seen class");
        ++counts[label];
    }
    for (const auto& id : seen_ids)
        if (!counts.count(id))
            throw Error("train_logreg: seen class '" + id + "' has no training rows");

    const Matrix Xa = augment_bias(train.features);
    LogRegModel model;
    model.c = c;
    model.class_order = seen_ids;
    model.weights.resize(static_cast<Eigen::Index>(seen_ids.size()), Xa.cols());
    for (std::size_t k = 0; k < seen_ids.size(); ++k) {
        Vector z(train.size());
        for (Eigen::Index i = 0; i < train.size(); ++i)
            z[i] = train.labels[static_cast<std::size_t>(i)] == seen_ids[k] ? 1.0 : -1.0;
        model.weights.row(static_cast<Eigen::Index>(k)) = fit_binary_logreg(Xa, z, c).transpose();
    }
    return model;
}

/// Per-class sigmoid scores normalized to a probability vector over the
/// seen classes.
inline Vector predict_proba(const LogRegModel& model, const Vector& x) {
    if (x.size() != model.feature_dim())
        throw Error("predict_proba: feature has dimension " + std::to_string(x.size()) +
                    ", model expects " + std::to_string(model.feature_dim()));
    Vector xa(x.size() + 1);
    xa << x, 1.0;
    Vector probs(model.weights.rows());
    for (Eigen::Index k = 0; k < model.weights.rows(); ++k)
        probs[k] = stable_sigmoid(model.weights.row(k).dot(xa));
    const double total = probs.sum();
    if (!(total > 0.0)) throw Error("predict_proba: degenerate all-zero sigmoid scores");
    return probs / total;
}

/// Initial probability matrix for the test images: seen columns carry the
/// classifier probabilities, unseen columns are identically zero.
inline ScoreMatrix seed_matrix(const FeatureDataset& test, const LogRegModel& model,
                               const std::vector<ClassId>& unseen_ids) {
    const Eigen::Index p = model.weights.rows();
    const auto q = static_cast<Eigen::Index>(unseen_ids.size());
    ScoreMatrix seeds;
    seeds.image_ids = test.image_ids;
    seeds.class_order = model.class_order;
    seeds.class_order.insert(seeds.class_order.end(), unseen_ids.begin(), unseen_ids.end());
    seeds.seen_count = p;
    seeds.values = Matrix::Zero(test.size(), p + q);
    for (Eigen::Index i = 0; i < test.size(); ++i)
        seeds.values.row(i).head(p) = predict_proba(model, test.features.row(i)).transpose();
    return seeds;
}

}  // namespace semprop

#pragma once

#include "semprop/types.hpp"

#include <Eigen/LU>

#include <cmath>
#include <string>

namespace semprop {

/// How the row-mass vector pi is obtained. The literal reading takes row
/// sums of P (all ones for a stochastic P); the stationary mode solves
/// pi P = pi by power iteration.
enum class PiMode { paper_literal, stationary };

enum class ArgmaxMode { unseen_only, all_classes };

struct PropagationOperator {
    Matrix P;          // normalized transition matrix
    Vector pi;         // row masses
    Matrix theta;      // symmetrized smoothing operator
    double alpha = 0.8;
    double eta = 0.001;
    std::vector<ClassId> class_order;
    Eigen::Index seen_count = 0;
};

/// Row-normalizes the weight matrix into a Markov transition matrix.
inline Matrix transition_matrix(const ClassGraph& graph) {
    const Eigen::Index n = graph.weight.rows();
    Matrix T(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double row_sum = graph.weight.row(i).sum();
        if (!(row_sum > 0.0)) {
            const std::string id = i < static_cast<Eigen::Index>(graph.class_order.size())
                                       ? graph.class_order[static_cast<std::size_t>(i)]
                                       : std::to_string(i);
            throw Error("transition_matrix: class '" + id + "' has zero out-weight (malformed graph)");
        }
        T.row(i) = graph.weight.row(i) / row_sum;
    }
    return T;
}

/// Mixes T with a uniform off-diagonal teleport of total weight eta so the
/// chain stays irreducible: P = eta/(n-1) * (1 - I) + (1-eta) * T.
inline Matrix normalize_transition(const Matrix& T, double eta) {
    if (!(eta >= 0.0 && eta < 1.0))
        throw Error("normalize_transition: eta must lie in [0,1), got " + std::to_string(eta));
    const Eigen::Index n = T.rows();
    if (n != T.cols()) throw Error("normalize_transition: T must be square");
    if (n < 2) throw Error("normalize_transition: need at least two classes");
    const double jump = eta / static_cast<double>(n - 1);
    Matrix P = (1.0 - eta) * T;
    P.array() += jump;
    P.diagonal().array() -= jump;
    return P;
}

/// Row masses of P. Stationary mode runs power iteration on the left
/// eigenproblem pi P = pi from a uniform start, normalized to sum 1.
inline Vector row_mass(const Matrix& P, PiMode mode, int max_iter = 200000,
                       double tol = 1e-12) {
    const Eigen::Index n = P.rows();
    if (mode == PiMode::paper_literal) return P.rowwise().sum();

    Vector pi = Vector::Constant(n, 1.0 / static_cast<double>(n));
    double residual = 0.0;
    for (int iter = 0; iter < max_iter; ++iter) {
        Vector next = P.transpose() * pi;
        next /= next.sum();
        residual = (next.transpose() * P - next.transpose()).cwiseAbs().maxCoeff();
        pi = next;
        if (residual <= tol) return pi;
    }
    throw Error("row_mass: stationary distribution did not converge within " +
                std::to_string(max_iter) + " iterations (residual " + std::to_string(residual) +
                ")");
}

/// Symmetrized propagation operator
///   Theta = (Pi^{1/2} P Pi^{-1/2} + Pi^{-1/2} P^T Pi^{1/2}) / 2
/// with Pi = diag(pi). Symmetric for any positive pi.
inline Matrix theta_operator(const Matrix& P, const Vector& pi) {
    const Eigen::Index n = P.rows();
    if (pi.size() != n) throw Error("theta_operator: pi length does not match P");
    for (Eigen::Index u = 0; u < n; ++u)
        if (!(pi[u] > 0.0))
            throw Error("theta_operator: pi[" + std::to_string(u) +
                        "] is not positive (degenerate normalization)");
    Vector s = pi.array().sqrt();
    Matrix theta(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            theta(i, j) = (s[i] / s[j] * P(i, j) + s[j] / s[i] * P(j, i)) / 2.0;
    return theta;
}

/// Deterministic power-iteration estimate of the spectral radius.
inline double spectral_radius_estimate(const Matrix& M, int iters = 300) {
    const Eigen::Index n = M.rows();
    if (n == 0) return 0.0;
    // Fixed start with a mild ramp so symmetric eigenvectors orthogonal to 1 are reachable.
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i % 7);
    v /= v.norm();
    double radius = 0.0;
    for (int it = 0; it < iters; ++it) {
        Vector w = M * v;
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        radius = norm;
        v = w / norm;
    }
    return radius;
}

inline PropagationOperator build_operator(const ClassGraph& graph, double alpha, double eta,
                                          PiMode mode) {
    if (!(alpha >= 0.0 && alpha < 1.0))
        throw Error("build_operator: alpha must lie in [0,1), got " + std::to_string(alpha));
    PropagationOperator op;
    op.alpha = alpha;
    op.eta = eta;
    op.class_order = graph.class_order;
    op.seen_count = graph.seen_count;
    op.P = normalize_transition(transition_matrix(graph), eta);
    op.pi = row_mass(op.P, mode);
    op.theta = theta_operator(op.P, op.pi);
    return op;
}

struct SolveInfo {
    double residual = 0.0;  // max-norm of Y* - alpha Y* Theta - Y
    double rcond = 0.0;     // reciprocal condition estimate of I - alpha Theta
};

/// Closed-form propagation Y* = Y (I - alpha Theta)^{-1}, computed as a
/// linear solve on the transposed system.
inline ScoreMatrix propagate_closed(const ScoreMatrix& Y, const PropagationOperator& op,
                                    SolveInfo* info = nullptr) {
    const Eigen::Index n = op.theta.rows();
    if (Y.values.cols() != n)
        throw Error("propagate_closed: score matrix has " + std::to_string(Y.values.cols()) +
                    " columns, operator expects " + std::to_string(n));
    Matrix A = Matrix::Identity(n, n) - op.alpha * op.theta;
    Eigen::PartialPivLU<Matrix> lu(A.transpose());
    const double rcond = lu.rcond();
    if (rcond < 1e-12)
        throw Error("propagate_closed: system is ill-conditioned (rcond " + std::to_string(rcond) +
                    ", alpha " + std::to_string(op.alpha) + ", spectral radius estimate " +
                    std::to_string(spectral_radius_estimate(op.theta)) + ")");

    ScoreMatrix out = Y;
    out.values = lu.solve(Y.values.transpose()).transpose();

    const double residual =
        Y.values.rows() == 0
            ? 0.0
            : (out.values - op.alpha * (out.values * op.theta) - Y.values).cwiseAbs().maxCoeff();
    if (info) {
        info->residual = residual;
        info->rcond = rcond;
    }
    return out;
}

struct IterativeResult {
    ScoreMatrix scores;
    bool converged = false;
    int iterations = 0;
    double last_delta = 0.0;
};

/// Fixed-point iteration F <- alpha F Theta + Y from F = Y; converges to
/// the closed-form solution whenever alpha * rho(Theta) < 1. On hitting
/// max_iter the best iterate is returned with converged = false.
inline IterativeResult propagate_iterative(const ScoreMatrix& Y, const PropagationOperator& op,
                                           double tol, int max_iter) {
    const Eigen::Index n = op.theta.rows();
    if (Y.values.cols() != n)
        throw Error("propagate_iterative: score matrix has " + std::to_string(Y.values.cols()) +
                    " columns, operator expects " + std::to_string(n));
    IterativeResult result;
    result.scores = Y;
    Matrix F = Y.values;
    for (int iter = 1; iter <= max_iter; ++iter) {
        Matrix next = op.alpha * (F * op.theta) + Y.values;
        const double delta =
            next.rows() == 0 ? 0.0 : (next - F).cwiseAbs().maxCoeff();
        F.swap(next);
        result.iterations = iter;
        result.last_delta = delta;
        if (delta <= tol) {
            result.converged = true;
            break;
        }
    }
    result.scores.values = F;
    return result;
}

/// Per-row argmax over the unseen columns (default) or all columns; ties
/// resolve to the lowest class-order index.
inline std::vector<ClassId> predict_labels(const ScoreMatrix& scores,
                                           ArgmaxMode mode = ArgmaxMode::unseen_only) {
    const Eigen::Index n = scores.classes();
    const Eigen::Index begin = mode == ArgmaxMode::unseen_only ? scores.seen_count : 0;
    if (begin >= n) throw Error("predict_labels: no unseen columns to choose from");
    if (static_cast<Eigen::Index>(scores.class_order.size()) != n)
        throw Error("predict_labels: class order does not match score columns");

    std::vector<ClassId> labels;
    labels.reserve(static_cast<std::size_t>(scores.rows()));
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        Eigen::Index best = begin;
        for (Eigen::Index j = begin + 1; j < n; ++j)
            if (scores.values(i, j) > scores.values(i, best)) best = j;
        labels.push_back(scores.class_order[static_cast<std::size_t>(best)]);
    }
    return labels;
}

struct OperatorDiagnostics {
    double row_sum_error = 0.0;       // max |row sum of P - 1|
    double theta_asymmetry = 0.0;     // max |Theta - Theta^T|
    double spectral_radius = 0.0;     // power-iteration estimate for Theta
    double rcond = 0.0;               // of I - alpha Theta
    double fixed_point_residual = 0.0;
    bool alpha_degenerate = false;    // alpha == 0 short-circuits propagation
};

inline OperatorDiagnostics operator_diagnostics(const PropagationOperator& op) {
    OperatorDiagnostics d;
    d.row_sum_error = (op.P.rowwise().sum().array() - 1.0).abs().maxCoeff();
    d.theta_asymmetry = (op.theta - op.theta.transpose()).cwiseAbs().maxCoeff();
    d.spectral_radius = spectral_radius_estimate(op.theta);
    const Eigen::Index n = op.theta.rows();
    Matrix A = Matrix::Identity(n, n) - op.alpha * op.theta;
    d.rcond = Eigen::PartialPivLU<Matrix>(A.transpose()).rcond();
    d.alpha_degenerate = op.alpha == 0.0;
    return d;
}

}  // namespace semprop

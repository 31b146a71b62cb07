#pragma once

// Maximum-entropy measure selection relative to a prior:
//
//     Q* = argmin KL(Q ‖ prior)  s.t.  E^Q[c_k] = target_k,
//
// solved in the dual. Q_λ(w) ∝ prior(w)·exp(Σ_k λ_k c_k(w)) and λ minimizes
// the convex function log Z(λ) − λ·target, whose gradient is the constraint
// violation and whose Hessian is the covariance of the constraint functions
// under Q_λ.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "finrel/error.hpp"
#include "finrel/geometry.hpp"

namespace finrel {

struct LinearConstraint {
    std::vector<double> coefficients;
    double target = 0.0;
};

struct MaxEntOptions {
    double tolerance = 1e-8;
    int max_iterations = 200;
};

struct MaxEntSolution {
    ProbabilityMeasure measure;
    std::vector<double> multipliers;
    int iterations = 0;
    double max_violation = 0.0;
};

/// KL(q ‖ p) in nats; the relative entropy being maximized is its negative.
inline double relative_entropy(const ProbabilityMeasure& q, const ProbabilityMeasure& p) {
    detail::require(q.size() == p.size(), "dimension mismatch in relative entropy");
    double kl = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) kl += q[i] * std::log(q[i] / p[i]);
    return kl;
}

namespace detail {

struct DualState {
    std::vector<double> weights;  // normalized tilt
    double log_partition = 0.0;   // log Σ prior·exp(λ·c)
    double objective = 0.0;       // log Z − λ·target
};

inline DualState evaluate_dual(const ProbabilityMeasure& prior, const Eigen::MatrixXd& coeffs,
                               const Eigen::VectorXd& targets, const Eigen::VectorXd& lambda) {
    const Eigen::VectorXd exponent = coeffs * lambda;  // n
    const double shift = exponent.maxCoeff();
    DualState s;
    s.weights.resize(prior.size());
    double z = 0.0;
    for (std::size_t i = 0; i < prior.size(); ++i) {
        s.weights[i] = prior[i] * std::exp(exponent(static_cast<Eigen::Index>(i)) - shift);
        z += s.weights[i];
    }
    for (double& w : s.weights) w /= z;
    s.log_partition = std::log(z) + shift;
    s.objective = s.log_partition - lambda.dot(targets);
    return s;
}

}  // namespace detail

inline MaxEntSolution solve_maxent_detailed(const ProbabilityMeasure& prior,
                                            const std::vector<LinearConstraint>& constraints,
                                            MaxEntOptions options = {}) {
    const std::size_t n = prior.size();
    if (constraints.empty()) return {prior, {}, 0, 0.0};

    const auto rows = static_cast<Eigen::Index>(n);
    const auto k = static_cast<Eigen::Index>(constraints.size());
    Eigen::MatrixXd coeffs(rows, k);
    Eigen::VectorXd targets(k);
    for (Eigen::Index c = 0; c < k; ++c) {
        const auto& con = constraints[static_cast<std::size_t>(c)];
        detail::require(con.coefficients.size() == n, "constraint " + std::to_string(c) + " has " +
                                                  std::to_string(con.coefficients.size()) +
                                                  " coefficients, expected " + std::to_string(n));
        detail::require(std::isfinite(con.target), "constraint targets must be finite");
        for (Eigen::Index i = 0; i < rows; ++i) {
            const double v = con.coefficients[static_cast<std::size_t>(i)];
            detail::require(std::isfinite(v), "constraint coefficients must be finite");
            coeffs(i, c) = v;
        }
        targets(c) = con.target;
    }

    // Every constraint must be attainable by some measure on the simplex.
    for (Eigen::Index c = 0; c < k; ++c) {
        const double lo = coeffs.col(c).minCoeff(), hi = coeffs.col(c).maxCoeff();
        const double slack = options.tolerance;
        if (targets(c) < lo - slack || targets(c) > hi + slack) {
            const double violation = std::max(lo - targets(c), targets(c) - hi);
            throw ValidationError("infeasible maxent constraints: constraint " + std::to_string(c) +
                                  " target lies outside the range of its coefficients (max violation " +
                                  std::to_string(violation) + ")");
        }
        // On an endpoint of a non-degenerate range only zero-probability states fit.
        if (hi - lo > slack && (targets(c) <= lo + slack || targets(c) >= hi - slack)) {
            throw ValidationError("infeasible maxent constraints: constraint " + std::to_string(c) +
                                  " target sits on the edge of its coefficient range, which forces some states "
                                  "to zero probability (max violation 0)");
        }
    }

    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(k);
    auto state = detail::evaluate_dual(prior, coeffs, targets, lambda);

    auto gradient_of = [&](const detail::DualState& s) {
        Eigen::VectorXd g = -targets;
        for (std::size_t i = 0; i < n; ++i) g += s.weights[i] * coeffs.row(static_cast<Eigen::Index>(i)).transpose();
        return g;
    };

    Eigen::VectorXd grad = gradient_of(state);
    int iter = 0;
    for (; iter < options.max_iterations && grad.cwiseAbs().maxCoeff() >= options.tolerance; ++iter) {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(k);
        for (std::size_t i = 0; i < n; ++i) mean += state.weights[i] * coeffs.row(static_cast<Eigen::Index>(i)).transpose();
        Eigen::MatrixXd hessian = Eigen::MatrixXd::Zero(k, k);
        for (std::size_t i = 0; i < n; ++i) {
            const Eigen::VectorXd d = coeffs.row(static_cast<Eigen::Index>(i)).transpose() - mean;
            hessian.noalias() += state.weights[i] * d * d.transpose();
        }
        // Minimum-norm Newton direction tolerates linearly dependent constraints.
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(hessian);
        cod.setThreshold(1e-12);
        const Eigen::VectorXd step = -cod.solve(grad);
        if (!step.allFinite()) break;
        // Gradient left outside the Hessian range cannot be removed: inconsistent constraints.
        const double in_range = (hessian * step).cwiseAbs().maxCoeff();
        const double off_range = (hessian * step + grad).cwiseAbs().maxCoeff();
        if (in_range < options.tolerance && off_range >= options.tolerance) {
            throw ValidationError("infeasible maxent constraints: constraints are mutually inconsistent (max violation " +
                                  std::to_string(off_range) + ")");
        }
        // Residual orthogonal to the Hessian range: inconsistent constraints.
        if (step.norm() <= 1e-14 * (1.0 + lambda.norm())) break;

        // Backtracking (Armijo) on the dual objective.
        const double slope = grad.dot(step);
        double t = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
            const Eigen::VectorXd trial = lambda + t * step;
            auto next = detail::evaluate_dual(prior, coeffs, targets, trial);
            if (std::isfinite(next.objective) && next.objective <= state.objective + 1e-4 * t * slope) {
                lambda = trial;
                state = std::move(next);
                accepted = true;
                break;
            }
        }
        grad = gradient_of(state);
        if (!accepted) break;

        const double min_weight = *std::min_element(state.weights.begin(), state.weights.end());
        if (min_weight <= 1e-250) {
            throw ValidationError("infeasible maxent constraints: solution is driven to the simplex boundary "
                                  "(max violation " + std::to_string(grad.cwiseAbs().maxCoeff()) + ")");
        }
    }

    const double violation = grad.cwiseAbs().maxCoeff();
    if (violation >= options.tolerance) {
        // Stalled before the cap with a large residual: no strictly positive measure fits.
        if (iter < options.max_iterations && violation > 1e3 * options.tolerance) {
            throw ValidationError("infeasible maxent constraints (max violation " + std::to_string(violation) + ")");
        }
        throw NumericalError("maxent did not converge after " + std::to_string(iter) +
                             " iterations (final residual " + std::to_string(violation) + ")");
    }

    return {ProbabilityMeasure::from_mass(std::move(state.weights)),
            std::vector<double>(lambda.data(), lambda.data() + k), iter, violation};
}

inline ProbabilityMeasure solve_maxent(const ProbabilityMeasure& prior, const std::vector<LinearConstraint>& constraints,
                                       MaxEntOptions options = {}) {
    return solve_maxent_detailed(prior, constraints, options).measure;
}

}  // namespace finrel

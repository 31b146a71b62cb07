#pragma once

// Graph Laplacians over the state space and the discrete field equation
//
//     L φ = κ ρ,    E^prior[φ] = 0.

#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "finrel/error.hpp"
#include "finrel/geometry.hpp"

namespace finrel {

struct Edge {
    StateIndex i = 0;
    StateIndex j = 0;
    double weight = 1.0;
};

/// Undirected weighted graph on the states. Parallel edges accumulate.
class WeightedGraph {
public:
    WeightedGraph(std::size_t n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges)) {
        detail::require(n_ >= 1, "graph needs at least one vertex");
        for (const auto& e : edges_) {
            detail::require(e.i < n_ && e.j < n_, "edge endpoint out of range");
            detail::require(e.i != e.j, "self-loop on vertex " + std::to_string(e.i));
            detail::require(std::isfinite(e.weight) && e.weight > 0.0, "edge weights must be positive and finite");
        }
    }

    static WeightedGraph complete(std::size_t n, double weight = 1.0) {
        std::vector<Edge> edges;
        for (StateIndex i = 0; i < n; ++i)
            for (StateIndex j = i + 1; j < n; ++j) edges.push_back({i, j, weight});
        return WeightedGraph(n, std::move(edges));
    }

    /// Every state of `a` joined to every state of `b`.
    static WeightedGraph complete_bipartite(std::size_t n, std::span<const StateIndex> a,
                                            std::span<const StateIndex> b, double weight = 1.0) {
        std::vector<Edge> edges;
        for (auto i : a)
            for (auto j : b) edges.push_back({i, j, weight});
        return WeightedGraph(n, std::move(edges));
    }

    std::size_t size() const noexcept { return n_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }

    bool connected() const {
        std::vector<std::size_t> parent(n_);
        std::iota(parent.begin(), parent.end(), std::size_t{0});
        auto find = [&](std::size_t x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        std::size_t components = n_;
        for (const auto& e : edges_) {
            auto a = find(e.i), b = find(e.j);
            if (a != b) {
                parent[a] = b;
                --components;
            }
        }
        return components == 1;
    }

private:
    std::size_t n_;
    std::vector<Edge> edges_;
};

struct StructuralSource {
    std::vector<double> rho;
    double kappa = 1.0;

    static constexpr double kCompatibilityTolerance = 1e-10;

    double imbalance() const { return std::accumulate(rho.begin(), rho.end(), 0.0); }
};

/// L = D - W. Throws when the graph is disconnected.
inline Eigen::MatrixXd build_laplacian(const WeightedGraph& g) {
    if (!g.connected()) {
        throw ValidationError("graph is disconnected: the gauged field equation has no unique solution");
    }
    const auto n = static_cast<Eigen::Index>(g.size());
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : g.edges()) {
        const auto i = static_cast<Eigen::Index>(e.i), j = static_cast<Eigen::Index>(e.j);
        lap(i, j) -= e.weight;
        lap(j, i) -= e.weight;
        lap(i, i) += e.weight;
        lap(j, j) += e.weight;
    }
    return lap;
}

struct FieldSolution {
    GeometricPotential potential;
    double residual = 0.0;  ///< ‖Lφ − κρ‖_∞
    double gauge = 0.0;     ///< E^prior[φ]
};

/// Solves the stacked system [L; priorᵀ] φ = [κρ; 0] by column-pivoted QR.
inline FieldSolution solve_field_equation_detailed(const Eigen::MatrixXd& laplacian, const StructuralSource& source,
                                                   const ProbabilityMeasure& prior) {
    const auto n = laplacian.rows();
    detail::require(laplacian.cols() == n, "Laplacian must be square");
    detail::require(static_cast<std::size_t>(n) == source.rho.size(), "source and Laplacian dimensions differ");
    detail::require(static_cast<std::size_t>(n) == prior.size(), "prior and Laplacian dimensions differ");
    detail::require(std::isfinite(source.kappa) && source.kappa > 0.0, "coupling kappa must be positive");
    for (double r : source.rho) detail::require(std::isfinite(r), "source entries must be finite");

    const double imbalance = source.imbalance();
    if (std::abs(imbalance) > StructuralSource::kCompatibilityTolerance) {
        throw ValidationError("incompatible source: sum(rho) = " + std::to_string(imbalance) +
                              " but the Laplacian range requires sum(rho) = 0");
    }

    Eigen::MatrixXd system(n + 1, n);
    system.topRows(n) = laplacian;
    for (Eigen::Index j = 0; j < n; ++j) system(n, j) = prior[static_cast<std::size_t>(j)];

    Eigen::VectorXd rhs(n + 1);
    for (Eigen::Index i = 0; i < n; ++i) rhs(i) = source.kappa * source.rho[static_cast<std::size_t>(i)];
    rhs(n) = 0.0;

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(system);
    if (qr.rank() < n) {
        throw NumericalError("field equation is singular (rank " + std::to_string(qr.rank()) + " < " +
                             std::to_string(n) + "); is the graph connected?");
    }
    const Eigen::VectorXd phi = qr.solve(rhs);

    const Eigen::VectorXd residual_vec = laplacian * phi - rhs.head(n);
    FieldSolution out;
    out.residual = residual_vec.cwiseAbs().maxCoeff();
    out.potential = GeometricPotential::gauged(std::vector<double>(phi.data(), phi.data() + n), prior);
    out.gauge = out.potential.gauge_residual(prior);
    if (!(out.residual < 1e-9 * std::max(1.0, rhs.cwiseAbs().maxCoeff()))) {
        throw NumericalError("field equation residual " + std::to_string(out.residual) + " exceeds tolerance");
    }
    return out;
}

inline GeometricPotential solve_field_equation(const Eigen::MatrixXd& laplacian, const StructuralSource& source,
                                               const ProbabilityMeasure& prior) {
    return solve_field_equation_detailed(laplacian, source, prior).potential;
}

inline GeometricPotential solve_field_equation(const WeightedGraph& graph, const StructuralSource& source,
                                               const ProbabilityMeasure& prior) {
    return solve_field_equation(build_laplacian(graph), source, prior);
}

struct BlockPotential {
    double phi_a = 0.0;
    double phi_b = 0.0;
};

/// Closed form on the unit-weight complete bipartite graph between blocks of sizes
/// n_a and n_b with blockwise-constant sources, gauged by n_a·φ_A + n_b·φ_B = 0.
inline BlockPotential block_symmetric_solution(std::size_t n_a, std::size_t n_b, double rho_a, double rho_b,
                                               double kappa) {
    detail::require(n_a >= 1 && n_b >= 1, "both blocks must be nonempty");
    const double na = static_cast<double>(n_a), nb = static_cast<double>(n_b);
    const double imbalance = na * rho_a + nb * rho_b;
    if (std::abs(imbalance) > StructuralSource::kCompatibilityTolerance) {
        throw ValidationError("incompatible block source: n_a*rho_a + n_b*rho_b = " + std::to_string(imbalance));
    }
    // Each A-vertex has n_b neighbours: n_b (φ_A − φ_B) = κ ρ_A.
    const double gap = kappa * rho_a / nb;
    return {nb / (na + nb) * gap, -na / (na + nb) * gap};
}

}  // namespace finrel

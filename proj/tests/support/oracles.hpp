#pragma once

// Reference computations written independently of the library: plain loops and
// Gaussian elimination, no Eigen.

#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "finrel/field_solver.hpp"

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

/// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> gauss_solve(Matrix a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t pivot = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r][c]) > std::abs(a[pivot][c])) pivot = r;
        if (std::abs(a[pivot][c]) < 1e-300) throw std::runtime_error("singular system");
        std::swap(a[c], a[pivot]);
        std::swap(b[c], b[pivot]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
        x[i] = s / a[i][i];
    }
    return x;
}

/// Laplacian assembled from the edge list.
inline Matrix laplacian(const finrel::WeightedGraph& g) {
    const std::size_t n = g.size();
    Matrix l(n, std::vector<double>(n, 0.0));
    for (const auto& e : g.edges()) {
        l[e.i][e.j] -= e.weight;
        l[e.j][e.i] -= e.weight;
        l[e.i][e.i] += e.weight;
        l[e.j][e.j] += e.weight;
    }
    return l;
}

/// Gauged field solution from the bordered system
///   [ L  p ] [φ]   [κρ]
///   [ pᵀ 0 ] [μ] = [ 0]
/// which is nonsingular for a connected graph and a positive prior.
inline std::vector<double> field_solution(const finrel::WeightedGraph& g, const std::vector<double>& rho,
                                          double kappa, std::span<const double> prior) {
    const std::size_t n = g.size();
    const auto l = laplacian(g);
    Matrix a(n + 1, std::vector<double>(n + 1, 0.0));
    std::vector<double> b(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) a[i][j] = l[i][j];
        a[i][n] = prior[i];
        a[n][i] = prior[i];
        b[i] = kappa * rho[i];
    }
    auto x = gauss_solve(std::move(a), std::move(b));
    x.pop_back();
    return x;
}

/// E^q[x | block] evaluated state by state with an explicit membership scan.
inline std::vector<double> conditional_expectation(std::span<const double> x, std::span<const double> q,
                                                   const finrel::Blocks& blocks) {
    std::vector<double> out(x.size());
    for (std::size_t s = 0; s < x.size(); ++s) {
        for (const auto& b : blocks) {
            bool member = false;
            for (auto u : b) member = member || u == s;
            if (!member) continue;
            double num = 0.0, den = 0.0;
            for (auto u : b) {
                num += q[u] * x[u];
                den += q[u];
            }
            out[s] = num / den;
        }
    }
    return out;
}

/// Least-squares residual ‖y − proj_span(basis) y‖_∞ via normal equations.
inline double span_residual(const std::vector<double>& y, const Matrix& basis) {
    const std::size_t k = basis.size(), n = y.size();
    Matrix g(k, std::vector<double>(k, 0.0));
    std::vector<double> rhs(k, 0.0);
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b)
            for (std::size_t i = 0; i < n; ++i) g[a][b] += basis[a][i] * basis[b][i];
        for (std::size_t i = 0; i < n; ++i) rhs[a] += basis[a][i] * y[i];
    }
    const auto coef = gauss_solve(g, rhs);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double fit = 0.0;
        for (std::size_t a = 0; a < k; ++a) fit += coef[a] * basis[a][i];
        worst = std::max(worst, std::abs(y[i] - fit));
    }
    return worst;
}

/// Shannon entropy in nats by direct summation.
inline double entropy_nats(std::span<const double> w) {
    double h = 0.0;
    for (double v : w)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

/// Two-point Bayes posterior Q(X = H | ξ_t) under dξ = σX dt + dB.
inline double two_point_posterior(double low, double high, double p_high, double sigma, double xi, double t) {
    const double log_h = std::log(p_high) + sigma * high * xi - 0.5 * sigma * sigma * high * high * t;
    const double log_l = std::log(1.0 - p_high) + sigma * low * xi - 0.5 * sigma * sigma * low * low * t;
    return 1.0 / (1.0 + std::exp(log_l - log_h));
}

}  // namespace oracle

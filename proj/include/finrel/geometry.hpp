#pragma once

// Probability measures as geometries on a finite state space.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "finrel/error.hpp"
#include "finrel/state_space.hpp"

namespace finrel {

/// Strictly positive probability weights over n states.
///
/// Construction renormalizes silently when the input sum is within
/// `kSumTolerance` of one; larger deviations are rejected.
class ProbabilityMeasure {
public:
    static constexpr double kMinWeight = 1e-300;
    static constexpr double kSumTolerance = 1e-6;

    explicit ProbabilityMeasure(std::vector<double> weights) : weights_(std::move(weights)) {
        detail::require(!weights_.empty(), "probability measure needs at least one state");
        double total = 0.0;
        for (double w : weights_) {
            detail::require(std::isfinite(w), "probability weights must be finite");
            detail::require(w > kMinWeight, "probability weights must be strictly positive");
            total += w;
        }
        detail::require(std::abs(total - 1.0) <= kSumTolerance,
                        "probability weights sum to " + std::to_string(total) + ", expected 1");
        for (double& w : weights_) w /= total;
    }
    ProbabilityMeasure(std::initializer_list<double> weights) : ProbabilityMeasure(std::vector<double>(weights)) {}

    /// Normalizes arbitrary positive mass into a measure.
    static ProbabilityMeasure from_mass(std::vector<double> mass) {
        double total = 0.0;
        for (double m : mass) {
            detail::require(std::isfinite(m) && m > 0.0, "mass must be finite and strictly positive");
            total += m;
        }
        detail::require(total > 0.0 && std::isfinite(total), "total mass must be positive and finite");
        for (double& m : mass) m /= total;
        return ProbabilityMeasure(std::move(mass));
    }

    std::size_t size() const noexcept { return weights_.size(); }
    double operator[](std::size_t i) const { return weights_[i]; }
    std::span<const double> weights() const noexcept { return weights_; }

    double mass(std::span<const StateIndex> block) const {
        double m = 0.0;
        for (auto s : block) m += weights_.at(s);
        return m;
    }

    double expectation(std::span<const double> values) const {
        detail::require(values.size() == weights_.size(), "dimension mismatch in expectation");
        double e = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) e += weights_[i] * values[i];
        return e;
    }
    double expectation(const PayoffVector& x) const { return expectation(x.values()); }

private:
    std::vector<double> weights_;
};

inline double total_variation(const ProbabilityMeasure& a, const ProbabilityMeasure& b) {
    detail::require(a.size() == b.size(), "dimension mismatch in total variation");
    double tv = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) tv += std::abs(a[i] - b[i]);
    return 0.5 * tv;
}

enum class Gauge { zero_mean_under_prior, none };

/// Per-state log-tilt field φ, meaningful up to an additive constant.
struct GeometricPotential {
    std::vector<double> phi;
    Gauge gauge = Gauge::none;

    /// Shifts φ so that E^prior[φ] = 0.
    static GeometricPotential gauged(std::vector<double> phi, const ProbabilityMeasure& prior) {
        const double mean = prior.expectation(phi);
        for (double& v : phi) v -= mean;
        return {std::move(phi), Gauge::zero_mean_under_prior};
    }

    double gauge_residual(const ProbabilityMeasure& prior) const { return prior.expectation(phi); }
};

inline ProbabilityMeasure uniform_prior(std::size_t n) {
    detail::require(n >= 1, "uniform prior needs n >= 1");
    return ProbabilityMeasure(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

inline ProbabilityMeasure uniform_prior(const StateSpace& space) { return uniform_prior(space.size()); }

/// Q(w) ∝ P(w)·exp(φ(w)). φ is shifted by its maximum before exponentiation.
inline ProbabilityMeasure exponential_tilt(const ProbabilityMeasure& prior, std::span<const double> phi) {
    detail::require(phi.size() == prior.size(), "potential and prior dimensions differ");
    const double shift = *std::max_element(phi.begin(), phi.end());
    detail::require(std::isfinite(shift), "potential must be finite");
    std::vector<double> mass(prior.size());
    double total = 0.0;
    for (std::size_t i = 0; i < mass.size(); ++i) {
        mass[i] = prior[i] * std::exp(phi[i] - shift);
        total += mass[i];
    }
    for (double& m : mass) {
        m /= total;
        if (!(m > ProbabilityMeasure::kMinWeight)) {
            throw NumericalError("exponential tilt underflows: potential range too large for a positive measure");
        }
    }
    return ProbabilityMeasure(std::move(mass));
}

inline ProbabilityMeasure exponential_tilt(const ProbabilityMeasure& prior, const GeometricPotential& phi) {
    return exponential_tilt(prior, phi.phi);
}

/// ⟨Y,Z⟩_Q = E^Q[YZ].
inline double inner_product(std::span<const double> y, std::span<const double> z, const ProbabilityMeasure& q) {
    detail::require(y.size() == q.size() && z.size() == q.size(), "dimension mismatch in inner product");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += q[i] * y[i] * z[i];
    return s;
}

inline double inner_product(const PayoffVector& y, const PayoffVector& z, const ProbabilityMeasure& q) {
    return inner_product(y.values(), z.values(), q);
}

/// Q(·|block), indexed by position within `block`.
inline ProbabilityMeasure conditional_measure(const ProbabilityMeasure& q, std::span<const StateIndex> block) {
    detail::require(!block.empty(), "cannot condition on an empty block");
    std::vector<double> mass;
    mass.reserve(block.size());
    for (auto s : block) {
        detail::require(s < q.size(), "block references state outside the measure");
        mass.push_back(q[s]);
    }
    return ProbabilityMeasure::from_mass(std::move(mass));
}

}  // namespace finrel

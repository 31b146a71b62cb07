#pragma once

// Projection pricing over a filtration, discounted returns, apparent drift
// under an observer measure, and reference-frame classification.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "finrel/error.hpp"
#include "finrel/geometry.hpp"
#include "finrel/state_space.hpp"

namespace finrel {

/// E^Q[X | σ(p)]: on each block, the Q-weighted block average.
inline PayoffVector project(const PayoffVector& x, const ProbabilityMeasure& q, const Partition& p) {
    detail::require(x.size() == q.size() && p.state_count() == q.size(), "dimension mismatch in projection");
    std::vector<double> out(x.size());
    for (const auto& block : p.blocks()) {
        double mass = 0.0, value = 0.0;
        for (auto s : block) {
            mass += q[s];
            value += q[s] * x[s];
        }
        const double avg = value / mass;
        for (auto s : block) out[s] = avg;
    }
    return PayoffVector(std::move(out));
}

/// max over block indicators Y of |⟨X − proj, Y⟩_Q|.
inline double orthogonality_residual(const PayoffVector& x, const PayoffVector& proj, const ProbabilityMeasure& q,
                                     const Partition& p) {
    detail::require(x.size() == proj.size() && x.size() == q.size(), "dimension mismatch in orthogonality check");
    double worst = 0.0;
    for (const auto& block : p.blocks()) {
        double acc = 0.0;
        for (auto s : block) acc += q[s] * (x[s] - proj[s]);
        worst = std::max(worst, std::abs(acc));
    }
    return worst;
}

/// Blockwise value at one time step. `block` indexes the partition at that time.
struct BlockValue {
    std::size_t block = 0;
    std::optional<double> value;  ///< nullopt when undefined (zero predecessor price)
};

struct PriceProcess {
    std::vector<int> times;
    double rate = 0.0;
    std::vector<PayoffVector> discounted;  ///< S̃_t = E^Q[X | F_t]
    std::vector<PayoffVector> price;       ///< S_t = e^{−r(T−t)} S̃_t
    /// returns[t-1][s] = S̃_t(s)/S̃_{t−1}(s); nullopt where S̃_{t−1} vanishes.
    std::vector<std::vector<std::optional<double>>> returns;
};

inline constexpr double kZeroPriceTolerance = 1e-300;

inline PriceProcess price_process(const PayoffVector& x, const ProbabilityMeasure& q, const Filtration& f,
                                  double rate = 0.0) {
    detail::require(x.size() == f.state_count() && q.size() == f.state_count(), "dimension mismatch in pricing");
    detail::require(std::isfinite(rate), "rate must be finite");
    PriceProcess proc;
    proc.times = f.times();
    proc.rate = rate;
    const int horizon = f.times().back();
    for (std::size_t t = 0; t < f.size(); ++t) {
        auto disc = project(x, q, f.at(t));
        const double factor = std::exp(-rate * static_cast<double>(horizon - f.times()[t]));
        std::vector<double> undisc(disc.size());
        for (std::size_t s = 0; s < disc.size(); ++s) undisc[s] = factor * disc[s];
        proc.discounted.push_back(std::move(disc));
        proc.price.emplace_back(std::move(undisc));
    }
    for (std::size_t t = 1; t < f.size(); ++t) {
        const auto& prev = proc.discounted[t - 1];
        const auto& cur = proc.discounted[t];
        std::vector<std::optional<double>> r(x.size());
        // S̃_{t−1} is constant on predecessor blocks; divide once per block.
        for (const auto& block : f.at(t - 1).blocks()) {
            const double base = prev[block.front()];
            for (auto s : block) {
                if (std::abs(base) > kZeroPriceTolerance) r[s] = cur[s] / base;
            }
        }
        proc.returns.push_back(std::move(r));
    }
    return proc;
}

/// Largest |E^Q[S̃_t | F_{t−1}] − S̃_{t−1}| over all times and predecessor blocks.
inline double martingale_residual(const PriceProcess& proc, const ProbabilityMeasure& q, const Filtration& f) {
    double worst = 0.0;
    for (std::size_t t = 1; t < proc.discounted.size(); ++t) {
        const auto cond = project(proc.discounted[t], q, f.at(t - 1));
        for (std::size_t s = 0; s < cond.size(); ++s)
            worst = std::max(worst, std::abs(cond[s] - proc.discounted[t - 1][s]));
    }
    return worst;
}

/// Per time t ≥ 1 and block b of F_{t−1}: E^observer[R̃_t | b] − 1.
using DriftTable = std::vector<std::vector<BlockValue>>;

inline DriftTable apparent_drift(const PriceProcess& proc, const ProbabilityMeasure& observer, const Filtration& f) {
    detail::require(observer.size() == f.state_count(), "observer dimension mismatch");
    DriftTable drift;
    for (std::size_t t = 1; t < proc.discounted.size(); ++t) {
        const auto& r = proc.returns[t - 1];
        const auto& blocks = f.at(t - 1).blocks();
        std::vector<BlockValue> row;
        row.reserve(blocks.size());
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            const auto& block = blocks[b];
            const bool defined = std::all_of(block.begin(), block.end(), [&](StateIndex s) { return r[s].has_value(); });
            if (!defined) {
                row.push_back({b, std::nullopt});
                continue;
            }
            double mass = 0.0, acc = 0.0;
            for (auto s : block) {
                mass += observer[s];
                acc += observer[s] * *r[s];
            }
            row.push_back({b, acc / mass - 1.0});
        }
        drift.push_back(std::move(row));
    }
    return drift;
}

enum class FrameLabel { inertial_no_gravity, accelerated_no_gravity, static_in_field, free_fall_in_field };

inline std::string to_string(FrameLabel f) {
    switch (f) {
        case FrameLabel::inertial_no_gravity: return "inertial_no_gravity";
        case FrameLabel::accelerated_no_gravity: return "accelerated_no_gravity";
        case FrameLabel::static_in_field: return "static_in_field";
        case FrameLabel::free_fall_in_field: return "free_fall_in_field";
    }
    return "unknown";
}

struct FrameReport {
    FrameLabel label = FrameLabel::inertial_no_gravity;
    /// Market geometry is curved and the observer is neither the flat prior nor the market.
    bool generic_observer = false;
    std::string note;
    DriftTable apparent_drift;
};

inline constexpr double kFrameEqualityTolerance = 1e-10;

inline FrameReport classify_frame(const ProbabilityMeasure& market, const ProbabilityMeasure& observer,
                                  const ProbabilityMeasure& flat) {
    detail::require(market.size() == observer.size() && market.size() == flat.size(),
                    "frame classification needs measures on the same state space");
    const bool curved = total_variation(market, flat) >= kFrameEqualityTolerance;
    const bool comoving = total_variation(observer, market) < kFrameEqualityTolerance;
    const bool flat_observer = total_variation(observer, flat) < kFrameEqualityTolerance;

    FrameReport report;
    if (!curved) {
        report.label = comoving ? FrameLabel::inertial_no_gravity : FrameLabel::accelerated_no_gravity;
    } else if (comoving) {
        report.label = FrameLabel::free_fall_in_field;
    } else {
        report.label = FrameLabel::static_in_field;
        if (!flat_observer) {
            report.generic_observer = true;
            report.note = "observer differs from both the flat prior and the market geometry";
        }
    }
    return report;
}

/// Classification together with the apparent drift of `x` seen by the observer.
inline FrameReport classify_frame(const ProbabilityMeasure& market, const ProbabilityMeasure& observer,
                                  const ProbabilityMeasure& flat, const PayoffVector& x, const Filtration& f) {
    auto report = classify_frame(market, observer, flat);
    report.apparent_drift = apparent_drift(price_process(x, market, f), observer, f);
    return report;
}

}  // namespace finrel

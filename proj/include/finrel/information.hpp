#pragma once

// Entropy accounting on finite state spaces: total, branch and residual
// entropy, price-induced partitions and the information revealed by prices.
// Computed in nats internally and converted on output.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "finrel/error.hpp"
#include "finrel/geometry.hpp"
#include "finrel/state_space.hpp"

namespace finrel {

enum class LogBase { two, e };

inline double to_base(double nats, LogBase base) { return base == LogBase::two ? nats / std::numbers::ln2 : nats; }

inline std::string to_string(LogBase base) { return base == LogBase::two ? "2" : "e"; }

/// −Σ p log p with 0·log 0 = 0.
inline double entropy(std::span<const double> weights, LogBase base = LogBase::two) {
    double h = 0.0;
    for (double w : weights) {
        if (w > 0.0) h -= w * std::log(w);
    }
    return to_base(h, base);
}

inline double entropy(const ProbabilityMeasure& q, LogBase base = LogBase::two) { return entropy(q.weights(), base); }

struct EntropyReport {
    LogBase base = LogBase::two;
    double total = 0.0;     ///< H(Q)
    double branch = 0.0;    ///< −Σ Q(A_i) log Q(A_i)
    double residual = 0.0;  ///< Σ Q(A_i) H(Q(·|A_i))
    double revealed = 0.0;  ///< total − residual
};

inline EntropyReport conservation_decomposition(const ProbabilityMeasure& q, const Partition& p,
                                                LogBase base = LogBase::two) {
    detail::require(p.state_count() == q.size(), "partition and measure dimensions differ");
    EntropyReport r;
    r.base = base;
    r.total = entropy(q, base);
    for (const auto& block : p.blocks()) {
        const double mass = q.mass(block);
        r.branch -= mass * std::log(mass);
        r.residual += mass * entropy(conditional_measure(q, block), LogBase::e);
    }
    r.branch = to_base(r.branch, base);
    r.residual = to_base(r.residual, base);
    r.revealed = r.total - r.residual;
    return r;
}

struct PriceLevel {
    double price = 0.0;
    Block states;
};

/// Level sets Ω_t(s) of a price vector, ordered by price.
struct PricePartition {
    std::vector<PriceLevel> levels;
    double tolerance = 1e-9;

    std::size_t size() const noexcept { return levels.size(); }

    const PriceLevel* find(double price) const {
        for (const auto& l : levels)
            if (std::abs(l.price - price) <= tolerance) return &l;
        return nullptr;
    }

    Partition as_partition(std::size_t n) const {
        Blocks blocks;
        blocks.reserve(levels.size());
        for (const auto& l : levels) blocks.push_back(l.states);
        return Partition(n, std::move(blocks));
    }
};

inline constexpr double kDefaultPriceTolerance = 1e-9;

/// Groups states whose prices lie within `tolerance`. A group whose spread exceeds
/// the tolerance (chained near-ties) is rejected as ambiguous.
inline PricePartition price_induced_partition(std::span<const double> prices,
                                              double tolerance = kDefaultPriceTolerance) {
    detail::require(!prices.empty(), "price vector is empty");
    detail::require(tolerance >= 0.0 && std::isfinite(tolerance), "price tolerance must be nonnegative");
    std::vector<StateIndex> order(prices.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        detail::require(std::isfinite(prices[i]), "prices must be finite");
        order[i] = i;
    }
    std::stable_sort(order.begin(), order.end(), [&](StateIndex a, StateIndex b) { return prices[a] < prices[b]; });

    PricePartition pp;
    pp.tolerance = tolerance;
    std::size_t start = 0;
    for (std::size_t k = 1; k <= order.size(); ++k) {
        if (k < order.size() && prices[order[k]] - prices[order[k - 1]] <= tolerance) continue;
        const double lo = prices[order[start]], hi = prices[order[k - 1]];
        if (hi - lo > tolerance) {
            throw ValidationError("ambiguous price levels: values from " + std::to_string(lo) + " to " +
                                  std::to_string(hi) + " chain within tolerance " + std::to_string(tolerance) +
                                  "; use a smaller tolerance");
        }
        PriceLevel level;
        level.states.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                            order.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(level.states.begin(), level.states.end());
        double sum = 0.0;
        for (auto s : level.states) sum += prices[s];
        level.price = sum / static_cast<double>(level.states.size());
        pp.levels.push_back(std::move(level));
        start = k;
    }
    return pp;
}

inline PricePartition price_induced_partition(const PayoffVector& prices, double tolerance = kDefaultPriceTolerance) {
    return price_induced_partition(prices.values(), tolerance);
}

struct PricePosterior {
    Block states;                  ///< Ω_t(s)
    ProbabilityMeasure posterior;  ///< Q(·|S̃_t = s), indexed like `states`
    double residual_entropy = 0.0; ///< H_t(s)
};

inline PricePosterior posterior_given_price(const ProbabilityMeasure& q, const PricePartition& pp, double price,
                                            LogBase base = LogBase::two) {
    const PriceLevel* level = pp.find(price);
    if (!level) throw ValidationError("price " + std::to_string(price) + " is not a level of the price partition");
    auto post = conditional_measure(q, level->states);
    const double h = entropy(post, base);
    return {level->states, std::move(post), h};
}

/// H(Q) − Σ_s Q(Ω_t(s))·H_t(s).
inline double revealed_information(const ProbabilityMeasure& q, const PricePartition& pp,
                                   LogBase base = LogBase::two) {
    double residual = 0.0;
    for (const auto& level : pp.levels) {
        residual += q.mass(level.states) * entropy(conditional_measure(q, level.states), base);
    }
    return entropy(q, base) - residual;
}

}  // namespace finrel

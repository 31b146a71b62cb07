#pragma once

// Finite terminal state spaces, payoff vectors, partitions and filtrations.
//
// States are addressed by 0-based index everywhere; labels exist only for
// presentation and scenario parsing.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "finrel/error.hpp"

namespace finrel {

using StateIndex = std::size_t;
using Block = std::vector<StateIndex>;
using Blocks = std::vector<Block>;

class StateSpace {
public:
    explicit StateSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {
        detail::require(!labels_.empty(), "state space must contain at least one state");
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            auto [it, inserted] = lookup_.emplace(labels_[i], i);
            detail::require(inserted, "duplicate state label '" + labels_[i] + "'");
        }
    }

    /// States labelled w1..wn.
    static StateSpace indexed(std::size_t n) {
        std::vector<std::string> labels;
        labels.reserve(n);
        for (std::size_t i = 1; i <= n; ++i) labels.push_back("w" + std::to_string(i));
        return StateSpace(std::move(labels));
    }

    std::size_t size() const noexcept { return labels_.size(); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    const std::string& label(StateIndex i) const { return labels_.at(i); }

    std::optional<StateIndex> find(const std::string& label) const {
        auto it = lookup_.find(label);
        if (it == lookup_.end()) return std::nullopt;
        return it->second;
    }

    StateIndex index_of(const std::string& label) const {
        auto idx = find(label);
        if (!idx) throw ValidationError("unknown state label '" + label + "'");
        return *idx;
    }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, StateIndex> lookup_;
};

/// Terminal payoff (or any real random variable) over the state space.
class PayoffVector {
public:
    PayoffVector() = default;
    explicit PayoffVector(std::vector<double> values) : values_(std::move(values)) {
        for (double v : values_) detail::require(std::isfinite(v), "payoff entries must be finite");
    }
    PayoffVector(std::initializer_list<double> values) : PayoffVector(std::vector<double>(values)) {}

    static PayoffVector constant(std::size_t n, double c) { return PayoffVector(std::vector<double>(n, c)); }
    static PayoffVector indicator(std::size_t n, std::span<const StateIndex> support) {
        std::vector<double> v(n, 0.0);
        for (auto i : support) v.at(i) = 1.0;
        return PayoffVector(std::move(v));
    }

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    std::span<const double> values() const noexcept { return values_; }
    const std::vector<double>& vector() const noexcept { return values_; }

private:
    std::vector<double> values_;
};

struct Violation {
    std::size_t time_index = 0;
    std::optional<std::size_t> block;
    std::string message;
};

struct ValidationResult {
    std::vector<Violation> violations;

    bool ok() const noexcept { return violations.empty(); }
    explicit operator bool() const noexcept { return ok(); }

    std::vector<std::string> messages() const {
        std::vector<std::string> out;
        out.reserve(violations.size());
        for (const auto& v : violations) out.push_back(v.message);
        return out;
    }
};

/// Checks that `blocks` is a partition of {0,...,n-1}: nonempty, disjoint, covering.
inline ValidationResult validate_partition(std::size_t n, const Blocks& blocks, std::size_t time_index = 0) {
    ValidationResult result;
    auto report = [&](std::optional<std::size_t> b, std::string msg) {
        result.violations.push_back({time_index, b, "time " + std::to_string(time_index) + ": " + std::move(msg)});
    };
    std::vector<int> owner(n, -1);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (blocks[b].empty()) report(b, "block " + std::to_string(b) + " is empty");
        for (StateIndex s : blocks[b]) {
            if (s >= n) {
                report(b, "block " + std::to_string(b) + " references state " + std::to_string(s) +
                              " outside [0," + std::to_string(n) + ")");
                continue;
            }
            if (owner[s] >= 0) {
                report(b, "state " + std::to_string(s) + " appears in blocks " + std::to_string(owner[s]) +
                              " and " + std::to_string(b));
            } else {
                owner[s] = static_cast<int>(b);
            }
        }
    }
    for (std::size_t s = 0; s < n; ++s) {
        if (owner[s] < 0) report(std::nullopt, "state " + std::to_string(s) + " is not covered");
    }
    return result;
}

class Partition {
public:
    Partition(std::size_t n, Blocks blocks) : blocks_(std::move(blocks)), owner_(n, 0) {
        auto check = validate_partition(n, blocks_);
        if (!check) throw ValidationError("invalid partition", check.messages());
        for (std::size_t b = 0; b < blocks_.size(); ++b) {
            std::sort(blocks_[b].begin(), blocks_[b].end());
            for (StateIndex s : blocks_[b]) owner_[s] = b;
        }
    }

    static Partition trivial(std::size_t n) {
        Block all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;
        return Partition(n, {std::move(all)});
    }

    static Partition discrete(std::size_t n) {
        Blocks blocks(n);
        for (std::size_t i = 0; i < n; ++i) blocks[i] = {i};
        return Partition(n, std::move(blocks));
    }

    std::size_t state_count() const noexcept { return owner_.size(); }
    std::size_t block_count() const noexcept { return blocks_.size(); }
    const Blocks& blocks() const noexcept { return blocks_; }
    const Block& block(std::size_t b) const { return blocks_.at(b); }

    /// Block containing `state`.
    std::size_t block_of(StateIndex state) const {
        if (state >= owner_.size()) {
            throw ValidationError("state " + std::to_string(state) + " out of range for partition over " +
                                  std::to_string(owner_.size()) + " states");
        }
        return owner_[state];
    }

    /// True when every block of *this lies inside a single block of `coarse`.
    bool refines(const Partition& coarse) const {
        if (coarse.state_count() != state_count()) return false;
        return std::all_of(blocks_.begin(), blocks_.end(), [&](const Block& b) {
            return std::all_of(b.begin(), b.end(),
                               [&](StateIndex s) { return coarse.block_of(s) == coarse.block_of(b.front()); });
        });
    }

private:
    Blocks blocks_;
    std::vector<std::size_t> owner_;
};

inline std::size_t block_index(const Partition& p, StateIndex state) { return p.block_of(state); }

/// Checks a chain of raw block lists: coverage of every partition, strictly increasing times,
/// a trivial first partition, refinement between consecutive partitions and, when `complete`,
/// a discrete final partition.
inline ValidationResult validate_filtration(std::size_t n, std::span<const Blocks> chain,
                                            std::span<const int> times = {}, bool complete = false) {
    ValidationResult result;
    if (chain.empty()) {
        result.violations.push_back({0, std::nullopt, "filtration has no time steps"});
        return result;
    }
    if (!times.empty() && times.size() != chain.size()) {
        result.violations.push_back({0, std::nullopt, "filtration has " + std::to_string(chain.size()) +
                                                          " partitions but " + std::to_string(times.size()) +
                                                          " times"});
    }
    for (std::size_t t = 1; t < times.size(); ++t) {
        if (times[t] <= times[t - 1]) {
            result.violations.push_back({t, std::nullopt, "time " + std::to_string(t) + ": times must increase"});
        }
    }

    std::vector<bool> well_formed(chain.size());
    for (std::size_t t = 0; t < chain.size(); ++t) {
        auto part = validate_partition(n, chain[t], t);
        well_formed[t] = part.ok();
        result.violations.insert(result.violations.end(), part.violations.begin(), part.violations.end());
    }

    if (well_formed[0] && chain[0].size() != 1) {
        result.violations.push_back({0, std::nullopt, "time 0: first partition must be the trivial partition"});
    }

    for (std::size_t t = 1; t < chain.size(); ++t) {
        if (!well_formed[t] || !well_formed[t - 1]) continue;
        std::vector<std::size_t> prev_owner(n);
        for (std::size_t b = 0; b < chain[t - 1].size(); ++b)
            for (StateIndex s : chain[t - 1][b]) prev_owner[s] = b;
        for (std::size_t b = 0; b < chain[t].size(); ++b) {
            const auto& blk = chain[t][b];
            bool straddles = std::any_of(blk.begin(), blk.end(),
                                         [&](StateIndex s) { return prev_owner[s] != prev_owner[blk.front()]; });
            if (straddles) {
                result.violations.push_back(
                    {t, b, "time " + std::to_string(t) + ": block " + std::to_string(b) +
                               " straddles several blocks of time " + std::to_string(t - 1)});
                break;
            }
        }
    }

    if (complete && well_formed.back() && chain.back().size() != n) {
        result.violations.push_back({chain.size() - 1, std::nullopt,
                                     "filtration is declared complete but its last partition is not discrete"});
    }
    return result;
}

/// Nested sequence of partitions F_0 ⊂ F_1 ⊂ ... ⊂ F_T.
class Filtration {
public:
    Filtration(std::size_t n, std::vector<Blocks> chain, bool complete = false, std::vector<int> times = {})
        : times_(std::move(times)), complete_(complete) {
        if (times_.empty()) {
            times_.resize(chain.size());
            for (std::size_t t = 0; t < chain.size(); ++t) times_[t] = static_cast<int>(t);
        }
        auto check = validate_filtration(n, chain, times_, complete);
        if (!check) throw ValidationError("invalid filtration", check.messages());
        partitions_.reserve(chain.size());
        for (auto& blocks : chain) partitions_.emplace_back(n, std::move(blocks));
    }

    std::size_t size() const noexcept { return partitions_.size(); }
    std::size_t state_count() const noexcept { return partitions_.front().state_count(); }
    const std::vector<int>& times() const noexcept { return times_; }
    const Partition& at(std::size_t t) const { return partitions_.at(t); }
    const std::vector<Partition>& partitions() const noexcept { return partitions_; }
    bool complete() const noexcept { return complete_; }

private:
    std::vector<int> times_;
    std::vector<Partition> partitions_;
    bool complete_;
};

inline ValidationResult validate_filtration(const Filtration& f) {
    std::vector<Blocks> chain;
    chain.reserve(f.size());
    for (const auto& p : f.partitions()) chain.push_back(p.blocks());
    return validate_filtration(f.state_count(), chain, f.times(), f.complete());
}

}  // namespace finrel

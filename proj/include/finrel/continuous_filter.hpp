#pragma once

// Continuous-time posterior geometry under the observation process
//
//     dξ_t = σ X dt + dB_t.
//
// The exact posterior is an exponential tilt of the prior,
//     q_t(x) ∝ p(x) exp(σ x ξ_t − ½ σ² x² t),
// and it solves dq_t(x) = σ (x − m_t) q_t(x) dW_t^Q with innovation
// dW^Q = dξ − σ m_t dt. Prices follow S_t = e^{−r(T−t)} m_t with diffusion
// coefficient Σ_t = e^{−r(T−t)} σ Var^Q(X | F_t).
//
// The prior is a finite grid; the binary model is the two-point grid {L, H}.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <concepts>
#include <exception>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "finrel/error.hpp"

namespace finrel {

struct ObservationModel {
    double sigma = 1.0;    ///< constraint strength, per √time
    double horizon = 1.0;  ///< T
    double dt = 1e-3;
    double rate = 0.0;     ///< continuously compounded r_f

    void validate() const {
        detail::require(std::isfinite(sigma) && sigma > 0.0, "model.sigma must be positive");
        detail::require(std::isfinite(horizon) && horizon > 0.0, "model.T must be positive");
        detail::require(std::isfinite(dt) && dt > 0.0, "model.dt must be positive");
        detail::require(dt <= horizon, "model.dt must not exceed model.T");
        detail::require(std::isfinite(rate), "model.r_f must be finite");
    }

    /// Number of steps; the final step is shortened when dt does not divide T.
    std::size_t steps() const { return static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9)); }

    std::vector<double> time_grid() const {
        const std::size_t k = steps();
        std::vector<double> t(k + 1);
        for (std::size_t i = 0; i <= k; ++i) t[i] = std::min(static_cast<double>(i) * dt, horizon);
        t[k] = horizon;
        return t;
    }

    double discount(double t) const { return std::exp(-rate * (horizon - t)); }
};

struct GridPrior {
    std::vector<double> grid;
    std::vector<double> weights;

    GridPrior(std::vector<double> support, std::vector<double> w) : grid(std::move(support)), weights(std::move(w)) {
        detail::require(!grid.empty(), "prior grid is empty");
        detail::require(grid.size() == weights.size(), "prior.grid and prior.weights differ in length");
        double total = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            detail::require(std::isfinite(grid[i]), "prior grid must be finite");
            detail::require(i == 0 || grid[i] > grid[i - 1], "prior grid must be strictly increasing");
            detail::require(std::isfinite(weights[i]) && weights[i] > 0.0, "prior weights must be positive");
            total += weights[i];
        }
        detail::require(std::abs(total - 1.0) <= 1e-6, "prior weights must sum to 1");
        for (double& v : weights) v /= total;
    }

    static GridPrior binary(double low, double high, double pi_high) {
        detail::require(high > low, "binary model requires H > L");
        detail::require(pi_high > 0.0 && pi_high < 1.0, "binary grid prior requires 0 < pi0 < 1");
        return GridPrior({low, high}, {1.0 - pi_high, pi_high});
    }

    std::size_t size() const noexcept { return grid.size(); }
    double mean() const { return moments(weights).first; }

    /// (mean, variance) of the grid under `w`.
    std::pair<double, double> moments(std::span<const double> w) const {
        double m = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) m += w[i] * grid[i];
        double v = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) v += w[i] * (grid[i] - m) * (grid[i] - m);
        return {m, v};
    }
};

// ---------------------------------------------------------------------------
// Random numbers

/// SplitMix64 finalizer; decorrelates (seed, path) pairs into engine seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t path) { return mix64(mix64(seed) ^ path); }

/// Standard normals from std::mt19937_64 via Box–Muller. The engine is fully
/// specified by the standard and the transform avoids library-specific
/// distributions, so streams are reproducible across toolchains.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

    double uniform() {  // (0, 1)
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double operator()() {
        if (cached_) {
            cached_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(theta);
        cached_ = true;
        return r * std::cos(theta);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool cached_ = false;
};

template <class G>
concept NormalSource = requires(G g) {
    { g() } -> std::convertible_to<double>;
};

// ---------------------------------------------------------------------------
// Observation and exact posterior

/// ξ on the model's time grid, ξ_0 = 0.
template <NormalSource G>
std::vector<double> simulate_observation(const ObservationModel& model, double true_state, G& normals) {
    model.validate();
    const auto t = model.time_grid();
    std::vector<double> xi(t.size(), 0.0);
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
        const double h = t[k + 1] - t[k];
        xi[k + 1] = xi[k] + model.sigma * true_state * h + std::sqrt(h) * normals();
    }
    return xi;
}

inline std::vector<double> simulate_observation(const ObservationModel& model, double true_state,
                                                std::uint64_t seed) {
    NormalStream normals(seed);
    return simulate_observation(model, true_state, normals);
}

/// Bayes posterior q_t on the prior grid given ξ_t.
inline std::vector<double> exact_posterior(const GridPrior& prior, const ObservationModel& model, double xi_t,
                                           double t) {
    detail::require(t >= 0.0, "posterior time must be nonnegative");
    std::vector<double> logw(prior.size());
    for (std::size_t i = 0; i < prior.size(); ++i) {
        const double x = prior.grid[i];
        logw[i] = std::log(prior.weights[i]) + model.sigma * x * xi_t - 0.5 * model.sigma * model.sigma * x * x * t;
    }
    const double shift = *std::max_element(logw.begin(), logw.end());
    double z = 0.0;
    for (double& l : logw) {
        l = std::exp(l - shift);
        z += l;
    }
    for (double& l : logw) l /= z;
    return logw;
}

// ---------------------------------------------------------------------------
// SDE simulation

enum class FilterMode {
    observation,  ///< ξ generated from a hidden state; ΔW^Q = Δξ − σ m dt
    innovation,   ///< ΔW^Q drawn directly
};

struct FilterPath {
    std::vector<double> times;
    std::vector<double> xi;
    std::vector<std::vector<double>> posterior;  ///< empty unless recorded
    std::vector<double> mean;                    ///< m_t
    std::vector<double> variance;                ///< Var^Q(X | F_t)
    std::vector<double> price;                   ///< e^{−r(T−t)} m_t
    std::vector<double> vol;                     ///< e^{−r(T−t)} σ Var
    std::vector<double> entropy;                 ///< H(q_t), nats
    std::size_t clip_count = 0;                  ///< atoms clipped at zero
    double max_mass_drift = 0.0;                 ///< max |Σq − 1| before renormalization
};

struct FilterOptions {
    bool record_posterior = true;
};

namespace detail {

class PathRecorder {
public:
    PathRecorder(const GridPrior& prior, const ObservationModel& model, FilterPath& path, FilterOptions opts)
        : prior_(prior), model_(model), path_(path), opts_(opts) {}

    void record(std::size_t k, std::span<const double> q) {
        const auto [m, v] = prior_.moments(q);
        const double disc = model_.discount(path_.times[k]);
        path_.mean[k] = m;
        path_.variance[k] = v;
        path_.price[k] = disc * m;
        path_.vol[k] = disc * model_.sigma * v;
        double h = 0.0;
        for (double w : q)
            if (w > 0.0) h -= w * std::log(w);
        path_.entropy[k] = h;
        if (opts_.record_posterior) path_.posterior[k].assign(q.begin(), q.end());
    }

private:
    const GridPrior& prior_;
    const ObservationModel& model_;
    FilterPath& path_;
    FilterOptions opts_;
};

inline FilterPath allocate_path(const ObservationModel& model, FilterOptions opts) {
    FilterPath p;
    p.times = model.time_grid();
    const auto n = p.times.size();
    p.xi.assign(n, 0.0);
    if (opts.record_posterior) p.posterior.resize(n);
    p.mean.resize(n);
    p.variance.resize(n);
    p.price.resize(n);
    p.vol.resize(n);
    p.entropy.resize(n);
    return p;
}

/// One Euler–Maruyama step q ← q (1 + σ (x − m) ΔW), clipped at 0 and renormalized.
inline void euler_step(const GridPrior& prior, double sigma, double m, double dw, std::vector<double>& q,
                       FilterPath& path) {
    double total = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        q[i] *= 1.0 + sigma * (prior.grid[i] - m) * dw;
        if (q[i] < 0.0) {
            q[i] = 0.0;
            ++path.clip_count;
        }
        total += q[i];
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
        throw NumericalError("filter step produced zero posterior mass; reduce dt");
    }
    path.max_mass_drift = std::max(path.max_mass_drift, std::abs(total - 1.0));
    for (double& w : q) w /= total;
}

}  // namespace detail

/// Runs the posterior SDE along a given observation path (observation mode).
inline FilterPath filter_observation_path(const GridPrior& prior, const ObservationModel& model,
                                          std::span<const double> xi, FilterOptions opts = {}) {
    model.validate();
    FilterPath path = detail::allocate_path(model, opts);
    detail::require(xi.size() == path.times.size(), "observation path does not match the model time grid");
    path.xi.assign(xi.begin(), xi.end());
    detail::PathRecorder rec(prior, model, path, opts);

    std::vector<double> q = prior.weights;
    rec.record(0, q);
    for (std::size_t k = 0; k + 1 < path.times.size(); ++k) {
        const double h = path.times[k + 1] - path.times[k];
        const double m = path.mean[k];
        const double dw = (xi[k + 1] - xi[k]) - model.sigma * m * h;
        detail::euler_step(prior, model.sigma, m, dw, q, path);
        rec.record(k + 1, q);
    }
    return path;
}

/// Observation mode: ξ is generated from `true_state`, then filtered.
inline FilterPath simulate_filter_sde(const GridPrior& prior, const ObservationModel& model, double true_state,
                                      std::uint64_t seed, FilterOptions opts = {}) {
    const auto xi = simulate_observation(model, true_state, seed);
    return filter_observation_path(prior, model, xi, opts);
}

/// Innovation mode: ΔW^Q is the primitive noise; ξ is reconstructed as
/// ξ_{k+1} = ξ_k + σ m_k dt + ΔW^Q_k.
template <NormalSource G>
FilterPath simulate_filter_sde_innovation(const GridPrior& prior, const ObservationModel& model, G& normals,
                                          FilterOptions opts = {}) {
    model.validate();
    FilterPath path = detail::allocate_path(model, opts);
    detail::PathRecorder rec(prior, model, path, opts);

    std::vector<double> q = prior.weights;
    rec.record(0, q);
    for (std::size_t k = 0; k + 1 < path.times.size(); ++k) {
        const double h = path.times[k + 1] - path.times[k];
        const double m = path.mean[k];
        const double dw = std::sqrt(h) * normals();
        path.xi[k + 1] = path.xi[k] + model.sigma * m * h + dw;
        detail::euler_step(prior, model.sigma, m, dw, q, path);
        rec.record(k + 1, q);
    }
    return path;
}

inline FilterPath simulate_filter_sde_innovation(const GridPrior& prior, const ObservationModel& model,
                                                 std::uint64_t seed, FilterOptions opts = {}) {
    NormalStream normals(seed);
    return simulate_filter_sde_innovation(prior, model, normals, opts);
}

/// Binary posterior π_t = Q(X = H | F_t) under dπ = σ (H − L) π (1 − π) dW^Q,
/// clamped to [0, 1]. Posterior vectors are (1 − π, π) over the grid {L, H}.
template <NormalSource G>
FilterPath simulate_binary_sde(const ObservationModel& model, double low, double high, double pi0, G& normals,
                               FilterOptions opts = {}) {
    model.validate();
    detail::require(high > low, "binary model requires H > L");
    detail::require(pi0 >= 0.0 && pi0 <= 1.0, "binary model requires 0 <= pi0 <= 1");
    FilterPath path = detail::allocate_path(model, opts);
    const double spread = high - low;

    auto record = [&](std::size_t k, double pi) {
        const double disc = model.discount(path.times[k]);
        const double m = low + spread * pi;
        const double v = spread * spread * pi * (1.0 - pi);
        path.mean[k] = m;
        path.variance[k] = v;
        path.price[k] = disc * m;
        path.vol[k] = disc * model.sigma * v;
        double h = 0.0;
        if (pi > 0.0) h -= pi * std::log(pi);
        if (pi < 1.0) h -= (1.0 - pi) * std::log(1.0 - pi);
        path.entropy[k] = h;
        if (opts.record_posterior) path.posterior[k] = {1.0 - pi, pi};
    };

    double pi = pi0;
    record(0, pi);
    for (std::size_t k = 0; k + 1 < path.times.size(); ++k) {
        const double h = path.times[k + 1] - path.times[k];
        const double dw = std::sqrt(h) * normals();
        path.xi[k + 1] = path.xi[k] + model.sigma * path.mean[k] * h + dw;
        double next = pi + model.sigma * spread * pi * (1.0 - pi) * dw;
        if (next < 0.0 || next > 1.0) {
            ++path.clip_count;
            next = std::clamp(next, 0.0, 1.0);
        }
        pi = next;
        record(k + 1, pi);
    }
    return path;
}

inline FilterPath simulate_binary_sde(const ObservationModel& model, double low, double high, double pi0,
                                      std::uint64_t seed, FilterOptions opts = {}) {
    NormalStream normals(seed);
    return simulate_binary_sde(model, low, high, pi0, normals, opts);
}

/// π_t recovered from a binary path.
inline std::vector<double> binary_pi(const FilterPath& path, double low, double high) {
    std::vector<double> pi(path.mean.size());
    for (std::size_t k = 0; k < pi.size(); ++k) pi[k] = (path.mean[k] - low) / (high - low);
    return pi;
}

struct VolPoint {
    double pi = 0.0;
    double vol = 0.0;
};

/// Σ(π) = σ (H − L)² π (1 − π) on π_i = i/(points − 1).
inline std::vector<VolPoint> volatility_uncertainty_curve(const ObservationModel& model, double low, double high,
                                                          std::size_t points = 101) {
    detail::require(high > low, "volatility curve requires H > L");
    detail::require(points >= 2, "volatility curve needs at least two points");
    const double scale = model.sigma * (high - low) * (high - low);
    const auto n = static_cast<double>(points - 1);
    std::vector<VolPoint> curve(points);
    for (std::size_t i = 0; i < points; ++i) {
        const auto a = static_cast<double>(i);
        // i(N − i)/N² keeps Σ(π) and Σ(1 − π) bitwise identical.
        curve[i] = {a / n, scale * (a * (n - a)) / (n * n)};
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Monte Carlo batches

struct PathStats {
    double initial_mean = 0.0;
    double terminal_mean = 0.0;
    double realized_qv = 0.0;    ///< Σ (Δm)²
    double integrated_var = 0.0; ///< Σ (σ v_k)² dt_k
    std::size_t clip_count = 0;
    double max_mass_drift = 0.0;
};

inline PathStats path_stats(const FilterPath& p, double sigma) {
    PathStats s;
    s.initial_mean = p.mean.front();
    s.terminal_mean = p.mean.back();
    for (std::size_t k = 0; k + 1 < p.mean.size(); ++k) {
        const double dm = p.mean[k + 1] - p.mean[k];
        const double diffusion = sigma * p.variance[k];
        s.realized_qv += dm * dm;
        s.integrated_var += diffusion * diffusion * (p.times[k + 1] - p.times[k]);
    }
    s.clip_count = p.clip_count;
    s.max_mass_drift = p.max_mass_drift;
    return s;
}

struct BatchSummary {
    std::size_t paths = 0;
    double initial_mean = 0.0;
    double terminal_mean = 0.0;     ///< Monte Carlo mean of m_T
    double terminal_std_error = 0.0;
    bool martingale_pass = false;   ///< |mean(m_T) − m_0| < 3 SE
    double qv_relative_error = 0.0; ///< mean over paths of |QV − ∫Σ²dt| / ∫Σ²dt
    std::size_t clip_count = 0;
    double max_mass_drift = 0.0;
};

/// Runs `paths` independent simulations with per-path seeds derive_seed(seed, i).
/// Results depend only on (seed, paths), not on `threads`.
inline std::vector<PathStats> run_paths(std::size_t paths, std::uint64_t seed,
                                        const std::function<PathStats(std::size_t, std::uint64_t)>& simulate,
                                        unsigned threads = 0) {
    std::vector<PathStats> stats(paths);
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(paths, 1)));
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(threads);
    auto worker = [&](unsigned id) {
        try {
            for (std::size_t i = next++; i < paths; i = next++) stats[i] = simulate(i, derive_seed(seed, i));
        } catch (...) {
            errors[id] = std::current_exception();
            next = paths;
        }
    };
    if (threads == 1) {
        worker(0);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return stats;
}

inline BatchSummary summarize(std::span<const PathStats> stats) {
    BatchSummary s;
    s.paths = stats.size();
    if (stats.empty()) return s;
    s.initial_mean = stats.front().initial_mean;
    const auto n = static_cast<double>(stats.size());
    double sum = 0.0, sumsq = 0.0, rel = 0.0;
    std::size_t rel_count = 0;
    for (const auto& p : stats) {
        sum += p.terminal_mean;
        s.clip_count += p.clip_count;
        s.max_mass_drift = std::max(s.max_mass_drift, p.max_mass_drift);
        if (p.integrated_var > 0.0) {
            rel += std::abs(p.realized_qv - p.integrated_var) / p.integrated_var;
            ++rel_count;
        }
    }
    s.terminal_mean = sum / n;
    for (const auto& p : stats) sumsq += (p.terminal_mean - s.terminal_mean) * (p.terminal_mean - s.terminal_mean);
    const double sd = stats.size() > 1 ? std::sqrt(sumsq / (n - 1.0)) : 0.0;
    s.terminal_std_error = sd / std::sqrt(n);
    const double gap = std::abs(s.terminal_mean - s.initial_mean);
    s.martingale_pass = s.terminal_std_error > 0.0 ? gap < 3.0 * s.terminal_std_error : gap < 1e-12;
    s.qv_relative_error = rel_count > 0 ? rel / static_cast<double>(rel_count) : 0.0;
    return s;
}

/// One path of a grid-prior batch. In observation mode without a fixed
/// `true_state`, the hidden state is drawn from the prior.
inline FilterPath simulate_batch_path(const GridPrior& prior, const ObservationModel& model, FilterMode mode,
                                      std::optional<double> true_state, std::uint64_t path_seed,
                                      FilterOptions opts = {}) {
    NormalStream normals(path_seed);
    if (mode == FilterMode::innovation) return simulate_filter_sde_innovation(prior, model, normals, opts);
    double state = prior.grid.back();
    if (true_state) {
        state = *true_state;
    } else {
        const double u = normals.uniform();
        double acc = 0.0;
        for (std::size_t i = 0; i < prior.size(); ++i) {
            acc += prior.weights[i];
            if (u < acc) {
                state = prior.grid[i];
                break;
            }
        }
    }
    const auto xi = simulate_observation(model, state, normals);
    return filter_observation_path(prior, model, xi, opts);
}

inline std::vector<PathStats> run_filter_batch(const GridPrior& prior, const ObservationModel& model,
                                               FilterMode mode, std::size_t paths, std::uint64_t seed,
                                               std::optional<double> true_state = std::nullopt,
                                               unsigned threads = 0) {
    const FilterOptions opts{.record_posterior = false};
    return run_paths(
        paths, seed,
        [&](std::size_t, std::uint64_t path_seed) {
            return path_stats(simulate_batch_path(prior, model, mode, true_state, path_seed, opts), model.sigma);
        },
        threads);
}

inline std::vector<PathStats> run_binary_batch(const ObservationModel& model, double low, double high, double pi0,
                                               std::size_t paths, std::uint64_t seed, unsigned threads = 0) {
    const FilterOptions opts{.record_posterior = false};
    return run_paths(
        paths, seed,
        [&](std::size_t, std::uint64_t path_seed) {
            return path_stats(simulate_binary_sde(model, low, high, pi0, path_seed, opts), model.sigma);
        },
        threads);
}

}  // namespace finrel

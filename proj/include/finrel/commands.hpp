#pragma once

// Command dispatch behind the `finrel` executable. Each command prints a JSON
// report to `out` and, when an output directory is configured, writes JSON
// and CSV files there.
//
// Exit codes: 0 success, 1 validation error, 2 numerical failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "finrel/continuous_filter.hpp"
#include "finrel/eight_state_example.hpp"
#include "finrel/error.hpp"
#include "finrel/field_solver.hpp"
#include "finrel/information.hpp"
#include "finrel/maxent.hpp"
#include "finrel/pricing.hpp"
#include "finrel/scenario.hpp"

namespace finrel::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kNumerical = 2 };

struct RunOptions {
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<LogBase> base;
    std::optional<double> tolerance;
    std::optional<std::size_t> paths;
    std::optional<double> dt;
    std::size_t csv_paths = 10;  ///< per-path CSV files written by `simulate`
};

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
    return os.str();
}

inline std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

inline json labelled(const StateSpace& space, std::span<const double> values) {
    json j = json::object();
    for (std::size_t i = 0; i < values.size(); ++i) j[space.label(i)] = values[i];
    return j;
}

inline json labels_of(const StateSpace& space, const Block& block) {
    json j = json::array();
    for (auto s : block) j.push_back(space.label(s));
    return j;
}

class Emitter {
public:
    Emitter(const RunOptions& opts, std::ostream& out) : dir_(opts.out_dir), out_(out) {
        if (dir_) std::filesystem::create_directories(*dir_);
    }

    bool writes_files() const { return dir_.has_value(); }

    void report(const std::string& file, const json& doc) {
        out_ << doc.dump(2) << '\n';
        if (dir_) write(file, doc.dump(2) + "\n");
    }

    void file(const std::string& name, const std::string& content) {
        if (dir_) write(name, content);
    }

private:
    void write(const std::string& name, const std::string& content) {
        std::ofstream f(*dir_ / name, std::ios::binary);
        if (!f) throw ValidationError("cannot write output file '" + (*dir_ / name).string() + "'");
        f << content;
    }

    std::optional<std::filesystem::path> dir_;
    std::ostream& out_;
};

inline Scenario load(const std::vector<std::string>& args, std::size_t index, const std::string& command) {
    if (args.size() <= index) throw ValidationError("command '" + command + "' needs a scenario path");
    return load_scenario(args[index]);
}

inline LogBase base_of(const Scenario& sc, const RunOptions& opts) { return opts.base.value_or(sc.base); }

// ---------------------------------------------------------------------------

inline int cmd_field(const std::vector<std::string>& args, const RunOptions& opts, std::ostream& out) {
    if (args.empty() || args[0] != "solve") throw ValidationError("usage: finrel field solve <scenario>");
    const auto sc = load(args, 1, "field solve");
    require_sections(sc, {"states", "source"}, "field solve");
    const auto prior = reference_measure(sc);
    const auto graph = scenario_graph(sc);
    const auto sol = solve_field_equation_detailed(build_laplacian(graph), *sc.source, prior);
    const auto q = exponential_tilt(prior, sol.potential);

    json doc;
    doc["phi"] = labelled(*sc.states, sol.potential.phi);
    doc["Q"] = labelled(*sc.states, q.weights());
    doc["kappa"] = sc.source->kappa;
    doc["residual_inf"] = sol.residual;
    doc["gauge"] = sol.gauge;
    doc["graph"] = sc.edges ? "explicit" : "complete";
    Emitter(opts, out).report("field.json", doc);
    return kOk;
}

inline int cmd_maxent(const std::vector<std::string>& args, const RunOptions& opts, std::ostream& out) {
    const auto sc = load(args, 0, "maxent");
    require_sections(sc, {"states", "constraints"}, "maxent");
    const auto prior = reference_measure(sc);
    const auto sol = solve_maxent_detailed(prior, *sc.constraints);

    json doc;
    doc["Q"] = labelled(*sc.states, sol.measure.weights());
    doc["multipliers"] = sol.multipliers;
    doc["iterations"] = sol.iterations;
    doc["max_violation"] = sol.max_violation;
    doc["relative_entropy_nats"] = relative_entropy(sol.measure, prior);
    const auto base = base_of(sc, opts);
    doc["entropy"] = entropy(sol.measure, base);
    doc["base"] = to_string(base);
    Emitter(opts, out).report("maxent.json", doc);
    return kOk;
}

inline int cmd_price(const std::vector<std::string>& args, const RunOptions& opts, std::ostream& out) {
    const auto sc = load(args, 0, "price");
    require_sections(sc, {"states", "payoff", "filtration"}, "price");
    const auto f = scenario_filtration(sc);
    const auto q = market_geometry(sc);
    const auto observer = observer_measure(sc, q);
    const auto proc = price_process(*sc.payoff, q, f, sc.rate);
    const auto drift = apparent_drift(proc, observer, f);
    const auto frame = classify_frame(q, observer, reference_measure(sc));
    const auto& space = *sc.states;

    json doc;
    doc["Q"] = labelled(space, q.weights());
    doc["rate"] = sc.rate;
    doc["frame"] = to_string(frame.label);
    doc["martingale_residual"] = martingale_residual(proc, q, f);
    json times = json::array();
    std::ostringstream csv;
    csv << "time,state,block,discounted_price,price,return,drift\n";
    for (std::size_t t = 0; t < f.size(); ++t) {
        json entry;
        entry["time"] = f.times()[t];
        entry["discounted"] = labelled(space, proc.discounted[t].values());
        entry["price"] = labelled(space, proc.price[t].values());
        entry["orthogonality_residual"] = orthogonality_residual(*sc.payoff, proc.discounted[t], q, f.at(t));
        if (t > 0) {
            json drifts = json::array();
            for (const auto& d : drift[t - 1]) {
                json bd;
                bd["block"] = labels_of(space, f.at(t - 1).block(d.block));
                bd["drift"] = d.value ? json(*d.value) : json(nullptr);
                drifts.push_back(bd);
            }
            entry["apparent_drift"] = drifts;
        }
        times.push_back(entry);

        for (std::size_t s = 0; s < space.size(); ++s) {
            std::optional<double> ret, dr;
            if (t > 0) {
                ret = proc.returns[t - 1][s];
                dr = drift[t - 1][f.at(t - 1).block_of(s)].value;
            }
            csv << f.times()[t] << ',' << space.label(s) << ',' << f.at(t).block_of(s) << ','
                << fmt(proc.discounted[t][s]) << ',' << fmt(proc.price[t][s]) << ',' << fmt(ret) << ',' << fmt(dr)
                << '\n';
        }
    }
    doc["times"] = times;
    Emitter em(opts, out);
    em.report("price.json", doc);
    em.file("price.csv", csv.str());
    return kOk;
}

inline int cmd_info(const std::vector<std::string>& args, const RunOptions& opts, std::ostream& out) {
    const auto sc = load(args, 0, "info");
    require_sections(sc, {"states", "payoff", "filtration"}, "info");
    const auto f = scenario_filtration(sc);
    const auto q = market_geometry(sc);
    const auto proc = price_process(*sc.payoff, q, f, sc.rate);
    const auto base = base_of(sc, opts);
    const double tol = opts.tolerance.value_or(sc.price_tolerance);
    const auto& space = *sc.states;

    json doc;
    doc["base"] = to_string(base);
    doc["price_tolerance"] = tol;
    json times = json::array();
    std::ostringstream csv;
    csv << "time,price,states,mass,residual_entropy\n";
    for (std::size_t t = 0; t < f.size(); ++t) {
        const auto report = conservation_decomposition(q, f.at(t), base);
        const auto levels = price_induced_partition(proc.discounted[t], tol);
        json entry;
        entry["time"] = f.times()[t];
        entry["H_total"] = report.total;
        entry["H_branch"] = report.branch;
        entry["H_residual"] = report.residual;
        entry["revealed"] = report.revealed;
        entry["revealed_by_price"] = revealed_information(q, levels, base);
        json lv = json::array();
        double expected_residual = 0.0;
        for (const auto& level : levels.levels) {
            const auto post = posterior_given_price(q, levels, level.price, base);
            const double mass = q.mass(level.states);
            expected_residual += mass * post.residual_entropy;
            json l;
            l["price"] = level.price;
            l["states"] = labels_of(space, level.states);
            l["mass"] = mass;
            l["residual_entropy"] = post.residual_entropy;
            lv.push_back(l);

            std::string members;
            for (auto s : level.states) members += (members.empty() ? "" : " ") + space.label(s);
            csv << f.times()[t] << ',' << fmt(level.price) << ',' << members << ',' << fmt(mass) << ','
                << fmt(post.residual_entropy) << '\n';
        }
        entry["expected_price_residual"] = expected_residual;
        entry["levels"] = lv;
        times.push_back(entry);
    }
    doc["times"] = times;
    Emitter em(opts, out);
    em.report("info.json", doc);
    em.file("info_levels.csv", csv.str());
    return kOk;
}

inline int cmd_frames(const std::vector<std::string>& args, const RunOptions& opts, std::ostream& out) {
    const auto sc = load(args, 0, "frames");
    require_sections(sc, {"states"}, "frames");
    const auto q = market_geometry(sc);
    const auto observer = observer_measure(sc, q);
    const auto flat = reference_measure(sc);

    FrameReport report;
    if (sc.payoff && sc.filtration) {
        report = classify_frame(q, observer, flat, *sc.payoff, scenario_filtration(sc));
    } else {
        report = classify_frame(q, observer, flat);
    }
    json doc;
    doc["frame"] = to_string(report.label);
    doc["generic_observer"] = report.generic_observer;
    if (!report.note.empty()) doc["note"] = report.note;
    doc["market"] = labelled(*sc.states, q.weights());
    doc["observer"] = labelled(*sc.states, observer.weights());
    doc["tv_market_flat"] = total_variation(q, flat);
    doc["tv_observer_market"] = total_variation(observer, q);
    if (!report.apparent_drift.empty()) {
        json drift = json::array();
        for (const auto& row : report.apparent_drift) {
            json r = json::array();
            for (const auto& d : row) r.push_back(d.value ? json(*d.value) : json(nullptr));
            drift.push_back(r);
        }
        doc["apparent_drift"] = drift;
    }
    Emitter(opts, out).report("frames.json", doc);
    return kOk;
}

inline std::string path_csv(const FilterPath& p) {
    std::ostringstream csv;
    csv << "t,xi,m,v,price,vol\n";
    for (std::size_t k = 0; k < p.times.size(); ++k) {
        csv << fmt(p.times[k]) << ',' << fmt(p.xi[k]) << ',' << fmt(p.mean[k]) << ',' << fmt(p.variance[k]) << ','
            << fmt(p.price[k]) << ',' << fmt(p.vol[k]) << '\n';
    }
    return csv.str();
}

inline int cmd_simulate(const std::vector<std::string>& args, const RunOptions& opts, std::ostream& out) {
    const auto sc = load(args, 0, "simulate");
    require_sections(sc, {"model"}, "simulate");
    if (!sc.prior && !sc.binary) throw ValidationError("simulate needs a 'prior' or a 'binary' section");
    if (sc.prior && sc.binary) throw ValidationError("simulate takes either 'prior' or 'binary', not both");

    ObservationModel model = *sc.model;
    if (opts.dt) model.dt = *opts.dt;
    model.validate();
    const std::size_t paths = opts.paths.value_or(sc.paths);
    const std::uint64_t seed = opts.seed.value_or(sc.seed);
    finrel::detail::require(paths >= 1, "paths must be at least 1");

    // The binary section defaults to the closed-system posterior SDE.
    const FilterMode mode = sc.has("mode") ? sc.mode : (sc.binary ? FilterMode::innovation : FilterMode::observation);
    const bool binary_sde = sc.binary && mode == FilterMode::innovation;
    std::optional<GridPrior> grid = sc.prior;
    if (sc.binary && !binary_sde) grid = GridPrior::binary(sc.binary->low, sc.binary->high, sc.binary->pi0);

    auto simulate = [&](std::uint64_t path_seed, FilterOptions fo) {
        if (binary_sde) return simulate_binary_sde(model, sc.binary->low, sc.binary->high, sc.binary->pi0, path_seed, fo);
        return simulate_batch_path(*grid, model, mode, sc.true_state, path_seed, fo);
    };

    const auto stats = run_paths(paths, seed, [&](std::size_t, std::uint64_t s) {
        return path_stats(simulate(s, {.record_posterior = false}), model.sigma);
    });
    const auto summary = summarize(stats);

    Emitter em(opts, out);
    if (em.writes_files()) {
        const std::size_t keep = std::min(paths, opts.csv_paths);
        for (std::size_t i = 0; i < keep; ++i) {
            std::ostringstream name;
            name << "path_" << std::setw(4) << std::setfill('0') << i << ".csv";
            em.file(name.str(), path_csv(simulate(derive_seed(seed, i), {.record_posterior = false})));
        }
        if (sc.binary) {
            std::ostringstream curve;
            curve << "pi,vol\n";
            for (const auto& p : volatility_uncertainty_curve(model, sc.binary->low, sc.binary->high))
                curve << fmt(p.pi) << ',' << fmt(p.vol) << '\n';
            em.file("volatility_curve.csv", curve.str());
        }
    }

    json doc;
    doc["paths"] = paths;
    doc["seed"] = seed;
    doc["mode"] = mode == FilterMode::observation ? "observation" : "innovation";
    doc["model"] = {{"sigma", model.sigma}, {"T", model.horizon}, {"dt", model.dt}, {"r_f", model.rate}};
    doc["initial_mean"] = summary.initial_mean;
    doc["terminal_mean"] = summary.terminal_mean;
    doc["terminal_std_error"] = summary.terminal_std_error;
    doc["martingale_check"] = {{"pass", summary.martingale_pass},
                               {"gap", std::abs(summary.terminal_mean - summary.initial_mean)},
                               {"threshold", 3.0 * summary.terminal_std_error}};
    doc["qv_check"] = {{"mean_relative_error", summary.qv_relative_error}, {"pass", summary.qv_relative_error < 0.1}};
    doc["clip_count"] = summary.clip_count;
    doc["max_mass_drift"] = summary.max_mass_drift;
    em.report("summary.json", doc);
    return kOk;
}

inline int cmd_reproduce(const std::vector<std::string>& args, const RunOptions& opts, std::ostream& out) {
    if (args.empty() || args[0] != "section4") throw ValidationError("usage: finrel reproduce section4");
    const auto r = example::reproduce_eight_state_example();
    json doc;
    doc["phi_A"] = r.phi_a;
    doc["phi_B"] = r.phi_b;
    doc["Q_A"] = r.q_a;
    doc["Q_B"] = r.q_b;
    doc["S0"] = r.s0;
    doc["EP_X"] = r.ep_x;
    doc["S1_levels"] = r.s1_levels;
    doc["H2_bits"] = r.h2_bits;
    doc["E_Ht_bits"] = r.e_ht_bits;
    doc["I_S1_bits"] = r.i_s1_bits;
    json checks = json::array();
    for (const auto& c : r.checks) {
        checks.push_back(
            {{"name", c.name}, {"value", c.value}, {"expected", c.expected}, {"tolerance", c.tolerance}, {"pass", c.pass}});
    }
    doc["checks"] = checks;
    doc["pass"] = r.pass();
    Emitter em(opts, out);
    em.report("reproduce_section4.json", doc);
    em.file("scenario_section4.json", std::string(example::kScenarioJson) + "\n");
    return r.pass() ? kOk : kNumerical;
}

}  // namespace detail

inline int run(const std::string& command, const std::vector<std::string>& args, const RunOptions& opts,
               std::ostream& out, std::ostream& err) {
    try {
        if (command == "field") return detail::cmd_field(args, opts, out);
        if (command == "maxent") return detail::cmd_maxent(args, opts, out);
        if (command == "price") return detail::cmd_price(args, opts, out);
        if (command == "info") return detail::cmd_info(args, opts, out);
        if (command == "frames") return detail::cmd_frames(args, opts, out);
        if (command == "simulate") return detail::cmd_simulate(args, opts, out);
        if (command == "reproduce") return detail::cmd_reproduce(args, opts, out);
        err << "error: unknown command '" << command << "'\n";
        return kValidation;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        for (const auto& d : e.details()) err << "  - " << d << '\n';
        return kValidation;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kValidation;
    }
}

}  // namespace finrel::cli

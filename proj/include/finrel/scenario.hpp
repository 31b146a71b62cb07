#pragma once

// Scenario files: JSON documents describing a state space and whichever
// sections a command needs. Parsing collects every problem before failing.

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "finrel/continuous_filter.hpp"
#include "finrel/error.hpp"
#include "finrel/field_solver.hpp"
#include "finrel/geometry.hpp"
#include "finrel/information.hpp"
#include "finrel/maxent.hpp"
#include "finrel/state_space.hpp"

namespace finrel {

using json = nlohmann::json;

struct BinaryModel {
    double low = 0.0;
    double high = 1.0;
    double pi0 = 0.5;
};

enum class GeometryKind { flat, field, maxent, explicit_weights };
enum class ObserverKind { flat, market, explicit_weights };

struct Scenario {
    std::optional<StateSpace> states;
    std::optional<PayoffVector> payoff;
    std::optional<std::vector<Blocks>> filtration;
    bool filtration_complete = false;
    std::optional<std::vector<double>> reference;
    std::optional<std::vector<Edge>> edges;
    std::optional<StructuralSource> source;
    std::optional<std::vector<LinearConstraint>> constraints;
    std::optional<GeometryKind> geometry;
    std::optional<std::vector<double>> geometry_weights;
    ObserverKind observer = ObserverKind::flat;
    std::optional<std::vector<double>> observer_weights;
    double rate = 0.0;
    double price_tolerance = kDefaultPriceTolerance;
    LogBase base = LogBase::two;

    std::optional<ObservationModel> model;
    std::optional<GridPrior> prior;
    std::optional<BinaryModel> binary;
    std::size_t paths = 1;
    std::uint64_t seed = 0;
    FilterMode mode = FilterMode::observation;
    std::optional<double> true_state;

    std::set<std::string> present;  ///< top-level keys found in the document

    bool has(const std::string& key) const { return present.count(key) > 0; }
};

namespace detail {

class Issues {
public:
    void add(const std::string& path, const std::string& msg) { items_.push_back(path + ": " + msg); }
    bool empty() const { return items_.empty(); }
    const std::vector<std::string>& items() const { return items_; }

    /// Runs `fn`, converting thrown validation failures into issues at `path`.
    template <class Fn>
    void guard(const std::string& path, Fn&& fn) {
        try {
            fn();
        } catch (const ValidationError& e) {
            add(path, e.what());
            for (const auto& d : e.details()) add(path, d);
        } catch (const json::exception& e) {
            add(path, e.what());
        }
    }

private:
    std::vector<std::string> items_;
};

inline void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> allowed,
                           Issues& issues) {
    if (!obj.is_object()) {
        issues.add(path, "expected an object");
        return;
    }
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) issues.add(path + "/" + key, "unknown key");
    }
}

inline double number(const json& j, const std::string& what) {
    if (!j.is_number()) throw ValidationError(what + " must be a number");
    return j.get<double>();
}

/// Array of n numbers, or an object mapping state labels to numbers
/// (missing labels default to `fill`, or are an error when fill is absent).
inline std::vector<double> per_state(const json& j, const StateSpace& space, const std::string& what,
                                     std::optional<double> fill = std::nullopt) {
    std::vector<double> out(space.size(), fill.value_or(0.0));
    if (j.is_array()) {
        require(j.size() == space.size(), what + " has " + std::to_string(j.size()) + " entries, expected " +
                                              std::to_string(space.size()));
        for (std::size_t i = 0; i < j.size(); ++i) out[i] = number(j[i], what + "[" + std::to_string(i) + "]");
        return out;
    }
    require(j.is_object(), what + " must be an array or a label->value object");
    std::vector<bool> seen(space.size(), false);
    for (const auto& [label, value] : j.items()) {
        const auto idx = space.index_of(label);
        out[idx] = number(value, what + "/" + label);
        seen[idx] = true;
    }
    if (!fill) {
        for (std::size_t i = 0; i < seen.size(); ++i)
            require(seen[i], what + " is missing state '" + space.label(i) + "'");
    }
    return out;
}

inline std::vector<double> number_array(const json& j, const std::string& what) {
    require(j.is_array(), what + " must be an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], what + "[" + std::to_string(i) + "]"));
    return out;
}

}  // namespace detail

inline Scenario parse_scenario(const json& doc) {
    detail::Issues issues;
    Scenario sc;
    if (!doc.is_object()) throw ValidationError("scenario must be a JSON object");

    detail::reject_unknown(doc, "",
                           {"name", "description", "states", "payoff", "filtration", "filtration_complete",
                            "reference", "graph", "source", "constraints", "geometry", "observer", "rate",
                            "price_tolerance", "output", "model", "prior", "binary", "paths", "seed", "mode",
                            "true_state"},
                           issues);
    for (const auto& [key, _] : doc.items()) sc.present.insert(key);

    if (doc.contains("states")) {
        issues.guard("/states", [&] {
            const auto& j = doc["states"];
            detail::require(j.is_array(), "must be an array of labels");
            std::vector<std::string> labels;
            for (const auto& l : j) {
                detail::require(l.is_string(), "labels must be strings");
                labels.push_back(l.get<std::string>());
            }
            sc.states.emplace(std::move(labels));
        });
    }
    const bool have_states = sc.states.has_value();
    auto needs_states = [&](const char* key) {
        if (doc.contains(key) && !have_states) issues.add(std::string("/") + key, "requires a valid 'states' section");
        return doc.contains(key) && have_states;
    };

    if (needs_states("payoff")) {
        issues.guard("/payoff", [&] { sc.payoff.emplace(detail::per_state(doc["payoff"], *sc.states, "payoff")); });
    }

    if (needs_states("filtration")) {
        issues.guard("/filtration", [&] {
            const auto& j = doc["filtration"];
            detail::require(j.is_array(), "must be an array of partitions");
            std::vector<Blocks> chain;
            for (const auto& part : j) {
                detail::require(part.is_array(), "each partition must be an array of blocks");
                Blocks blocks;
                for (const auto& blk : part) {
                    detail::require(blk.is_array(), "each block must be an array of labels");
                    Block b;
                    for (const auto& l : blk) {
                        detail::require(l.is_string(), "block members must be state labels");
                        b.push_back(sc.states->index_of(l.get<std::string>()));
                    }
                    blocks.push_back(std::move(b));
                }
                chain.push_back(std::move(blocks));
            }
            sc.filtration = std::move(chain);
        });
    }
    if (doc.contains("filtration_complete")) {
        issues.guard("/filtration_complete", [&] {
            detail::require(doc["filtration_complete"].is_boolean(), "must be a boolean");
            sc.filtration_complete = doc["filtration_complete"].get<bool>();
        });
    }
    if (sc.filtration) {
        auto check = validate_filtration(sc.states->size(), *sc.filtration, {}, sc.filtration_complete);
        for (const auto& v : check.violations) issues.add("/filtration", v.message);
        if (!check) sc.filtration.reset();
    }

    if (needs_states("reference")) {
        issues.guard("/reference", [&] {
            auto w = detail::per_state(doc["reference"], *sc.states, "reference");
            ProbabilityMeasure check(w);
            sc.reference = std::move(w);
        });
    }

    if (needs_states("graph")) {
        issues.guard("/graph", [&] {
            const auto& g = doc["graph"];
            detail::reject_unknown(g, "/graph", {"edges"}, issues);
            detail::require(g.contains("edges") && g["edges"].is_array(), "graph.edges must be an array");
            std::vector<Edge> edges;
            for (const auto& e : g["edges"]) {
                detail::require(e.is_array() && (e.size() == 2 || e.size() == 3),
                                "each edge must be [label, label] or [label, label, weight]");
                detail::require(e[0].is_string() && e[1].is_string(), "edge endpoints must be state labels");
                Edge edge{sc.states->index_of(e[0].get<std::string>()), sc.states->index_of(e[1].get<std::string>()),
                          e.size() == 3 ? detail::number(e[2], "edge weight") : 1.0};
                edges.push_back(edge);
            }
            WeightedGraph check(sc.states->size(), edges);
            sc.edges = std::move(edges);
        });
    }

    if (needs_states("source")) {
        issues.guard("/source", [&] {
            const auto& s = doc["source"];
            detail::reject_unknown(s, "/source", {"rho", "kappa"}, issues);
            detail::require(s.contains("rho"), "source.rho is required");
            detail::require(s.contains("kappa"), "source.kappa is required");
            StructuralSource src{detail::per_state(s["rho"], *sc.states, "source.rho", 0.0),
                                 detail::number(s["kappa"], "source.kappa")};
            detail::require(src.kappa > 0.0, "source.kappa must be positive");
            sc.source = std::move(src);
        });
    }

    if (needs_states("constraints")) {
        issues.guard("/constraints", [&] {
            const auto& cs = doc["constraints"];
            detail::require(cs.is_array(), "must be an array");
            std::vector<LinearConstraint> out;
            for (std::size_t i = 0; i < cs.size(); ++i) {
                const std::string path = "/constraints/" + std::to_string(i);
                detail::reject_unknown(cs[i], path, {"coefficients", "target"}, issues);
                detail::require(cs[i].contains("coefficients") && cs[i].contains("target"),
                                "constraint " + std::to_string(i) + " needs coefficients and target");
                out.push_back({detail::per_state(cs[i]["coefficients"], *sc.states, "coefficients", 0.0),
                               detail::number(cs[i]["target"], "target")});
            }
            sc.constraints = std::move(out);
        });
    }

    if (doc.contains("geometry")) {
        issues.guard("/geometry", [&] {
            const auto& g = doc["geometry"];
            if (g.is_string()) {
                const auto s = g.get<std::string>();
                if (s == "flat") sc.geometry = GeometryKind::flat;
                else if (s == "field") sc.geometry = GeometryKind::field;
                else if (s == "maxent") sc.geometry = GeometryKind::maxent;
                else throw ValidationError("must be \"flat\", \"field\", \"maxent\" or a label->weight object");
            } else {
                detail::require(have_states, "explicit geometry requires 'states'");
                auto w = detail::per_state(g, *sc.states, "geometry");
                ProbabilityMeasure check(w);
                sc.geometry = GeometryKind::explicit_weights;
                sc.geometry_weights = std::move(w);
            }
        });
    }

    if (doc.contains("observer")) {
        issues.guard("/observer", [&] {
            const auto& o = doc["observer"];
            if (o.is_string()) {
                const auto s = o.get<std::string>();
                if (s == "flat") sc.observer = ObserverKind::flat;
                else if (s == "market") sc.observer = ObserverKind::market;
                else throw ValidationError("must be \"flat\", \"market\" or a label->weight object");
            } else {
                detail::require(have_states, "explicit observer requires 'states'");
                auto w = detail::per_state(o, *sc.states, "observer");
                ProbabilityMeasure check(w);
                sc.observer = ObserverKind::explicit_weights;
                sc.observer_weights = std::move(w);
            }
        });
    }

    if (doc.contains("rate")) issues.guard("/rate", [&] { sc.rate = detail::number(doc["rate"], "rate"); });
    if (doc.contains("price_tolerance")) {
        issues.guard("/price_tolerance", [&] {
            sc.price_tolerance = detail::number(doc["price_tolerance"], "price_tolerance");
            detail::require(sc.price_tolerance >= 0.0, "price_tolerance must be nonnegative");
        });
    }
    if (doc.contains("output")) {
        issues.guard("/output", [&] {
            const auto& o = doc["output"];
            detail::reject_unknown(o, "/output", {"base"}, issues);
            if (o.contains("base")) {
                const auto b = o["base"].is_string() ? o["base"].get<std::string>() : o["base"].dump();
                if (b == "2") sc.base = LogBase::two;
                else if (b == "e") sc.base = LogBase::e;
                else throw ValidationError("output.base must be \"2\" or \"e\"");
            }
        });
    }

    if (doc.contains("model")) {
        issues.guard("/model", [&] {
            const auto& m = doc["model"];
            detail::reject_unknown(m, "/model", {"sigma", "T", "dt", "r_f"}, issues);
            detail::require(m.contains("sigma") && m.contains("T") && m.contains("dt"),
                            "model needs sigma, T and dt");
            ObservationModel model{detail::number(m["sigma"], "model.sigma"), detail::number(m["T"], "model.T"),
                                   detail::number(m["dt"], "model.dt"),
                                   m.contains("r_f") ? detail::number(m["r_f"], "model.r_f") : 0.0};
            model.validate();
            sc.model = model;
        });
    }
    if (doc.contains("prior")) {
        issues.guard("/prior", [&] {
            const auto& p = doc["prior"];
            detail::reject_unknown(p, "/prior", {"grid", "weights"}, issues);
            detail::require(p.contains("grid") && p.contains("weights"), "prior needs grid and weights");
            sc.prior.emplace(detail::number_array(p["grid"], "prior.grid"),
                             detail::number_array(p["weights"], "prior.weights"));
        });
    }
    if (doc.contains("binary")) {
        issues.guard("/binary", [&] {
            const auto& b = doc["binary"];
            detail::reject_unknown(b, "/binary", {"L", "H", "pi0"}, issues);
            detail::require(b.contains("L") && b.contains("H") && b.contains("pi0"), "binary needs L, H and pi0");
            BinaryModel bm{detail::number(b["L"], "binary.L"), detail::number(b["H"], "binary.H"),
                           detail::number(b["pi0"], "binary.pi0")};
            detail::require(bm.high > bm.low, "binary.H must exceed binary.L");
            detail::require(bm.pi0 >= 0.0 && bm.pi0 <= 1.0, "binary.pi0 must lie in [0, 1]");
            sc.binary = bm;
        });
    }
    if (doc.contains("paths")) {
        issues.guard("/paths", [&] {
            detail::require(doc["paths"].is_number_integer() && doc["paths"].get<long long>() >= 1,
                            "must be a positive integer");
            sc.paths = doc["paths"].get<std::size_t>();
        });
    }
    if (doc.contains("seed")) {
        issues.guard("/seed", [&] {
            detail::require(doc["seed"].is_number_unsigned(), "must be a nonnegative integer");
            sc.seed = doc["seed"].get<std::uint64_t>();
        });
    }
    if (doc.contains("mode")) {
        issues.guard("/mode", [&] {
            const auto& m = doc["mode"];
            detail::require(m.is_string(), "must be \"observation\" or \"innovation\"");
            const auto s = m.get<std::string>();
            if (s == "observation") sc.mode = FilterMode::observation;
            else if (s == "innovation") sc.mode = FilterMode::innovation;
            else throw ValidationError("must be \"observation\" or \"innovation\"");
        });
    }
    if (doc.contains("true_state")) {
        issues.guard("/true_state", [&] { sc.true_state = detail::number(doc["true_state"], "true_state"); });
    }

    if (!issues.empty()) throw ValidationError("invalid scenario", issues.items());
    return sc;
}

/// Parses JSON text; syntax errors report line and column.
inline Scenario parse_scenario_text(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        const auto limit = std::min<std::size_t>(e.byte, text.size());
        for (std::size_t i = 0; i + 1 < limit; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ValidationError("scenario is not valid JSON (line " + std::to_string(line) + ", column " +
                              std::to_string(col) + "): " + e.what());
    }
    return parse_scenario(doc);
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open scenario file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario_text(buf.str());
}

/// Fails with one message per missing top-level section.
inline void require_sections(const Scenario& sc, std::initializer_list<const char*> keys, const std::string& command) {
    std::vector<std::string> missing;
    for (const char* k : keys)
        if (!sc.has(k)) missing.push_back("missing section '" + std::string(k) + "'");
    if (!missing.empty()) throw ValidationError("command '" + command + "' needs more scenario sections", missing);
}

// ---------------------------------------------------------------------------
// Resolution of derived objects

inline ProbabilityMeasure reference_measure(const Scenario& sc) {
    if (sc.reference) return ProbabilityMeasure(*sc.reference);
    return uniform_prior(*sc.states);
}

inline Filtration scenario_filtration(const Scenario& sc) {
    return Filtration(sc.states->size(), *sc.filtration, sc.filtration_complete);
}

/// Graph from `graph.edges`, defaulting to the unit-weight complete graph.
inline WeightedGraph scenario_graph(const Scenario& sc) {
    if (sc.edges) return WeightedGraph(sc.states->size(), *sc.edges);
    return WeightedGraph::complete(sc.states->size());
}

inline GeometryKind geometry_kind(const Scenario& sc) {
    if (sc.geometry) return *sc.geometry;
    if (sc.source) return GeometryKind::field;
    if (sc.constraints) return GeometryKind::maxent;
    return GeometryKind::flat;
}

inline ProbabilityMeasure market_geometry(const Scenario& sc) {
    const auto ref = reference_measure(sc);
    switch (geometry_kind(sc)) {
        case GeometryKind::flat: return ref;
        case GeometryKind::explicit_weights: return ProbabilityMeasure(*sc.geometry_weights);
        case GeometryKind::field:
            if (!sc.source) throw ValidationError("geometry \"field\" needs a 'source' section");
            return exponential_tilt(ref, solve_field_equation(scenario_graph(sc), *sc.source, ref));
        case GeometryKind::maxent:
            if (!sc.constraints) throw ValidationError("geometry \"maxent\" needs a 'constraints' section");
            return solve_maxent(ref, *sc.constraints);
    }
    return ref;
}

inline ProbabilityMeasure observer_measure(const Scenario& sc, const ProbabilityMeasure& market) {
    switch (sc.observer) {
        case ObserverKind::flat: return reference_measure(sc);
        case ObserverKind::market: return market;
        case ObserverKind::explicit_weights: return ProbabilityMeasure(*sc.observer_weights);
    }
    return market;
}

}  // namespace finrel

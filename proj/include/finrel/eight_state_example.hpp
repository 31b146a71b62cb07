#pragma once

// The eight-state, three-date worked example: a block-symmetric source on
// A = {w1,w2,w3}, B = {w4..w8} curves the flat prior, the payoff
// X = (12,10,8,6,4,3,2,1) is priced by projection, and the t = 1 price
// reveals about one bit. `reproduce_eight_state_example` recomputes every
// published figure and checks it against its rounding tolerance.

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "finrel/field_solver.hpp"
#include "finrel/geometry.hpp"
#include "finrel/information.hpp"
#include "finrel/pricing.hpp"
#include "finrel/state_space.hpp"

namespace finrel::example {

inline constexpr std::string_view kScenarioJson = R"({
  "name": "eight-state block-symmetric example",
  "states": ["w1", "w2", "w3", "w4", "w5", "w6", "w7", "w8"],
  "payoff": [12, 10, 8, 6, 4, 3, 2, 1],
  "filtration": [
    [["w1", "w2", "w3", "w4", "w5", "w6", "w7", "w8"]],
    [["w1", "w2", "w3"], ["w4", "w5", "w6", "w7", "w8"]],
    [["w1"], ["w2"], ["w3"], ["w4"], ["w5"], ["w6"], ["w7"], ["w8"]]
  ],
  "filtration_complete": true,
  "graph": {
    "edges": [
      ["w1", "w4", 1], ["w1", "w5", 1], ["w1", "w6", 1], ["w1", "w7", 1], ["w1", "w8", 1],
      ["w2", "w4", 1], ["w2", "w5", 1], ["w2", "w6", 1], ["w2", "w7", 1], ["w2", "w8", 1],
      ["w3", "w4", 1], ["w3", "w5", 1], ["w3", "w6", 1], ["w3", "w7", 1], ["w3", "w8", 1]
    ]
  },
  "source": {
    "rho": {"w1": 5, "w2": 5, "w3": 5, "w4": -3, "w5": -3, "w6": -3, "w7": -3, "w8": -3},
    "kappa": 0.4
  },
  "geometry": "field",
  "observer": "flat",
  "rate": 0.0
})";

inline constexpr std::size_t kStates = 8;
inline const Block kBlockA{0, 1, 2};
inline const Block kBlockB{3, 4, 5, 6, 7};
inline constexpr double kKappa = 0.4;
inline constexpr double kRhoA = 5.0;
inline constexpr double kRhoB = -3.0;

inline PayoffVector payoff() { return PayoffVector{12, 10, 8, 6, 4, 3, 2, 1}; }

inline Filtration filtration() {
    return Filtration(kStates, {{{0, 1, 2, 3, 4, 5, 6, 7}}, {kBlockA, kBlockB}, Partition::discrete(kStates).blocks()},
                      /*complete=*/true);
}

inline WeightedGraph graph() { return WeightedGraph::complete_bipartite(kStates, kBlockA, kBlockB); }

inline StructuralSource source() {
    std::vector<double> rho(kStates, kRhoB);
    for (auto s : kBlockA) rho[s] = kRhoA;
    return {std::move(rho), kKappa};
}

struct Check {
    std::string name;
    double value = 0.0;
    double expected = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct Reproduction {
    double phi_a = 0.0, phi_b = 0.0;
    double phi_numeric_gap = 0.0;  ///< max |closed form − numerical solve|
    double q_a = 0.0, q_b = 0.0;
    double s0 = 0.0;
    double ep_x = 0.0;
    std::vector<double> s1_levels;
    double h2_bits = 0.0;
    double e_ht_bits = 0.0;
    double i_s1_bits = 0.0;
    std::vector<Check> checks;

    bool pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return !checks.empty();
    }
};

inline Check make_check(std::string name, double value, double expected, double tol) {
    return {std::move(name), value, expected, tol, std::abs(value - expected) <= tol};
}

inline Reproduction reproduce_eight_state_example() {
    Reproduction r;
    const auto prior = uniform_prior(kStates);

    const auto closed = block_symmetric_solution(kBlockA.size(), kBlockB.size(), kRhoA, kRhoB, kKappa);
    r.phi_a = closed.phi_a;
    r.phi_b = closed.phi_b;
    const auto numeric = solve_field_equation(graph(), source(), prior);
    for (std::size_t s = 0; s < kStates; ++s) {
        const double expected = s < kBlockA.size() ? closed.phi_a : closed.phi_b;
        r.phi_numeric_gap = std::max(r.phi_numeric_gap, std::abs(numeric.phi[s] - expected));
    }

    const auto q = exponential_tilt(prior, numeric);
    r.q_a = q.mass(kBlockA);
    r.q_b = q.mass(kBlockB);

    const auto x = payoff();
    const auto f = filtration();
    const auto proc = price_process(x, q, f);
    r.s0 = proc.discounted[0][0];
    r.ep_x = prior.expectation(x);

    const auto levels = price_induced_partition(proc.discounted[1]);
    for (const auto& l : levels.levels) r.s1_levels.push_back(l.price);

    r.h2_bits = entropy(q, LogBase::two);
    double expected_residual = 0.0;
    for (const auto& l : levels.levels) {
        expected_residual += q.mass(l.states) * posterior_given_price(q, levels, l.price).residual_entropy;
    }
    r.e_ht_bits = expected_residual;
    r.i_s1_bits = revealed_information(q, levels);

    r.checks.push_back(make_check("phi_A", r.phi_a, 0.25, 1e-12));
    r.checks.push_back(make_check("phi_B", r.phi_b, -0.15, 1e-12));
    r.checks.push_back(make_check("phi_numeric_matches_closed_form", r.phi_numeric_gap, 0.0, 1e-9));
    r.checks.push_back(make_check("Q_A", r.q_a, 0.4722, 5e-4));
    r.checks.push_back(make_check("Q_A_plus_Q_B", r.q_a + r.q_b, 1.0, 1e-12));
    r.checks.push_back(make_check("S0", r.s0, 6.412, 1e-3));
    r.checks.push_back(make_check("EP_X", r.ep_x, 5.75, 1e-12));
    const bool two_levels = r.s1_levels.size() == 2;
    r.checks.push_back(make_check("S1_level_count", static_cast<double>(r.s1_levels.size()), 2.0, 0.0));
    r.checks.push_back(make_check("S1_level_low", two_levels ? r.s1_levels[0] : NAN, 3.2, 1e-12));
    r.checks.push_back(make_check("S1_level_high", two_levels ? r.s1_levels[1] : NAN, 10.0, 1e-12));
    r.checks.push_back(make_check("H2_bits", r.h2_bits, 2.9716, 5e-3));
    r.checks.push_back(make_check("E_Ht_bits", r.e_ht_bits, 1.9738, 5e-3));
    r.checks.push_back(make_check("I_S1_bits", r.i_s1_bits, 0.9978, 5e-3));
    return r;
}

}  // namespace finrel::example

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "finrel/eight_state_example.hpp"
#include "finrel/information.hpp"
#include "finrel/pricing.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace finrel;
using Catch::Matchers::WithinAbs;

namespace {

ProbabilityMeasure eight_state_q() {
    return exponential_tilt(uniform_prior(8), solve_field_equation(example::graph(), example::source(), uniform_prior(8)));
}

}  // namespace

TEST_CASE("entropy basics", "[information]") {
    CHECK_THAT(entropy(uniform_prior(8), LogBase::two), WithinAbs(3.0, 1e-15));
    CHECK_THAT(entropy(uniform_prior(8), LogBase::e), WithinAbs(std::log(8.0), 1e-15));
    CHECK(entropy(std::vector<double>{1.0, 0.0, 0.0}) == 0.0);
    CHECK_THAT(entropy(eight_state_q()), WithinAbs(2.9716, 5e-3));
}

TEST_CASE("conservation on the eight-state example", "[information]") {
    const auto q = eight_state_q();
    const Partition p(8, {example::kBlockA, example::kBlockB});
    const auto r = conservation_decomposition(q, p, LogBase::two);
    CHECK_THAT(r.branch, WithinAbs(0.9978, 5e-3));
    CHECK_THAT(r.residual, WithinAbs(1.9738, 5e-3));
    CHECK_THAT(r.total, WithinAbs(r.branch + r.residual, 1e-10));
    CHECK_THAT(r.revealed, WithinAbs(r.branch, 1e-10));
}

TEST_CASE("trivial and discrete partitions", "[information]") {
    const ProbabilityMeasure q({0.1, 0.2, 0.3, 0.4});
    const auto trivial = conservation_decomposition(q, Partition::trivial(4));
    CHECK_THAT(trivial.branch, WithinAbs(0.0, 1e-15));
    CHECK_THAT(trivial.residual, WithinAbs(trivial.total, 1e-15));
    const auto discrete = conservation_decomposition(q, Partition::discrete(4));
    CHECK_THAT(discrete.branch, WithinAbs(discrete.total, 1e-15));
    CHECK_THAT(discrete.residual, WithinAbs(0.0, 1e-15));

    CHECK_THAT(revealed_information(q, price_induced_partition(std::vector<double>(4, 2.0))), WithinAbs(0.0, 1e-15));
    CHECK_THAT(revealed_information(q, price_induced_partition(std::vector<double>{1, 2, 3, 4})),
               WithinAbs(entropy(q), 1e-15));
}

TEST_CASE("price levels of the eight-state example", "[information]") {
    const auto q = eight_state_q();
    const auto proc = price_process(example::payoff(), q, example::filtration());
    const auto pp = price_induced_partition(proc.discounted[1]);
    REQUIRE(pp.size() == 2);
    CHECK_THAT(pp.levels[0].price, WithinAbs(3.2, 1e-12));
    CHECK(pp.levels[0].states == example::kBlockB);
    CHECK_THAT(pp.levels[1].price, WithinAbs(10.0, 1e-12));
    CHECK(pp.levels[1].states == example::kBlockA);

    const auto high = posterior_given_price(q, pp, 10.0);
    CHECK_THAT(high.residual_entropy, WithinAbs(std::log2(3.0), 1e-12));
    for (double w : high.posterior.weights()) CHECK_THAT(w, WithinAbs(1.0 / 3.0, 1e-12));
    const auto low = posterior_given_price(q, pp, 3.2);
    CHECK_THAT(low.residual_entropy, WithinAbs(std::log2(5.0), 1e-12));
    CHECK_THAT(revealed_information(q, pp), WithinAbs(0.9978, 5e-3));

    CHECK_THROWS_AS(posterior_given_price(q, pp, 7.0), ValidationError);
}

TEST_CASE("singleton level is a point mass", "[information]") {
    const ProbabilityMeasure q({0.5, 0.25, 0.25});
    const auto pp = price_induced_partition(std::vector<double>{1.0, 2.0, 2.0});
    const auto post = posterior_given_price(q, pp, 1.0);
    CHECK(post.states == Block{0});
    CHECK(post.residual_entropy == 0.0);
}

TEST_CASE("colliding block prices merge into one level", "[information]") {
    // X = (1,2,2,1) on {{0,1},{2,3}}; Q symmetric inside so both block means are 1.5
    const ProbabilityMeasure q({0.2, 0.2, 0.3, 0.3});
    const Partition info(4, {{0, 1}, {2, 3}});
    const auto s1 = project(PayoffVector{1, 2, 2, 1}, q, info);
    CHECK_THAT(s1[0], WithinAbs(1.5, 1e-15));
    CHECK_THAT(s1[2], WithinAbs(1.5, 1e-15));
    const auto pp = price_induced_partition(s1);
    CHECK(pp.size() == 1);
    const double by_price = revealed_information(q, pp);
    const double by_info = conservation_decomposition(q, info).revealed;
    CHECK_THAT(by_price, WithinAbs(0.0, 1e-15));
    // hand value: H(0.4, 0.6) in bits
    CHECK_THAT(by_info, WithinAbs(-(0.4 * std::log2(0.4) + 0.6 * std::log2(0.6)), 1e-12));
    CHECK(by_price < by_info);
}

TEST_CASE("price tolerance handling", "[information]") {
    SECTION("near-ties within tolerance merge") {
        const auto pp = price_induced_partition(std::vector<double>{1.0, 1.0 + 1e-12, 2.0});
        CHECK(pp.size() == 2);
    }
    SECTION("chained ties are ambiguous") {
        CHECK_THROWS_AS(price_induced_partition(std::vector<double>{1.0, 1.6, 2.2}, 0.7), ValidationError);
        try {
            price_induced_partition(std::vector<double>{1.0, 1.6, 2.2}, 0.7);
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("smaller tolerance") != std::string::npos);
        }
    }
    SECTION("invalid inputs") {
        CHECK_THROWS_AS(price_induced_partition(std::vector<double>{}), ValidationError);
        CHECK_THROWS_AS(price_induced_partition(std::vector<double>{1.0}, -1.0), ValidationError);
    }
}

TEST_CASE("conservation and data processing on random inputs", "[information][property]") {
    for (std::size_t i = 0; i < 500; ++i) {
        const auto seed = gen::case_seed(51, i);
        gen::Gen g(seed);
        const std::size_t n = g.integer(1, 14);
        const auto q = g.measure(n);
        const Partition p(n, g.partition(n, n));
        INFO("seed " << seed);
        const auto bits = conservation_decomposition(q, p, LogBase::two);
        const auto nats = conservation_decomposition(q, p, LogBase::e);
        CHECK_THAT(bits.total, WithinAbs(bits.branch + bits.residual, 1e-10));
        CHECK_THAT(bits.revealed, WithinAbs(bits.branch, 1e-10));
        CHECK(bits.branch >= -1e-15);
        CHECK(bits.residual >= -1e-15);
        CHECK(bits.total <= std::log2(static_cast<double>(n)) + 1e-12);
        CHECK_THAT(bits.total, WithinAbs(nats.total / std::numbers::ln2, 1e-12));
        CHECK_THAT(nats.total, WithinAbs(oracle::entropy_nats(q.weights()), 1e-12));

        // residual entropy is nonincreasing along a filtration
        const auto chain = g.filtration(n, 3, false);
        double prev = INFINITY;
        for (const auto& blocks : chain) {
            const double r = conservation_decomposition(q, Partition(n, blocks)).residual;
            CHECK(r <= prev + 1e-12);
            prev = r;
        }
    }
}

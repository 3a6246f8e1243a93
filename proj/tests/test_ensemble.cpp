#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "consensus/ensemble.hpp"
#include "consensus/errors.hpp"
#include "consensus/graph.hpp"
#include "consensus/rng.hpp"

using namespace consensus;

namespace {

DirectedGraph four_node_graph() {
    return build_graph(4, {{1, 2}, {2, 3}, {3, 2}, {3, 4}});
}

} // namespace

TEST_CASE("model validation") {
    CHECK_THROWS_AS(validate_model(IidModel{0.0}), InvalidInputError);
    CHECK_THROWS_AS(validate_model(IidModel{1.2}), InvalidInputError);
    CHECK_NOTHROW(validate_model(IidModel{1.0}));
    CHECK_THROWS_AS(validate_model(MarkovModel{1.0, 0.5}), InvalidInputError);
    CHECK_THROWS_AS(validate_model(MarkovModel{0.5, 0.0}), InvalidInputError);
    CHECK_NOTHROW(validate_model(MarkovModel{0.5, 0.5}));
}

TEST_CASE("iid probabilities match the per-arc product") {
    // Symmetric case: every subgraph equally likely.
    const SubgraphEnsemble ens = iid_probabilities(four_node_graph(), IidModel{0.5});
    REQUIRE(ens.size() == 16);
    for (int i = 0; i < 16; ++i) CHECK(ens.probabilities(i) == doctest::Approx(1.0 / 16));

    // 3-arc graph, single-arc subgraph at q = 0.3: 0.3 * 0.7^2 = 0.147.
    const DirectedGraph g3 = build_graph(3, {{1, 2}, {2, 3}, {3, 1}});
    const SubgraphEnsemble e3 = iid_probabilities(g3, IidModel{0.3});
    CHECK(e3.probabilities(0b001) == doctest::Approx(0.147));
    CHECK(e3.probabilities(0b000) == doctest::Approx(0.343));
    CHECK(e3.probabilities(0b111) == doctest::Approx(0.027));

    // Degenerate limit q = 1: all mass on the full subgraph.
    const SubgraphEnsemble e1 = iid_probabilities(g3, IidModel{1.0});
    CHECK(e1.probabilities(7) == 1.0);
    CHECK(e1.probabilities.head(7).isZero(0.0));
}

TEST_CASE("iid probabilities sum to one") {
    for (double q : {0.1, 0.37, 0.5, 0.99, 1.0}) {
        const SubgraphEnsemble ens = iid_probabilities(four_node_graph(), IidModel{q});
        CHECK(ens.probabilities.sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(ens.probabilities.minCoeff() >= 0.0);
    }
}

TEST_CASE("markov transition on a single arc") {
    const DirectedGraph g = build_graph(2, {{1, 2}});
    const MarkovModel model{0.3, 0.8};
    const SubgraphEnsemble ens = markov_transition(g, model);
    REQUIRE(ens.transition.rows() == 2);
    // States ordered (absent = 0, present = 1).
    CHECK(ens.transition(0, 0) == doctest::Approx(0.2));
    CHECK(ens.transition(0, 1) == doctest::Approx(0.8));
    CHECK(ens.transition(1, 0) == doctest::Approx(0.3));
    CHECK(ens.transition(1, 1) == doctest::Approx(0.7));
}

TEST_CASE("markov transition is row-stochastic and positive") {
    for (auto [p, q] : std::vector<std::pair<double, double>>{{0.4, 0.7}, {0.5, 0.5}, {0.9, 0.1}}) {
        const SubgraphEnsemble ens = markov_transition(four_node_graph(), MarkovModel{p, q});
        const Eigen::VectorXd row_sums = ens.transition.rowwise().sum();
        for (int i = 0; i < ens.size(); ++i) {
            CHECK(row_sums(i) == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(ens.transition.row(i).minCoeff() > 0.0);
        }
    }
}

TEST_CASE("p = 1 - q collapses the chain to the iid distribution") {
    const DirectedGraph g = four_node_graph();
    for (double q : {0.3, 0.5, 0.7}) {
        const SubgraphEnsemble chain = markov_transition(g, MarkovModel{1.0 - q, q});
        const SubgraphEnsemble iid = iid_probabilities(g, IidModel{q});
        for (int i = 0; i < chain.size(); ++i)
            for (int j = 0; j < chain.size(); ++j)
                CHECK(std::abs(chain.transition(i, j) - iid.probabilities(j)) <= 1e-12);
    }
}

TEST_CASE("symmetric two-arc chain is uniform") {
    const DirectedGraph g = build_graph(3, {{1, 2}, {2, 3}});
    const SubgraphEnsemble ens = markov_transition(g, MarkovModel{0.5, 0.5});
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(ens.transition(i, j) == doctest::Approx(0.25));
}

TEST_CASE("stationary edge probability") {
    // Two-state chain stationarity solved by hand: q / (p + q).
    CHECK(markov_stationary_edge_prob(MarkovModel{0.4, 0.7}) == doctest::Approx(0.7 / 1.1));
    CHECK(markov_stationary_edge_prob(MarkovModel{0.3, 0.3}) == doctest::Approx(0.5));
    CHECK(markov_stationary_edge_prob(MarkovModel{0.5, 0.5}) == doctest::Approx(0.5));
}

TEST_CASE("iid sampling matches the exact distribution") {
    const DirectedGraph g = four_node_graph();
    const SubgraphEnsemble ens = iid_probabilities(g, IidModel{0.5});

    RandomStream rng(42);
    const int draws = 100000;
    std::vector<int> counts(16, 0);
    for (int i = 0; i < draws; ++i) ++counts[sample_iid(ens, rng)];
    for (int mask = 0; mask < 16; ++mask) {
        const double freq = static_cast<double>(counts[mask]) / draws;
        CHECK(std::abs(freq - 1.0 / 16) < 0.005);
    }

    // q = 1 always yields the full subgraph.
    const SubgraphEnsemble full = iid_probabilities(g, IidModel{1.0});
    for (int i = 0; i < 10; ++i) CHECK(sample_iid(full, rng) == 15);
}

TEST_CASE("sampling is reproducible from the seed") {
    const DirectedGraph g = four_node_graph();
    const SubgraphEnsemble ens = iid_probabilities(g, IidModel{0.37});
    RandomStream a(123), b(123), c(124);
    bool any_difference = false;
    for (int i = 0; i < 200; ++i) {
        const std::uint64_t ma = sample_iid(ens, a);
        CHECK(ma == sample_iid(ens, b));
        if (ma != sample_iid(ens, c)) any_difference = true;
    }
    CHECK(any_difference);
}

TEST_CASE("markov per-edge stepping matches the transition row") {
    const DirectedGraph g = build_graph(2, {{1, 2}});
    const MarkovModel model{0.3, 0.8};
    const SubgraphEnsemble ens = markov_transition(g, model);

    RandomStream rng(5);
    const int draws = 100000;
    int to_absent = 0;
    for (int i = 0; i < draws; ++i)
        if (sample_markov_step(ens, 1, rng) == 0) ++to_absent;
    CHECK(std::abs(static_cast<double>(to_absent) / draws - model.p) < 0.005);
}

TEST_CASE("p = q = 0.5 makes the next subgraph uniform") {
    const DirectedGraph g = build_graph(3, {{1, 2}, {2, 3}});
    const SubgraphEnsemble ens = markov_transition(g, MarkovModel{0.5, 0.5});
    RandomStream rng(9);
    const int draws = 80000;
    std::vector<int> counts(4, 0);
    for (int i = 0; i < draws; ++i) ++counts[sample_markov_step(ens, 2, rng)];
    for (int mask = 0; mask < 4; ++mask)
        CHECK(std::abs(static_cast<double>(counts[mask]) / draws - 0.25) < 0.01);
}

TEST_CASE("p = 1 - q sampling forgets the current state") {
    const DirectedGraph g = build_graph(2, {{1, 2}});
    const MarkovModel model{0.4, 0.6}; // p = 1 - q
    const SubgraphEnsemble ens = markov_transition(g, model);
    RandomStream rng(13);
    const int draws = 100000;
    int on_from_on = 0, on_from_off = 0;
    for (int i = 0; i < draws; ++i) {
        if (sample_markov_step(ens, 1, rng) == 1) ++on_from_on;
        if (sample_markov_step(ens, 0, rng) == 1) ++on_from_off;
    }
    const double f1 = static_cast<double>(on_from_on) / draws;
    const double f0 = static_cast<double>(on_from_off) / draws;
    CHECK(std::abs(f1 - 0.6) < 0.005);
    CHECK(std::abs(f0 - 0.6) < 0.005);
}

TEST_CASE("samplers consume exactly one draw per arc") {
    const DirectedGraph g = four_node_graph();
    const SubgraphEnsemble iid = iid_probabilities(g, IidModel{0.37});
    const SubgraphEnsemble chain = markov_transition(g, MarkovModel{0.3, 0.6});

    RandomStream a(99), b(99);
    sample_iid(iid, a);
    for (int i = 0; i < g.arc_count(); ++i) b.next_double();
    CHECK(a.next_u64() == b.next_u64());

    RandomStream c(7), d(7);
    sample_markov_step(chain, 0b1010, c);
    for (int i = 0; i < g.arc_count(); ++i) d.next_double();
    CHECK(c.next_u64() == d.next_u64());
}

TEST_CASE("markov initial mask modes") {
    const MarkovModel stationary{0.25, 0.75, MarkovInitStationary{}};
    RandomStream rng(21);
    const int draws = 60000;
    int on = 0;
    for (int i = 0; i < draws; ++i)
        on += std::popcount(markov_initial_mask(1, stationary, rng));
    CHECK(std::abs(static_cast<double>(on) / draws - 0.75) < 0.006);

    const MarkovModel full{0.25, 0.75, MarkovInitFull{}};
    CHECK(markov_initial_mask(3, full, rng) == 7);

    const MarkovModel fixed{0.25, 0.75, MarkovInitFixed{0b101}};
    CHECK(markov_initial_mask(3, fixed, rng) == 0b101);
    CHECK_THROWS_AS(markov_initial_mask(2, fixed, rng), InvalidInputError);
}

TEST_CASE("model JSON round trip") {
    const RandomModel iid = model_from_json(nlohmann::json::parse(R"({"model":"iid","q":0.5})"));
    CHECK(std::get<IidModel>(iid).q == 0.5);

    const RandomModel markov = model_from_json(
        nlohmann::json::parse(R"({"model":"markov","p":0.4,"q":0.7,"init":"full"})"));
    const auto& m = std::get<MarkovModel>(markov);
    CHECK(m.p == 0.4);
    CHECK(m.q == 0.7);
    CHECK(std::holds_alternative<MarkovInitFull>(m.init));

    const RandomModel masked = model_from_json(
        nlohmann::json::parse(R"({"model":"markov","p":0.4,"q":0.7,"init":{"mask":5}})"));
    CHECK(std::get<MarkovInitFixed>(std::get<MarkovModel>(masked).init).mask == 5);

    for (const RandomModel& model : {iid, markov, masked})
        CHECK(model_to_json(model_from_json(model_to_json(model))) == model_to_json(model));

    CHECK_THROWS_AS(model_from_json(nlohmann::json::parse(R"({"model":"weird"})")),
                    InvalidInputError);
    CHECK_THROWS_AS(model_from_json(nlohmann::json::parse(R"({"model":"iid","q":1.5})")),
                    InvalidInputError);
}

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <sstream>
#include <vector>

#include "consensus/dynamics.hpp"
#include "consensus/ensemble.hpp"
#include "consensus/errors.hpp"
#include "consensus/graph.hpp"
#include "consensus/rng.hpp"

using namespace consensus;

namespace {

DirectedGraph four_node_graph() {
    return build_graph(4, {{1, 2}, {2, 3}, {3, 2}, {3, 4}});
}

Eigen::VectorXd vec(std::initializer_list<double> values) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double v : values) x(i++) = v;
    return x;
}

DirectedGraph random_tree_ish_graph(RandomStream& rng, int n) {
    // A random spanning chain plus a few extra arcs.
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i + 1;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(order.size() - i));
        std::swap(order[i], order[j]);
    }
    std::vector<std::pair<int, int>> arcs;
    for (std::size_t i = 0; i + 1 < order.size(); ++i)
        arcs.emplace_back(order[i], order[i + 1]);
    for (int extra = 0; extra < n / 2; ++extra) {
        const int j = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        const int i = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        if (i == j) continue;
        if (std::find(arcs.begin(), arcs.end(), std::make_pair(j, i)) != arcs.end()) continue;
        arcs.emplace_back(j, i);
    }
    return build_graph(n, arcs);
}

} // namespace

TEST_CASE("continuous access transform") {
    CHECK(continuous_access_tau(std::log(2.0)) == doctest::Approx(0.5));
    CHECK(continuous_access_tau(1e-12) == doctest::Approx(1e-12).epsilon(1e-6));
    for (double tau : {0.1, 1.0, 5.0, 100.0}) CHECK(continuous_access_tau(tau) < 1.0);
    CHECK_THROWS_AS(continuous_access_tau(0.0), InvalidInputError);
}

TEST_CASE("step matches a hand-computed update") {
    const Eigen::MatrixXd L = laplacian(build_graph(2, {{1, 2}}));
    const Eigen::VectorXd next = step(vec({4, 0}), L, 0.5);
    CHECK(next(0) == 4.0);
    CHECK(next(1) == 2.0);
}

TEST_CASE("consensus states are exact fixed points") {
    RandomStream rng(31);
    for (int it = 0; it < 100; ++it) {
        const DirectedGraph g = random_tree_ish_graph(rng, 3 + static_cast<int>(rng.below(4)));
        const std::uint64_t all = (std::uint64_t{1} << g.arc_count()) - 1;
        const Eigen::MatrixXd L = subgraph_laplacian(g, rng.below(all + 1));
        const double c = rng.uniform(-100.0, 100.0);
        const double tau = rng.uniform(0.01, 50.0);
        const Eigen::VectorXd x = Eigen::VectorXd::Constant(g.n, c);
        CHECK(step(x, L, tau) == x);
    }
}

TEST_CASE("empty subgraph leaves the state unchanged") {
    const DirectedGraph g = four_node_graph();
    const Eigen::VectorXd x = vec({5, 2, 1, 1});
    CHECK(step(x, subgraph_laplacian(g, 0), 1.3) == x);
    CHECK(step_arcs(x, g, 0, 1.3) == x);
}

TEST_CASE("step and step_arcs agree bit for bit") {
    RandomStream rng(17);
    const DirectedGraph g = four_node_graph();
    for (std::uint64_t mask = 0; mask < 16; ++mask) {
        Eigen::VectorXd x(4);
        for (int i = 0; i < 4; ++i) x(i) = rng.uniform(-10, 10);
        const double tau = rng.uniform(0.01, 3.0);
        CHECK(step(x, subgraph_laplacian(g, mask), tau) == step_arcs(x, g, mask, tau));
    }
}

TEST_CASE("step validates inputs") {
    const Eigen::MatrixXd L = laplacian(build_graph(2, {{1, 2}}));
    CHECK_THROWS_AS(step(vec({1, 2, 3}), L, 0.5), InvalidInputError);
    CHECK_THROWS_AS(step(vec({1, 2}), L, 0.0), InvalidInputError);
}

TEST_CASE("agreement and disagreement") {
    CHECK(agreement(vec({5, 2, 1, 1})) == 4.0);
    CHECK(agreement(vec({3, 3, 3})) == 0.0);
    CHECK(agreement(vec({0, 1})) == 1.0);

    CHECK(disagreement(vec({7, 7})).isZero(0.0));
    CHECK(disagreement(vec({1, -1})) == vec({1, -1}));
    const Eigen::VectorXd d = disagreement(vec({5, 2, 1, 1}));
    CHECK(d == vec({2.75, -0.25, -1.25, -1.25}));
}

TEST_CASE("sandwich bounds hold along simulated paths") {
    SystemConfig config{four_node_graph(), IidModel{0.5}, TauSchedule::constant(1.0)};
    RandomStream rng(3);
    const Trajectory traj = simulate(config, vec({5, 2, 1, 1}), 60, rng);
    REQUIRE(traj.states_stored);
    const double root_n = std::sqrt(4.0);
    for (const Eigen::VectorXd& x : traj.states) {
        const double a = agreement(x);
        const double dn = disagreement(x).norm();
        CHECK(a >= dn / root_n - 1e-12);
        CHECK(a <= std::sqrt(2.0) * dn + 1e-12);
    }
}

TEST_CASE("simulate records consistent lengths and masks") {
    SystemConfig config{four_node_graph(), IidModel{0.5}, TauSchedule::constant(0.8)};
    RandomStream rng(10);
    const Trajectory traj = simulate(config, vec({5, 2, 1, 1}), 25, rng);
    CHECK(traj.length() == 26);
    CHECK(traj.states.size() == 26);
    CHECK(traj.subgraph_masks.size() == 25);
    CHECK(traj.taus.size() == 25);
    for (int k = 0; k < 26; ++k)
        CHECK(traj.agreement_values[static_cast<std::size_t>(k)] ==
              agreement(traj.states[static_cast<std::size_t>(k)]));

    // Replaying the recorded masks through step reproduces the states.
    Eigen::VectorXd x = vec({5, 2, 1, 1});
    for (int k = 0; k < 25; ++k) {
        x = step(x, subgraph_laplacian(config.graph, traj.subgraph_masks[k]), traj.taus[k]);
        CHECK(x == traj.states[static_cast<std::size_t>(k) + 1]);
    }
}

TEST_CASE("consensus initial state stays at zero agreement") {
    SystemConfig config{four_node_graph(), MarkovModel{0.4, 0.7}, TauSchedule::constant(1.4)};
    RandomStream rng(77);
    const Trajectory traj = simulate(config, Eigen::VectorXd::Constant(4, 3.25), 40, rng);
    for (double a : traj.agreement_values) CHECK(a == 0.0);
}

TEST_CASE("identical seeds give identical trajectories") {
    SystemConfig config{four_node_graph(), MarkovModel{0.3, 0.6}, TauSchedule::constant(1.1)};
    RandomStream a(5), b(5);
    const Trajectory ta = simulate(config, vec({5, 2, 1, 1}), 50, a);
    const Trajectory tb = simulate(config, vec({5, 2, 1, 1}), 50, b);
    CHECK(ta.subgraph_masks == tb.subgraph_masks);
    CHECK(ta.agreement_values == tb.agreement_values);
}

TEST_CASE("agreement is exactly non-increasing in the row-stochastic regime") {
    RandomStream rng(101);
    int checked = 0;
    for (int it = 0; it < 300; ++it) {
        const int n = 3 + static_cast<int>(rng.below(4)); // up to 6 nodes
        const DirectedGraph g = random_tree_ish_graph(rng, n);
        const double tau = 0.9 / (n - 1);
        SystemConfig config{g, IidModel{0.6}, TauSchedule::constant(tau)};
        Eigen::VectorXd x0(n);
        for (int i = 0; i < n; ++i) x0(i) = rng.uniform(-5, 5);
        RandomStream sim_rng(rng.next_u64());
        const Trajectory traj = simulate(config, x0, 40, sim_rng);
        for (int k = 0; k + 1 < traj.length(); ++k) {
            CHECK(traj.agreement_values[k + 1] <= traj.agreement_values[k]);
            ++checked;
        }
    }
    CHECK(checked > 10000);
}

TEST_CASE("tau schedules cycle over the horizon") {
    const TauSchedule schedule = parse_tau_schedule("0.5,1.5,0.25");
    CHECK(schedule.at(0) == 0.5);
    CHECK(schedule.at(1) == 1.5);
    CHECK(schedule.at(2) == 0.25);
    CHECK(schedule.at(3) == 0.5);
    CHECK_FALSE(schedule.is_constant());

    SystemConfig config{four_node_graph(), IidModel{0.9}, schedule};
    RandomStream rng(4);
    const Trajectory traj = simulate(config, vec({5, 2, 1, 1}), 7, rng);
    CHECK(traj.taus == std::vector<double>{0.5, 1.5, 0.25, 0.5, 1.5, 0.25, 0.5});

    CHECK_THROWS_AS(parse_tau_schedule(""), InvalidInputError);
    CHECK_THROWS_AS(parse_tau_schedule("1.0,-2"), InvalidInputError);
    CHECK_THROWS_AS(parse_tau_schedule("abc"), InvalidInputError);
}

TEST_CASE("continuous access simulation uses the transformed weight") {
    SystemConfig plain{build_graph(2, {{1, 2}}), IidModel{1.0},
                       TauSchedule::constant(0.5), false};
    SystemConfig transformed{build_graph(2, {{1, 2}}), IidModel{1.0},
                             TauSchedule::constant(std::log(2.0)), true};
    RandomStream a(1), b(1);
    const Trajectory tp = simulate(plain, vec({4, 0}), 1, a);
    const Trajectory tt = simulate(transformed, vec({4, 0}), 1, b);
    CHECK(tp.states[1] == tt.states[1]); // 1 - e^(-ln 2) = 0.5
}

TEST_CASE("divergent runs switch to the log domain instead of overflowing") {
    // Single arc, tau far above 2: the pair's difference grows by tau - 1
    // every step the arc is present.
    SystemConfig config{build_graph(2, {{1, 2}}), IidModel{1.0}, TauSchedule::constant(101.0)};
    RandomStream rng(8);
    const Trajectory traj = simulate(config, vec({1, 0}), 200, rng);
    CHECK(traj.log_domain);
    CHECK_FALSE(traj.states_stored);
    // Growth factor is exactly tau - 1 = 100 per step: log10 X(k) = k * 2.
    for (int k = 0; k < traj.length(); k += 20)
        CHECK(traj.agreement_log10[static_cast<std::size_t>(k)] ==
              doctest::Approx(2.0 * k).epsilon(1e-9));
    CHECK(std::isinf(traj.agreement_values.back()));
}

TEST_CASE("relabeling nodes permutes the trajectory") {
    // Coupled randomness: replay the original mask sequence through the
    // node permutation, then compare states step by step.
    RandomStream rng(55);
    const DirectedGraph g = four_node_graph();
    const std::vector<int> perm = {2, 0, 3, 1}; // old node i -> new node perm[i]

    std::vector<std::pair<int, int>> relabeled_arcs;
    for (const Arc& a : g.arcs)
        relabeled_arcs.emplace_back(perm[static_cast<std::size_t>(a.src)] + 1,
                                    perm[static_cast<std::size_t>(a.dst)] + 1);
    const DirectedGraph h = build_graph(g.n, relabeled_arcs);

    SystemConfig config{g, IidModel{0.5}, TauSchedule::constant(1.2)};
    const Eigen::VectorXd x0 = vec({5, 2, 1, 1});
    RandomStream sim_rng(rng.next_u64());
    const Trajectory traj = simulate(config, x0, 30, sim_rng);

    Eigen::VectorXd y(4);
    for (int i = 0; i < 4; ++i) y(perm[static_cast<std::size_t>(i)]) = x0(i);
    for (int k = 0; k < 30; ++k) {
        // Translate the realized arc set through the permutation.
        std::uint64_t mask = 0;
        for (int b = 0; b < g.arc_count(); ++b) {
            if (!(traj.subgraph_masks[static_cast<std::size_t>(k)] >> b & 1)) continue;
            const Arc a = g.arcs[static_cast<std::size_t>(b)];
            const Arc translated{perm[static_cast<std::size_t>(a.src)],
                                 perm[static_cast<std::size_t>(a.dst)]};
            for (int c = 0; c < h.arc_count(); ++c)
                if (h.arcs[static_cast<std::size_t>(c)] == translated) mask |= std::uint64_t{1} << c;
        }
        y = step_arcs(y, h, mask, 1.2);
        const Eigen::VectorXd& x = traj.states[static_cast<std::size_t>(k) + 1];
        for (int i = 0; i < 4; ++i)
            CHECK(y(perm[static_cast<std::size_t>(i)]) == x(i));
    }
}

TEST_CASE("trajectory CSV has the documented shape") {
    SystemConfig config{build_graph(2, {{1, 2}}), IidModel{1.0}, TauSchedule::constant(0.5)};
    RandomStream rng(2);
    const Trajectory traj = simulate(config, vec({4, 0}), 2, rng);
    std::ostringstream out;
    write_trajectory_csv(out, traj, true);
    std::istringstream lines(out.str());
    std::string line;
    std::getline(lines, line);
    CHECK(line == "k,tau_k,subgraph_mask,X_k,log10_X_k,x_1,x_2");
    std::getline(lines, line);
    CHECK(line == "0,0.5,1,4,0.6020599913279624,4,0");
    std::getline(lines, line);
    CHECK(line == "1,0.5,1,2,0.3010299956639812,4,2");
    std::getline(lines, line);
    CHECK(line == "2,,,1,0,4,3");
}

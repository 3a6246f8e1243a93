#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "consensus/graph.hpp"
#include "consensus/rng.hpp"

namespace consensus {

// Every arc is present independently with probability q at each sample
// instant.
struct IidModel {
    double q = 0.5;
};

// Initial state options for the Markovian edge process.
struct MarkovInitStationary {};          // each edge Bernoulli(q / (p + q))
struct MarkovInitFull {};                // all edges present
struct MarkovInitFixed {                 // explicit subgraph bitmask
    std::uint64_t mask = 0;
};
using MarkovInit = std::variant<MarkovInitStationary, MarkovInitFull, MarkovInitFixed>;

// Every arc follows its own two-state chain: an edge that is on fails with
// probability p, an edge that is off recovers with probability q.
struct MarkovModel {
    double p = 0.5;
    double q = 0.5;
    MarkovInit init = MarkovInitStationary{};
};

using RandomModel = std::variant<IidModel, MarkovModel>;

void validate_model(const RandomModel& model);

// Enumerated subgraph ensemble with its probability weights. For the i.i.d.
// model `probabilities` holds the distribution over subgraphs; for the
// Markov model `transition` is the row-stochastic subgraph chain. Both use
// the canonical bitmask indexing from `graph`.
struct SubgraphEnsemble {
    DirectedGraph graph;
    std::vector<Eigen::MatrixXd> laplacians; // index == arc bitmask
    RandomModel model;
    Eigen::VectorXd probabilities;           // i.i.d. only, length M
    Eigen::MatrixXd transition;              // Markov only, M x M

    int size() const { return static_cast<int>(laplacians.size()); }
    bool is_markov() const { return std::holds_alternative<MarkovModel>(model); }
};

// Distribution over subgraphs: pi_i = q^(#arcs present) (1-q)^(#arcs absent).
SubgraphEnsemble iid_probabilities(const DirectedGraph& g, const IidModel& model);

// Subgraph chain transition matrix: entry (i, j) multiplies p, 1-p, q, 1-q
// over the per-arc on/off transitions between mask i and mask j. Strictly
// positive and row-stochastic for 0 < p, q < 1.
SubgraphEnsemble markov_transition(const DirectedGraph& g, const MarkovModel& model);

// Stationary probability that a single edge is present: q / (p + q).
double markov_stationary_edge_prob(const MarkovModel& model);

// Per-edge samplers. Each consumes exactly n_arcs draws from the stream, one
// per arc in canonical order, so sampling works identically with or without
// an enumerated ensemble.
std::uint64_t sample_edges_iid(int n_arcs, double q, RandomStream& rng);
std::uint64_t sample_edges_markov(int n_arcs, std::uint64_t current, double p, double q,
                                  RandomStream& rng);
std::uint64_t markov_initial_mask(int n_arcs, const MarkovModel& model, RandomStream& rng);

// Ensemble-level wrappers around the per-edge samplers.
std::uint64_t sample_iid(const SubgraphEnsemble& ens, RandomStream& rng);
std::uint64_t sample_markov_step(const SubgraphEnsemble& ens, std::uint64_t current,
                                 RandomStream& rng);

// Model config JSON: {"model": "iid", "q": 0.5} or
// {"model": "markov", "p": 0.4, "q": 0.7,
//  "init": "stationary" | "full" | {"mask": <int>}} (init optional,
// default stationary).
RandomModel model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const RandomModel& model);

} // namespace consensus

#include "consensus/ensemble.hpp"

#include <bit>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "consensus/errors.hpp"

namespace consensus {

namespace {

void validate_iid(const IidModel& m) {
    if (!(m.q > 0.0 && m.q <= 1.0))
        throw InvalidInputError("i.i.d. edge probability q must be in (0, 1], got " +
                                std::to_string(m.q));
}

void validate_markov(const MarkovModel& m) {
    if (!(m.p > 0.0 && m.p < 1.0) || !(m.q > 0.0 && m.q < 1.0))
        throw InvalidInputError("Markov rates must satisfy 0 < p, q < 1, got p=" +
                                std::to_string(m.p) + " q=" + std::to_string(m.q));
}

} // namespace

void validate_model(const RandomModel& model) {
    if (const auto* iid = std::get_if<IidModel>(&model))
        validate_iid(*iid);
    else
        validate_markov(std::get<MarkovModel>(model));
}

SubgraphEnsemble iid_probabilities(const DirectedGraph& g, const IidModel& model) {
    validate_iid(model);
    SubgraphEnsemble ens;
    ens.graph = g;
    ens.laplacians = enumerate_subgraphs(g);
    ens.model = model;

    const int e = g.arc_count();
    const auto m = static_cast<Eigen::Index>(ens.laplacians.size());
    ens.probabilities.resize(m);
    for (Eigen::Index mask = 0; mask < m; ++mask) {
        const int on = std::popcount(static_cast<std::uint64_t>(mask));
        ens.probabilities(mask) = std::pow(model.q, on) * std::pow(1.0 - model.q, e - on);
    }
    return ens;
}

SubgraphEnsemble markov_transition(const DirectedGraph& g, const MarkovModel& model) {
    validate_markov(model);
    SubgraphEnsemble ens;
    ens.graph = g;
    ens.laplacians = enumerate_subgraphs(g);
    ens.model = model;

    const int e = g.arc_count();
    const auto m = static_cast<Eigen::Index>(ens.laplacians.size());
    const std::uint64_t all = e == 0 ? 0 : (std::uint64_t{1} << e) - 1;
    ens.transition.resize(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto from = static_cast<std::uint64_t>(i);
        for (Eigen::Index j = 0; j < m; ++j) {
            const auto to = static_cast<std::uint64_t>(j);
            const int on_off = std::popcount(from & ~to);
            const int on_on = std::popcount(from & to);
            const int off_on = std::popcount(~from & to & all);
            const int off_off = std::popcount(~from & ~to & all);
            ens.transition(i, j) = std::pow(model.p, on_off) * std::pow(1.0 - model.p, on_on) *
                                   std::pow(model.q, off_on) * std::pow(1.0 - model.q, off_off);
        }
    }
    return ens;
}

double markov_stationary_edge_prob(const MarkovModel& model) {
    validate_markov(model);
    return model.q / (model.p + model.q);
}

std::uint64_t sample_edges_iid(int n_arcs, double q, RandomStream& rng) {
    std::uint64_t mask = 0;
    for (int b = 0; b < n_arcs; ++b)
        if (rng.bernoulli(q)) mask |= std::uint64_t{1} << b;
    return mask;
}

std::uint64_t sample_edges_markov(int n_arcs, std::uint64_t current, double p, double q,
                                  RandomStream& rng) {
    std::uint64_t mask = 0;
    for (int b = 0; b < n_arcs; ++b) {
        const bool on = current >> b & 1;
        const bool next = on ? !rng.bernoulli(p) : rng.bernoulli(q);
        if (next) mask |= std::uint64_t{1} << b;
    }
    return mask;
}

std::uint64_t markov_initial_mask(int n_arcs, const MarkovModel& model, RandomStream& rng) {
    const std::uint64_t all = n_arcs == 0 ? 0 : (std::uint64_t{1} << n_arcs) - 1;
    if (std::holds_alternative<MarkovInitFull>(model.init)) return all;
    if (const auto* fixed = std::get_if<MarkovInitFixed>(&model.init)) {
        if (fixed->mask & ~all)
            throw InvalidInputError("Markov initial mask has bits beyond the arc count");
        return fixed->mask;
    }
    return sample_edges_iid(n_arcs, markov_stationary_edge_prob(model), rng);
}

std::uint64_t sample_iid(const SubgraphEnsemble& ens, RandomStream& rng) {
    const auto& model = std::get<IidModel>(ens.model);
    return sample_edges_iid(ens.graph.arc_count(), model.q, rng);
}

std::uint64_t sample_markov_step(const SubgraphEnsemble& ens, std::uint64_t current,
                                 RandomStream& rng) {
    const auto& model = std::get<MarkovModel>(ens.model);
    return sample_edges_markov(ens.graph.arc_count(), current, model.p, model.q, rng);
}

RandomModel model_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("model"))
        throw InvalidInputError("model JSON must be an object with a \"model\" field");
    const std::string kind = j["model"].get<std::string>();
    if (kind == "iid") {
        if (!j.contains("q")) throw InvalidInputError("iid model needs field \"q\"");
        IidModel m{j["q"].get<double>()};
        validate_iid(m);
        return m;
    }
    if (kind == "markov") {
        if (!j.contains("p") || !j.contains("q"))
            throw InvalidInputError("markov model needs fields \"p\" and \"q\"");
        MarkovModel m;
        m.p = j["p"].get<double>();
        m.q = j["q"].get<double>();
        if (j.contains("init")) {
            const auto& init = j["init"];
            if (init.is_string() && init == "stationary")
                m.init = MarkovInitStationary{};
            else if (init.is_string() && init == "full")
                m.init = MarkovInitFull{};
            else if (init.is_object() && init.contains("mask"))
                m.init = MarkovInitFixed{init["mask"].get<std::uint64_t>()};
            else
                throw InvalidInputError(
                    "markov init must be \"stationary\", \"full\", or {\"mask\": <int>}");
        }
        validate_markov(m);
        return m;
    }
    throw InvalidInputError("unknown model kind: " + kind);
}

nlohmann::json model_to_json(const RandomModel& model) {
    if (const auto* iid = std::get_if<IidModel>(&model))
        return nlohmann::json{{"model", "iid"}, {"q", iid->q}};
    const auto& m = std::get<MarkovModel>(model);
    nlohmann::json j{{"model", "markov"}, {"p", m.p}, {"q", m.q}};
    if (std::holds_alternative<MarkovInitStationary>(m.init))
        j["init"] = "stationary";
    else if (std::holds_alternative<MarkovInitFull>(m.init))
        j["init"] = "full";
    else
        j["init"] = nlohmann::json{{"mask", std::get<MarkovInitFixed>(m.init).mask}};
    return j;
}

} // namespace consensus

#include "consensus/dynamics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "consensus/errors.hpp"
#include "consensus/format.hpp"

namespace consensus {

double continuous_access_tau(double tau) {
    if (!(tau > 0.0)) throw InvalidInputError("tau must be positive");
    // 1 - e^(-tau); always strictly below 1, also after rounding.
    return std::min(-std::expm1(-tau), 1.0 - 0x1.0p-53);
}

TauSchedule parse_tau_schedule(const std::string& text) {
    TauSchedule schedule;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &pos);
        } catch (const std::exception&) {
            throw InvalidInputError("cannot parse tau value: \"" + item + "\"");
        }
        while (pos < item.size() && std::isspace(static_cast<unsigned char>(item[pos]))) ++pos;
        if (pos != item.size())
            throw InvalidInputError("cannot parse tau value: \"" + item + "\"");
        if (!(v > 0.0 && v <= 1e100))
            throw InvalidInputError("tau values must be in (0, 1e100], got " + item);
        schedule.values.push_back(v);
    }
    if (schedule.values.empty()) throw InvalidInputError("empty tau schedule");
    return schedule;
}

// The update is accumulated as x_i + tau * sum_j (x_j - x_i) over in-arcs in
// canonical order. This equals (I - tau L) x but keeps consensus states
// exact fixed points, and max(x)/min(x) are exactly monotone whenever
// tau * in-degree < 1.
Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::MatrixXd& L, double tau) {
    const auto n = x.size();
    if (L.rows() != n || L.cols() != n)
        throw InvalidInputError("step: Laplacian is " + std::to_string(L.rows()) + "x" +
                                std::to_string(L.cols()) + " but the state has length " +
                                std::to_string(n));
    if (!(tau > 0.0)) throw InvalidInputError("step: tau must be positive");

    Eigen::VectorXd next(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j || L(i, j) == 0.0) continue;
            acc += (-L(i, j)) * (x(j) - x(i));
        }
        next(i) = x(i) + tau * acc;
    }
    return next;
}

Eigen::VectorXd step_arcs(const Eigen::VectorXd& x, const DirectedGraph& g, std::uint64_t mask,
                          double tau) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(x.size());
    for (int b = 0; b < g.arc_count(); ++b) {
        if (!(mask >> b & 1)) continue;
        const Arc& a = g.arcs[static_cast<std::size_t>(b)];
        acc(a.dst) += x(a.src) - x(a.dst);
    }
    Eigen::VectorXd next(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) next(i) = x(i) + tau * acc(i);
    return next;
}

double agreement(const Eigen::VectorXd& x) {
    return x.maxCoeff() - x.minCoeff();
}

Eigen::VectorXd disagreement(const Eigen::VectorXd& x) {
    return x.array() - x.mean();
}

Trajectory simulate(const SystemConfig& config, const Eigen::VectorXd& x0, int k_max,
                    RandomStream& rng) {
    const DirectedGraph& g = config.graph;
    if (x0.size() != g.n)
        throw InvalidInputError("x0 has length " + std::to_string(x0.size()) +
                                " but the graph has " + std::to_string(g.n) + " nodes");
    if (k_max < 0) throw InvalidInputError("k_max must be nonnegative");
    if (g.arc_count() > kSimulationArcCap)
        throw CapExceededError("simulation masks support at most " +
                               std::to_string(kSimulationArcCap) + " arcs");
    validate_model(config.model);

    const int e = g.arc_count();
    const auto* markov = std::get_if<MarkovModel>(&config.model);
    const auto* iid = std::get_if<IidModel>(&config.model);

    Trajectory traj;
    traj.taus.reserve(static_cast<std::size_t>(k_max));
    traj.subgraph_masks.reserve(static_cast<std::size_t>(k_max));
    traj.agreement_values.reserve(static_cast<std::size_t>(k_max) + 1);
    traj.agreement_log10.reserve(static_cast<std::size_t>(k_max) + 1);
    traj.states_stored =
        (static_cast<long long>(k_max) + 1) * g.n <= kStateStorageCap;
    if (traj.states_stored) traj.states.reserve(static_cast<std::size_t>(k_max) + 1);

    Eigen::VectorXd x = x0;
    double scale_log10 = 0.0;

    auto record = [&] {
        const double a = agreement(x);
        if (scale_log10 == 0.0) {
            traj.agreement_values.push_back(a);
            traj.agreement_log10.push_back(std::log10(a)); // -inf at consensus
        } else {
            const double lg = std::log10(a) + scale_log10;
            traj.agreement_log10.push_back(lg);
            traj.agreement_values.push_back(std::pow(10.0, lg));
        }
        if (traj.states_stored) traj.states.push_back(x);
        if (traj.agreement_log10.back() > 100.0 && !traj.log_domain) {
            traj.log_domain = true;
            traj.states.clear();
            traj.states.shrink_to_fit();
            traj.states_stored = false;
        }
    };

    record();

    std::uint64_t mask = markov ? markov_initial_mask(e, *markov, rng) : 0;
    for (int k = 0; k < k_max; ++k) {
        const double tau = config.effective_tau(k);
        if (iid)
            mask = sample_edges_iid(e, iid->q, rng);
        else if (k > 0)
            mask = sample_edges_markov(e, mask, markov->p, markov->q, rng);
        x = step_arcs(x, g, mask, tau);
        while (x.cwiseAbs().maxCoeff() > 1e100) {
            x /= 1e100;
            scale_log10 += 100.0;
        }
        traj.taus.push_back(tau);
        traj.subgraph_masks.push_back(mask);
        record();
    }
    return traj;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, bool full_state) {
    if (full_state && !traj.states_stored)
        throw InvalidInputError("full-state export unavailable: states were not stored "
                                "(log-domain run or over the storage cap)");
    out << "k,tau_k,subgraph_mask,X_k,log10_X_k";
    if (full_state) {
        const auto n = traj.states.front().size();
        for (Eigen::Index i = 1; i <= n; ++i) out << ",x_" << i;
    }
    out << "\n";
    const int len = traj.length();
    for (int k = 0; k < len; ++k) {
        out << k << ",";
        if (k < len - 1) {
            out << format_double(traj.taus[static_cast<std::size_t>(k)]) << ","
                << format_u64(traj.subgraph_masks[static_cast<std::size_t>(k)]);
        } else {
            out << ",";
        }
        out << "," << format_double(traj.agreement_values[static_cast<std::size_t>(k)]) << ","
            << format_double(traj.agreement_log10[static_cast<std::size_t>(k)]);
        if (full_state) {
            const Eigen::VectorXd& x = traj.states[static_cast<std::size_t>(k)];
            for (Eigen::Index i = 0; i < x.size(); ++i) out << "," << format_double(x(i));
        }
        out << "\n";
    }
}

} // namespace consensus

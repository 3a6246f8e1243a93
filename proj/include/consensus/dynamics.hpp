#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "consensus/ensemble.hpp"
#include "consensus/graph.hpp"
#include "consensus/rng.hpp"

namespace consensus {

// Continuous-self-access variant: the update weight becomes 1 - e^(-tau).
double continuous_access_tau(double tau);

// Per-step inter-sampling intervals: a single value, or a list cycled over
// the horizon.
struct TauSchedule {
    std::vector<double> values;

    static TauSchedule constant(double tau) { return TauSchedule{{tau}}; }
    bool is_constant() const { return values.size() == 1; }
    double at(int k) const { return values[static_cast<std::size_t>(k) % values.size()]; }
};

TauSchedule parse_tau_schedule(const std::string& text);

// Everything a closed-loop run needs: topology, edge randomness, and the
// sampling schedule.
struct SystemConfig {
    DirectedGraph graph;
    RandomModel model;
    TauSchedule tau = TauSchedule::constant(1.0);
    bool continuous_access = false;

    double effective_tau(int k) const {
        double t = tau.at(k);
        return continuous_access ? continuous_access_tau(t) : t;
    }
};

// One sampled-data update x -> (I - tau L) x. Computed through neighbor
// differences, so consensus states are exact fixed points and the update is
// exactly monotone in the row-stochastic regime.
Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::MatrixXd& L, double tau);

// Same update driven by an arc bitmask; bit-identical to
// step(x, subgraph_laplacian(g, mask), tau).
Eigen::VectorXd step_arcs(const Eigen::VectorXd& x, const DirectedGraph& g, std::uint64_t mask,
                          double tau);

// Agreement measure: max(x) - min(x).
double agreement(const Eigen::VectorXd& x);

// Deviation from the average: x - mean(x) * 1.
Eigen::VectorXd disagreement(const Eigen::VectorXd& x);

// Once the agreement measure passes this threshold the run is flagged
// log-domain: divergent runs grow geometrically and would overflow doubles
// within a few hundred further steps.
inline constexpr double kLogDomainThreshold = 1e100;

// Full state storage is dropped when (k_max + 1) * N exceeds this.
inline constexpr long long kStateStorageCap = 10'000'000;

struct Trajectory {
    // Full states (states[k] = x(t_k)); empty when storage was dropped for
    // memory or because the run entered the log domain.
    std::vector<Eigen::VectorXd> states;
    std::vector<double> taus;                 // k_max entries, the applied values
    std::vector<std::uint64_t> subgraph_masks; // k_max entries
    std::vector<double> agreement_values;      // k_max + 1, +inf once unrepresentable
    std::vector<double> agreement_log10;       // k_max + 1, -inf at exact consensus
    bool log_domain = false;
    bool states_stored = true;

    int length() const { return static_cast<int>(agreement_values.size()); }
};

// Iterates the sampled-data update for k_max steps, sampling a subgraph per
// step from the configured edge model. Deterministic given the stream.
Trajectory simulate(const SystemConfig& config, const Eigen::VectorXd& x0, int k_max,
                    RandomStream& rng);

// CSV columns: k, tau_k, subgraph_mask, X_k, log10_X_k (+ x_1..x_N with
// full_state). tau_k/subgraph_mask are empty on the terminal row.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, bool full_state);

} // namespace consensus

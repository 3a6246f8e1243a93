#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "consensus/dynamics.hpp"
#include "consensus/ensemble.hpp"
#include "consensus/graph.hpp"

namespace consensus {

// Default tolerances used across the spectral machinery.
inline constexpr double kDefaultTauTol = 1e-3;     // threshold bisection
inline constexpr double kEigenvalueTol = 1e-10;    // power iteration stop
inline constexpr double kRhoMargin = 1e-9;         // guard band around rho = 1
inline constexpr int kDenseEigensolveCap = 1024;   // above: power iteration

// Projection onto the disagreement subspace: J = I - (1/n) 11'.
Eigen::MatrixXd projection_matrix(int n);

// The linear map that propagates the second moment of the disagreement.
// Mean-square consensus holds iff its spectral radius is < 1.
struct SecondMomentOperator {
    enum class Kind { Iid, Markov };
    Kind kind = Kind::Iid;
    Eigen::MatrixXd matrix;
    double tau = 0.0;
};

// i.i.d. model: sum_i pi_i (W_i (x) W_i) (J (x) J) with W_i = I - tau L_i.
// Dense N^2 x N^2.
SecondMomentOperator iid_second_moment(const SubgraphEnsemble& ens, double tau);

// Markovian model: blockdiag(W_i (x) W_i) * (Pi' (x) (J (x) J)), built
// block-row by block-row (block (i, j) = Pi(j, i) * (W_i (x) W_i)(J (x) J)).
// Dense (M N^2) x (M N^2), guarded by kMarkovDimensionCap.
SecondMomentOperator markov_second_moment(const SubgraphEnsemble& ens, double tau);

inline constexpr long long kMarkovDimensionCap = 4096;

// Orthonormal basis of the disagreement subspace (the range of J), as the
// columns of an n x (n-1) matrix.
Eigen::MatrixXd agreement_complement_basis(int n);

// Spectral radius of the model's second-moment operator, computed on the
// disagreement subspace (dimension M (N-1)^2 instead of M N^2); exactly
// equal to the radius of the full operator.
double consensus_radius(const SubgraphEnsemble& ens, double tau);

struct SpectralRadiusResult {
    double value = 0.0;
    bool converged = true; // false only when power iteration hit its budget
    int iterations = 0;
};

// Max eigenvalue modulus: dense eigensolve up to kDenseEigensolveCap, power
// iteration with a deterministic start beyond (tolerance kEigenvalueTol, at
// most 10^5 iterations; non-convergence reports the best estimate + flag).
SpectralRadiusResult spectral_radius_detail(const Eigen::MatrixXd& m);
double spectral_radius(const Eigen::MatrixXd& m);

// Mean-square consensus verdict: spectral radius of the model's second-moment
// operator < 1 - kRhoMargin. Requires a constant tau schedule.
bool ms_consensus_check(const SubgraphEnsemble& ens, double tau);
bool ms_consensus_check(const SystemConfig& config);

// Critical inter-sampling interval: mean-square consensus holds iff
// tau <= critical_tau, located by bisection on the spectral-radius condition
// (the feasible set is an interval). Requires a directed spanning tree.
double critical_tau(const DirectedGraph& g, const RandomModel& model, double tol);
double critical_tau(const SubgraphEnsemble& ens, double tol);

// Feasibility of the Lyapunov-operator condition, checked constructively by
// iterating the operator from the identity: feasible iff the iterates decay
// below `tol` (in Frobenius norm) within max_iter. Independent of the
// spectral-radius path; throws IterationLimitError when inconclusive.
bool lyapunov_feasibility(const SubgraphEnsemble& ens, double tau, int max_iter, double tol);

// Small-tau expected contraction of the agreement measure over N-1 steps:
// E[X(k+N-1)] <= factor * E[X(k)], factor = 1 - (q * eta)^(N-1) / 2 with
// eta = min(tau, 1 - (N-1) tau). Valid for 0 < tau < 1/(N-1).
struct ContractionBound {
    double eta = 0.0;
    double factor = 1.0;
};
ContractionBound contraction_rate_bound(const DirectedGraph& g, double q, double tau);

// lambda_min(tau L'JL - JL - L'J) for one subgraph Laplacian (symmetric by
// construction; the symmetrized matrix is used for numerical safety).
double expansion_lambda_min(const Eigen::MatrixXd& L, const Eigen::MatrixXd& J, double tau);

// Smallest tau at which no subgraph realization can contract the
// disagreement: max over subgraphs of the per-subgraph critical value of
// expansion_lambda_min >= 0 (bisection to 1e-9). The empty subgraph
// contributes no constraint. Returns +inf when some subgraph admits
// contraction at every finite tau (the case for every graph with N >= 3).
double tau_sharp(const DirectedGraph& g);
double tau_sharp(const std::vector<Eigen::MatrixXd>& laplacians);

// Almost-sure divergence bounds: above tau_natural = max(tau_sharp, tau_flat)
// the system diverges almost surely. tau_flat solves the log-drift inequality
// in closed form. i.i.d.: any graph with a spanning tree; Markov: complete
// graphs only (InapplicableError otherwise).
struct AsBounds {
    double tau_sharp = 0.0;
    double tau_flat = 0.0;
    double tau_natural = 0.0;
};
AsBounds as_divergence_bounds(const DirectedGraph& g, const RandomModel& model);
double as_divergence_bound(const DirectedGraph& g, const RandomModel& model);

struct AnalysisReport {
    double tau_dagger = 0.0;
    double tau_sharp = 0.0;   // +inf when no finite value exists
    double tau_flat = 0.0;
    double tau_natural = 0.0;
    std::vector<std::pair<double, double>> spectral_curve; // (tau, rho)
    double bisection_tolerance = kDefaultTauTol;
    bool continuous_access = false;
    bool as_bounds_computed = false;
    std::string note;
};

struct AnalyzeOptions {
    double tol = kDefaultTauTol;
    int curve_points = 33;
    bool continuous_access = false;
    // Skip the almost-sure bounds (they require a complete graph under the
    // Markov model); with false, an inapplicable graph/model pair throws.
    bool skip_as_bounds = false;
};

AnalysisReport analyze(const DirectedGraph& g, const RandomModel& model,
                       const AnalyzeOptions& options);

// Report JSON per the documented schema; non-finite thresholds serialize as
// null.
nlohmann::json report_to_json(const AnalysisReport& report, const DirectedGraph& g,
                              const RandomModel& model);

} // namespace consensus

#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "consensus/dynamics.hpp"

namespace consensus {

struct ExperimentConfig {
    SystemConfig system;
    Eigen::VectorXd x0;
    int trials = 10000;
    int k_max = 150;
    std::uint64_t root_seed = 0;
    int threads = 0; // 0 = hardware concurrency
};

// Per-step sample moments of the agreement measure over independent trials.
// Trials that entered the log domain (X > 1e100) are excluded from the means
// from their saturation step onward; saturated_fraction makes that visible.
struct MomentSeries {
    std::vector<double> mean_X;
    std::vector<double> mean_X2;
    std::vector<double> stderr_X2;
    std::vector<double> saturated_fraction;
    int trials_used = 0;

    int length() const { return static_cast<int>(mean_X.size()); }
};

// Runs `trials` independent trajectories (trial i uses the stream derived
// from root_seed by index i) and reduces them in fixed trial order, so the
// result is bit-identical for any thread count.
MomentSeries estimate_moments(const ExperimentConfig& cfg);

// Smallest grid tau classified as diverging: the OLS slope of log(mean_X2)
// over the last half of the horizon is positive at two standard errors (or
// the window saturated). Throws InvalidInputError when the grid does not
// bracket the transition.
double empirical_threshold(const DirectedGraph& g, const RandomModel& model,
                           const std::vector<double>& tau_grid, const ExperimentConfig& base);

enum class GraphFamily { Cycle, Complete };

struct SweepRow {
    int n = 0;
    double tau_dagger = 0.0;
};

// Analytic threshold per network size over a graph family. Sizes whose
// enumeration or eigensolve caps are exceeded are skipped, not failed.
std::vector<SweepRow> sweep_N(GraphFamily family, int n_from, int n_to,
                              const RandomModel& model, double tol);

// CSV: k, mean_X, mean_X2, stderr_X2, saturated_fraction.
void write_moments_csv(std::ostream& out, const MomentSeries& series);

// CSV: N, tau_dagger, model, params.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows,
                     const RandomModel& model);

} // namespace consensus

#include "consensus/analysis.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "consensus/errors.hpp"

namespace consensus {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

Eigen::MatrixXd step_matrix(const Eigen::MatrixXd& L, double tau) {
    return Eigen::MatrixXd::Identity(L.rows(), L.cols()) - tau * L;
}

// Maps an effective-model threshold back to the user's tau domain under the
// continuous-access transform; thresholds at or above 1 are unreachable, so
// the property holds for every tau.
double invert_continuous_access(double v) {
    if (!std::isfinite(v)) return v;
    if (v >= 1.0) return kInf;
    return -std::log1p(-v);
}

} // namespace

Eigen::MatrixXd projection_matrix(int n) {
    if (n < 2) throw InvalidInputError("projection needs n >= 2");
    Eigen::MatrixXd j = Eigen::MatrixXd::Constant(n, n, -1.0 / n);
    j.diagonal().array() += 1.0;
    return j;
}

SecondMomentOperator iid_second_moment(const SubgraphEnsemble& ens, double tau) {
    const auto* model = std::get_if<IidModel>(&ens.model);
    if (!model) throw InvalidInputError("iid_second_moment needs an i.i.d. ensemble");
    const int n = ens.graph.n;
    const Eigen::MatrixXd jj = kron(projection_matrix(n), projection_matrix(n));

    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n * n, n * n);
    for (int i = 0; i < ens.size(); ++i) {
        const double pi = ens.probabilities(i);
        if (pi == 0.0) continue;
        const Eigen::MatrixXd w = step_matrix(ens.laplacians[static_cast<std::size_t>(i)], tau);
        acc.noalias() += pi * kron(w, w);
    }
    return SecondMomentOperator{SecondMomentOperator::Kind::Iid, acc * jj, tau};
}

SecondMomentOperator markov_second_moment(const SubgraphEnsemble& ens, double tau) {
    const auto* model = std::get_if<MarkovModel>(&ens.model);
    if (!model) throw InvalidInputError("markov_second_moment needs a Markov ensemble");
    const int n = ens.graph.n;
    const long long m = ens.size();
    const long long dim = m * n * n;
    if (dim > kMarkovDimensionCap)
        throw CapExceededError("Markov second-moment operator has dimension " +
                               std::to_string(dim) + ", cap is " +
                               std::to_string(kMarkovDimensionCap));

    const Eigen::MatrixXd jj = kron(projection_matrix(n), projection_matrix(n));
    const Eigen::Index block = static_cast<Eigen::Index>(n) * n;

    // Block (i, j) of Gamma * Theta is Pi(j, i) * (W_i (x) W_i)(J (x) J);
    // Gamma itself is never materialized.
    Eigen::MatrixXd out(dim, dim);
    for (long long i = 0; i < m; ++i) {
        const Eigen::MatrixXd w = step_matrix(ens.laplacians[static_cast<std::size_t>(i)], tau);
        const Eigen::MatrixXd k = kron(w, w) * jj;
        for (long long j = 0; j < m; ++j)
            out.block(i * block, j * block, block, block) = ens.transition(j, i) * k;
    }
    return SecondMomentOperator{SecondMomentOperator::Kind::Markov, std::move(out), tau};
}

// Orthonormal basis of the subspace orthogonal to the all-ones vector
// (the range of J), as the columns of an n x (n-1) matrix.
Eigen::MatrixXd agreement_complement_basis(int n) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(projection_matrix(n));
    // Eigenvalues sorted ascending: the single 0 first, then n-1 ones.
    return solver.eigenvectors().rightCols(n - 1);
}

// Spectral radius of the second-moment operator, computed on the
// disagreement subspace: with U = V (x) V (V spanning the range of J),
// rho(E[W (x) W](J (x) J)) = rho(sum_i pi_i (V'W_iV) (x) (V'W_iV)) and
// rho(Gamma Theta) = rho of the blockwise-compressed map, because the
// nonzero spectra of XY and YX coincide and J (x) J = UU'. This shrinks the
// eigenproblem from M N^2 to M (N-1)^2 without changing the verdict.
double consensus_radius(const SubgraphEnsemble& ens, double tau) {
    const int n = ens.graph.n;
    const Eigen::MatrixXd v = agreement_complement_basis(n);
    const int r = n - 1;
    const int m = ens.size();

    std::vector<Eigen::MatrixXd> compressed; // V' W_i V per subgraph
    compressed.reserve(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i)
        compressed.push_back(
            v.transpose() * step_matrix(ens.laplacians[static_cast<std::size_t>(i)], tau) * v);

    if (!ens.is_markov()) {
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(r * r, r * r);
        for (int i = 0; i < m; ++i) {
            const double pi = ens.probabilities(i);
            if (pi == 0.0) continue;
            acc.noalias() += pi * kron(compressed[static_cast<std::size_t>(i)],
                                       compressed[static_cast<std::size_t>(i)]);
        }
        return spectral_radius(acc);
    }

    if (static_cast<long long>(m) * n * n > kMarkovDimensionCap)
        throw CapExceededError("Markov second-moment operator has dimension " +
                               std::to_string(static_cast<long long>(m) * n * n) + ", cap is " +
                               std::to_string(kMarkovDimensionCap));

    const Eigen::Index block = static_cast<Eigen::Index>(r) * r;
    Eigen::MatrixXd out(m * block, m * block);
    for (int i = 0; i < m; ++i) {
        const Eigen::MatrixXd k = kron(compressed[static_cast<std::size_t>(i)],
                                       compressed[static_cast<std::size_t>(i)]);
        for (int j = 0; j < m; ++j)
            out.block(i * block, j * block, block, block) = ens.transition(j, i) * k;
    }
    return spectral_radius(out);
}

SpectralRadiusResult spectral_radius_detail(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw InvalidInputError("spectral radius needs a square matrix");
    if (m.rows() == 0) return {0.0, true, 0};

    if (m.rows() <= kDenseEigensolveCap) {
        Eigen::EigenSolver<Eigen::MatrixXd> solver(m, /*computeEigenvectors=*/false);
        return {solver.eigenvalues().cwiseAbs().maxCoeff(), true, 0};
    }

    // Power iteration with a deterministic start.
    const Eigen::Index n = m.rows();
    Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) += 0.5 * std::cos(static_cast<double>(i));
    v /= v.norm();

    constexpr int kMaxIter = 100000;
    double estimate = 0.0;
    for (int it = 1; it <= kMaxIter; ++it) {
        Eigen::VectorXd w = m * v;
        const double norm = w.norm();
        if (norm == 0.0) return {0.0, true, it};
        w /= norm;
        const double prev = estimate;
        estimate = norm;
        v = w;
        if (it > 1 && std::abs(estimate - prev) <= kEigenvalueTol * std::max(1.0, estimate))
            return {estimate, true, it};
    }
    return {estimate, false, kMaxIter};
}

double spectral_radius(const Eigen::MatrixXd& m) {
    return spectral_radius_detail(m).value;
}

bool ms_consensus_check(const SubgraphEnsemble& ens, double tau) {
    return consensus_radius(ens, tau) < 1.0 - kRhoMargin;
}

bool ms_consensus_check(const SystemConfig& config) {
    if (!config.tau.is_constant())
        throw InvalidInputError("mean-square analysis needs a constant tau");
    const double tau = config.effective_tau(0);
    if (const auto* iid = std::get_if<IidModel>(&config.model))
        return ms_consensus_check(iid_probabilities(config.graph, *iid), tau);
    return ms_consensus_check(markov_transition(config.graph, std::get<MarkovModel>(config.model)),
                              tau);
}

double critical_tau(const SubgraphEnsemble& ens, double tol) {
    if (!(tol > 0.0)) throw InvalidInputError("bisection tolerance must be positive");
    if (!has_spanning_tree(ens.graph))
        throw InapplicableError("no directed spanning tree: no tau achieves consensus");

    const double lo_start = 1.0 / (2.0 * (ens.graph.n - 1));
    if (!ms_consensus_check(ens, lo_start))
        throw InapplicableError("small-tau feasibility failed; analysis inapplicable");

    double lo = lo_start;
    double hi = lo_start;
    const double cap = lo_start * 1048576.0; // 2^20
    do {
        lo = hi;
        hi *= 2.0;
        if (hi > cap)
            throw InapplicableError("no infeasible tau found below the bracket cap");
    } while (ms_consensus_check(ens, hi));

    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (ms_consensus_check(ens, mid))
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

double critical_tau(const DirectedGraph& g, const RandomModel& model, double tol) {
    if (const auto* iid = std::get_if<IidModel>(&model))
        return critical_tau(iid_probabilities(g, *iid), tol);
    return critical_tau(markov_transition(g, std::get<MarkovModel>(model)), tol);
}

bool lyapunov_feasibility(const SubgraphEnsemble& ens, double tau, int max_iter, double tol) {
    if (max_iter < 1) throw InvalidInputError("max_iter must be >= 1");
    if (!(tol > 0.0)) throw InvalidInputError("tol must be positive");

    const int n = ens.graph.n;
    const int m = ens.size();
    const Eigen::MatrixXd j = projection_matrix(n);

    std::vector<Eigen::MatrixXd> c; // J W_i J per subgraph
    c.reserve(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i)
        c.push_back(j * step_matrix(ens.laplacians[static_cast<std::size_t>(i)], tau) * j);

    const double grow_limit = 1e12 * std::sqrt(static_cast<double>(n));

    if (!ens.is_markov()) {
        Eigen::MatrixXd s = Eigen::MatrixXd::Identity(n, n);
        for (int it = 0; it < max_iter; ++it) {
            Eigen::MatrixXd next = Eigen::MatrixXd::Zero(n, n);
            for (int i = 0; i < m; ++i)
                next.noalias() +=
                    ens.probabilities(i) * (c[static_cast<std::size_t>(i)] * s *
                                            c[static_cast<std::size_t>(i)].transpose());
            s = std::move(next);
            const double norm = s.norm();
            if (norm < tol) return true;
            if (norm > grow_limit) return false;
        }
        throw IterationLimitError("Lyapunov iteration inconclusive after " +
                                  std::to_string(max_iter) + " iterations");
    }

    // Coupled variant: S_j <- sum_i Pi(i, j) * (J W_j J) S_i (J W_j J)'.
    std::vector<Eigen::MatrixXd> s(static_cast<std::size_t>(m),
                                   Eigen::MatrixXd::Identity(n, n));
    std::vector<Eigen::MatrixXd> next(static_cast<std::size_t>(m));
    for (int it = 0; it < max_iter; ++it) {
        for (int jdx = 0; jdx < m; ++jdx) {
            Eigen::MatrixXd mixed = Eigen::MatrixXd::Zero(n, n);
            for (int i = 0; i < m; ++i)
                mixed.noalias() += ens.transition(i, jdx) * s[static_cast<std::size_t>(i)];
            next[static_cast<std::size_t>(jdx)] = c[static_cast<std::size_t>(jdx)] * mixed *
                                                  c[static_cast<std::size_t>(jdx)].transpose();
        }
        s.swap(next);
        double norm = 0.0;
        for (const auto& si : s) norm = std::max(norm, si.norm());
        if (norm < tol) return true;
        if (norm > grow_limit) return false;
    }
    throw IterationLimitError("Lyapunov iteration inconclusive after " +
                              std::to_string(max_iter) + " iterations");
}

ContractionBound contraction_rate_bound(const DirectedGraph& g, double q, double tau) {
    if (!(q > 0.0 && q <= 1.0)) throw InvalidInputError("q must be in (0, 1]");
    if (!has_spanning_tree(g))
        throw InapplicableError("contraction bound needs a directed spanning tree");
    const int n = g.n;
    if (!(tau > 0.0 && tau < 1.0 / (n - 1)))
        throw InvalidInputError("contraction bound needs 0 < tau < 1/(N-1)");
    const double eta = std::min(tau, 1.0 - (n - 1) * tau);
    const double factor = 1.0 - 0.5 * std::pow(q * eta, n - 1);
    return {eta, factor};
}

double expansion_lambda_min(const Eigen::MatrixXd& L, const Eigen::MatrixXd& J, double tau) {
    const Eigen::MatrixXd jl = J * L;
    const Eigen::MatrixXd a = L.transpose() * jl;            // symmetric PSD
    const Eigen::MatrixXd b = jl + jl.transpose();           // J L + L' J
    Eigen::MatrixXd m = tau * a - b;
    m = 0.5 * (m + m.transpose().eval());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

namespace {

// Smallest tau with expansion_lambda_min >= 0 for one subgraph, +inf when
// the doubling search never finds a feasible bracket. lambda_min is
// non-decreasing in tau because the tau-coefficient matrix is PSD.
double subgraph_expansion_tau(const Eigen::MatrixXd& L, const Eigen::MatrixXd& J) {
    constexpr double kBracketCap = 1.1e12; // 2^40
    double hi = 1.0;
    while (expansion_lambda_min(L, J, hi) < 0.0) {
        hi *= 2.0;
        if (hi > kBracketCap) return kInf;
    }
    double lo = 0.0;
    while (hi - lo > 1e-9) {
        const double mid = 0.5 * (lo + hi);
        if (expansion_lambda_min(L, J, mid) >= 0.0)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

} // namespace

double tau_sharp(const std::vector<Eigen::MatrixXd>& laplacians) {
    if (laplacians.empty()) return 0.0;
    const Eigen::MatrixXd j = projection_matrix(static_cast<int>(laplacians.front().rows()));
    double worst = 0.0;
    for (const auto& L : laplacians) {
        if (L.isZero(0.0)) continue; // empty subgraph: no constraint
        worst = std::max(worst, subgraph_expansion_tau(L, j));
        if (std::isinf(worst)) return worst;
    }
    return worst;
}

double tau_sharp(const DirectedGraph& g) {
    return tau_sharp(enumerate_subgraphs(g));
}

AsBounds as_divergence_bounds(const DirectedGraph& g, const RandomModel& model) {
    validate_model(model);
    const int n = g.n;
    AsBounds bounds;

    // Probability of the pathwise expansion event per step; the drift
    // threshold solves q_event * log((tau-1)/(N-1)) = (1-q_event) * log(2N).
    double event_prob = 0.0;
    if (const auto* iid = std::get_if<IidModel>(&model)) {
        if (!has_spanning_tree(g))
            throw InapplicableError("divergence bound needs a directed spanning tree");
        // min over arcs (j, i) of (1-q)^(|N_i| + |N_j|), folded with q/(1-q)
        // so the q -> 1 limit stays well defined.
        std::vector<int> indeg(static_cast<std::size_t>(n), 0);
        for (const Arc& a : g.arcs) ++indeg[static_cast<std::size_t>(a.dst)];
        int min_exposure = 0;
        bool first = true;
        for (const Arc& a : g.arcs) {
            const int e = indeg[static_cast<std::size_t>(a.dst)] +
                          indeg[static_cast<std::size_t>(a.src)];
            if (first || e < min_exposure) min_exposure = e;
            first = false;
        }
        if (first) throw InapplicableError("divergence bound needs at least one arc");
        event_prob = iid->q * std::pow(1.0 - iid->q, min_exposure - 1);
    } else {
        const auto& markov = std::get<MarkovModel>(model);
        if (!is_complete(g))
            throw InapplicableError(
                "Markovian divergence bound is only available for complete graphs");
        event_prob = std::min(1.0 - markov.p, markov.q);
    }

    bounds.tau_sharp = tau_sharp(g);
    if (event_prob <= 0.0) {
        bounds.tau_flat = kInf;
    } else {
        const double exponent = (1.0 - event_prob) / event_prob;
        bounds.tau_flat = 1.0 + (n - 1) * std::pow(2.0 * n, exponent);
    }
    bounds.tau_natural = std::max(bounds.tau_sharp, bounds.tau_flat);
    return bounds;
}

double as_divergence_bound(const DirectedGraph& g, const RandomModel& model) {
    return as_divergence_bounds(g, model).tau_natural;
}

AnalysisReport analyze(const DirectedGraph& g, const RandomModel& model,
                       const AnalyzeOptions& options) {
    AnalysisReport report;
    report.bisection_tolerance = options.tol;
    report.continuous_access = options.continuous_access;

    SubgraphEnsemble ens;
    if (const auto* iid = std::get_if<IidModel>(&model))
        ens = iid_probabilities(g, *iid);
    else
        ens = markov_transition(g, std::get<MarkovModel>(model));

    const double tau_dagger_eff = critical_tau(ens, options.tol);
    report.tau_dagger =
        options.continuous_access ? invert_continuous_access(tau_dagger_eff) : tau_dagger_eff;

    const int points = std::max(2, options.curve_points);
    const double curve_hi = std::isfinite(report.tau_dagger) ? 1.5 * report.tau_dagger : 10.0;
    for (int i = 0; i < points; ++i) {
        const double tau = curve_hi * (i + 1) / points;
        const double eff = options.continuous_access ? continuous_access_tau(tau) : tau;
        report.spectral_curve.emplace_back(tau, consensus_radius(ens, eff));
    }

    if (options.skip_as_bounds) {
        report.tau_sharp = report.tau_flat = report.tau_natural =
            std::numeric_limits<double>::quiet_NaN();
        report.note = "almost-sure bounds skipped";
        return report;
    }

    AsBounds bounds = as_divergence_bounds(g, model);
    if (options.continuous_access) {
        bounds.tau_sharp = invert_continuous_access(bounds.tau_sharp);
        bounds.tau_flat = invert_continuous_access(bounds.tau_flat);
        bounds.tau_natural = invert_continuous_access(bounds.tau_natural);
    }
    report.tau_sharp = bounds.tau_sharp;
    report.tau_flat = bounds.tau_flat;
    report.tau_natural = bounds.tau_natural;
    report.as_bounds_computed = true;
    if (std::isinf(report.tau_natural))
        report.note = "no finite almost-sure divergence bound for this graph/model";
    return report;
}

namespace {

nlohmann::json finite_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

} // namespace

nlohmann::json report_to_json(const AnalysisReport& report, const DirectedGraph& g,
                              const RandomModel& model) {
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& [tau, rho] : report.spectral_curve) curve.push_back({tau, rho});
    nlohmann::json j{
        {"tau_dagger", finite_or_null(report.tau_dagger)},
        {"tau_sharp", finite_or_null(report.tau_sharp)},
        {"tau_flat", finite_or_null(report.tau_flat)},
        {"tau_natural", finite_or_null(report.tau_natural)},
        {"spectral_curve", curve},
        {"model", model_to_json(model)},
        {"graph", graph_to_json(g)},
        {"tolerances",
         {{"tau", report.bisection_tolerance},
          {"eigenvalue", kEigenvalueTol},
          {"rho_margin", kRhoMargin}}},
        {"continuous_access", report.continuous_access},
        {"as_bounds_computed", report.as_bounds_computed},
    };
    if (!report.note.empty()) j["note"] = report.note;
    return j;
}

} // namespace consensus

#include "consensus/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

#include "consensus/analysis.hpp"
#include "consensus/errors.hpp"
#include "consensus/format.hpp"

namespace consensus {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct TrialResult {
    std::vector<double> x;  // agreement per step, finite up to saturation
    int saturated_at = -1;  // first k with X > 1e100, -1 if never
};

TrialResult run_trial(const ExperimentConfig& cfg, std::uint64_t trial_index) {
    RandomStream rng = RandomStream::derived(cfg.root_seed, trial_index);
    const Trajectory traj = simulate(cfg.system, cfg.x0, cfg.k_max, rng);
    TrialResult r;
    r.x = traj.agreement_values;
    for (int k = 0; k < traj.length(); ++k) {
        if (traj.agreement_log10[static_cast<std::size_t>(k)] > 100.0) {
            r.saturated_at = k;
            break;
        }
    }
    return r;
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

} // namespace

MomentSeries estimate_moments(const ExperimentConfig& cfg) {
    if (cfg.trials < 1) throw InvalidInputError("trials must be >= 1");
    if (cfg.k_max < 1) throw InvalidInputError("k_max must be >= 1");

    const int len = cfg.k_max + 1;
    std::vector<double> sum_x(static_cast<std::size_t>(len), 0.0);
    std::vector<double> sum_x2(static_cast<std::size_t>(len), 0.0);
    std::vector<double> sum_x4(static_cast<std::size_t>(len), 0.0);
    std::vector<long long> alive(static_cast<std::size_t>(len), 0);

    const int threads = resolve_threads(cfg.threads);
    const int batch = std::max(threads * 8, 32);
    std::vector<TrialResult> results(static_cast<std::size_t>(batch));

    for (int start = 0; start < cfg.trials; start += batch) {
        const int count = std::min(batch, cfg.trials - start);
        if (threads == 1 || count == 1) {
            for (int t = 0; t < count; ++t)
                results[static_cast<std::size_t>(t)] =
                    run_trial(cfg, static_cast<std::uint64_t>(start + t));
        } else {
            std::vector<std::thread> pool;
            pool.reserve(static_cast<std::size_t>(threads));
            for (int w = 0; w < threads; ++w) {
                pool.emplace_back([&, w] {
                    for (int t = w; t < count; t += threads)
                        results[static_cast<std::size_t>(t)] =
                            run_trial(cfg, static_cast<std::uint64_t>(start + t));
                });
            }
            for (auto& th : pool) th.join();
        }
        // Reduction in trial order: results are bit-identical regardless of
        // the thread count.
        for (int t = 0; t < count; ++t) {
            const TrialResult& r = results[static_cast<std::size_t>(t)];
            const int cut = r.saturated_at < 0 ? len : r.saturated_at;
            for (int k = 0; k < cut; ++k) {
                const double x = r.x[static_cast<std::size_t>(k)];
                const double x2 = x * x;
                sum_x[static_cast<std::size_t>(k)] += x;
                sum_x2[static_cast<std::size_t>(k)] += x2;
                sum_x4[static_cast<std::size_t>(k)] += x2 * x2;
                ++alive[static_cast<std::size_t>(k)];
            }
        }
    }

    MomentSeries series;
    series.trials_used = cfg.trials;
    series.mean_X.resize(static_cast<std::size_t>(len));
    series.mean_X2.resize(static_cast<std::size_t>(len));
    series.stderr_X2.resize(static_cast<std::size_t>(len));
    series.saturated_fraction.resize(static_cast<std::size_t>(len));
    for (int k = 0; k < len; ++k) {
        const auto idx = static_cast<std::size_t>(k);
        const long long c = alive[idx];
        series.saturated_fraction[idx] =
            static_cast<double>(cfg.trials - c) / static_cast<double>(cfg.trials);
        if (c == 0) {
            series.mean_X[idx] = kInf;
            series.mean_X2[idx] = kInf;
            series.stderr_X2[idx] = 0.0;
            continue;
        }
        const double m1 = sum_x[idx] / static_cast<double>(c);
        const double m2 = sum_x2[idx] / static_cast<double>(c);
        series.mean_X[idx] = m1;
        series.mean_X2[idx] = m2;
        if (c > 1) {
            const double var =
                std::max(0.0, (sum_x4[idx] - static_cast<double>(c) * m2 * m2) /
                                  static_cast<double>(c - 1));
            series.stderr_X2[idx] = std::sqrt(var / static_cast<double>(c));
        } else {
            series.stderr_X2[idx] = 0.0;
        }
    }
    return series;
}

double empirical_threshold(const DirectedGraph& g, const RandomModel& model,
                           const std::vector<double>& tau_grid, const ExperimentConfig& base) {
    if (tau_grid.size() < 2) throw InvalidInputError("tau grid needs at least 2 points");
    if (!std::is_sorted(tau_grid.begin(), tau_grid.end()))
        throw InvalidInputError("tau grid must be sorted ascending");

    auto diverging = [&](double tau) {
        ExperimentConfig cfg = base;
        cfg.system.graph = g;
        cfg.system.model = model;
        cfg.system.tau = TauSchedule::constant(tau);
        const MomentSeries s = estimate_moments(cfg);

        const int len = s.length();
        const int from = len / 2;
        for (int k = from; k < len; ++k)
            if (s.saturated_fraction[static_cast<std::size_t>(k)] > 0.0) return true;

        // OLS slope of log(mean_X2) over the last half; diverging when
        // positive at two standard errors.
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int count = 0;
        for (int k = from; k < len; ++k) {
            const double y = s.mean_X2[static_cast<std::size_t>(k)];
            if (!(y > 0.0) || !std::isfinite(y)) continue;
            const double lx = static_cast<double>(k);
            const double ly = std::log(y);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
            ++count;
        }
        if (count < 3) return false; // collapsed to exact consensus
        const double denom = sxx - sx * sx / count;
        if (denom <= 0.0) return false;
        const double slope = (sxy - sx * sy / count) / denom;
        // Residual variance for the slope standard error.
        const double intercept = (sy - slope * sx) / count;
        double rss = 0.0;
        for (int k = from; k < len; ++k) {
            const double y = s.mean_X2[static_cast<std::size_t>(k)];
            if (!(y > 0.0) || !std::isfinite(y)) continue;
            const double res = std::log(y) - (intercept + slope * k);
            rss += res * res;
        }
        if (count < 4) return slope > 0.0;
        const double se = std::sqrt(rss / (count - 2) / denom);
        return slope > 2.0 * se;
    };

    bool any_converging = false;
    for (double tau : tau_grid) {
        if (diverging(tau)) {
            if (!any_converging)
                throw InvalidInputError("entire tau grid diverges; widen the grid downward");
            return tau;
        }
        any_converging = true;
    }
    throw InvalidInputError("entire tau grid converges; widen the grid upward");
}

std::vector<SweepRow> sweep_N(GraphFamily family, int n_from, int n_to, const RandomModel& model,
                              double tol) {
    if (n_from < 2 || n_to < n_from) throw InvalidInputError("need 2 <= n_from <= n_to");
    std::vector<SweepRow> rows;
    for (int n = n_from; n <= n_to; ++n) {
        const DirectedGraph g = family == GraphFamily::Cycle ? cycle_graph(n) : complete_graph(n);
        try {
            rows.push_back(SweepRow{n, critical_tau(g, model, tol)});
        } catch (const CapExceededError&) {
            // Size over the enumeration/eigensolve caps: row is absent.
        }
    }
    return rows;
}

void write_moments_csv(std::ostream& out, const MomentSeries& series) {
    out << "k,mean_X,mean_X2,stderr_X2,saturated_fraction\n";
    for (int k = 0; k < series.length(); ++k) {
        const auto idx = static_cast<std::size_t>(k);
        out << k << "," << format_double(series.mean_X[idx]) << ","
            << format_double(series.mean_X2[idx]) << "," << format_double(series.stderr_X2[idx])
            << "," << format_double(series.saturated_fraction[idx]) << "\n";
    }
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows,
                     const RandomModel& model) {
    out << "N,tau_dagger,model,params\n";
    std::string name = "iid";
    std::string params;
    if (const auto* iid = std::get_if<IidModel>(&model)) {
        params = "q=" + format_double(iid->q);
    } else {
        const auto& m = std::get<MarkovModel>(model);
        name = "markov";
        params = "p=" + format_double(m.p) + ";q=" + format_double(m.q);
    }
    for (const SweepRow& row : rows)
        out << row.n << "," << format_double(row.tau_dagger) << "," << name << "," << params
            << "\n";
}

} // namespace consensus

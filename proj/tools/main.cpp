// consensus-lab: analyze and simulate sampled-data consensus over random
// directed networks.
//
// Subcommands: check-graph, analyze, simulate, moments, sweep. See README.md
// for the file formats. Exit codes: 0 ok, 2 invalid input, 3 problem too
// large for the exhaustive caps, 4 analysis inapplicable (no spanning tree,
// or non-complete graph for the Markovian divergence bound).

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "consensus/analysis.hpp"
#include "consensus/dynamics.hpp"
#include "consensus/ensemble.hpp"
#include "consensus/errors.hpp"
#include "consensus/format.hpp"
#include "consensus/graph.hpp"
#include "consensus/montecarlo.hpp"
#include "consensus/rng.hpp"

namespace {

using namespace consensus;

constexpr int kExitOk = 0;
constexpr int kExitInvalidInput = 2;
constexpr int kExitCapExceeded = 3;
constexpr int kExitInapplicable = 4;

RandomModel parse_model(const std::string& text) {
    nlohmann::json j;
    if (!text.empty() && text.front() == '{') {
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw InvalidInputError(std::string("inline model is not valid JSON: ") + e.what());
        }
    } else {
        std::ifstream in(text);
        if (!in) throw InvalidInputError("cannot open model file: " + text);
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw InvalidInputError("model file " + text + " is not valid JSON: " + e.what());
        }
    }
    return model_from_json(j);
}

// --x0 "5,2,1,1" | random:<lo>:<hi> | spread (default). The random variant
// draws once from a stream derived from the run seed.
Eigen::VectorXd parse_x0(const std::string& text, int n, std::uint64_t seed) {
    if (text == "spread") {
        Eigen::VectorXd x(n);
        for (int i = 0; i < n; ++i) x(i) = static_cast<double>(i);
        return x;
    }
    if (text.rfind("random:", 0) == 0) {
        const auto rest = text.substr(7);
        const auto colon = rest.find(':');
        if (colon == std::string::npos)
            throw InvalidInputError("expected --x0 random:<lo>:<hi>");
        double lo = 0, hi = 0;
        try {
            lo = std::stod(rest.substr(0, colon));
            hi = std::stod(rest.substr(colon + 1));
        } catch (const std::exception&) {
            throw InvalidInputError("cannot parse --x0 random bounds: " + text);
        }
        if (!(hi > lo)) throw InvalidInputError("--x0 random needs lo < hi");
        RandomStream rng = RandomStream::derived(seed, std::uint64_t{1} << 63);
        Eigen::VectorXd x(n);
        for (int i = 0; i < n; ++i) x(i) = rng.uniform(lo, hi);
        return x;
    }
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            values.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw InvalidInputError("cannot parse --x0 entry: \"" + item + "\"");
        }
    }
    if (static_cast<int>(values.size()) != n)
        throw InvalidInputError("--x0 has " + std::to_string(values.size()) +
                                " entries but the graph has " + std::to_string(n) + " nodes");
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x(i) = values[static_cast<std::size_t>(i)];
    return x;
}

int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("CONSENSUS_LAB_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0) return v;
        } catch (const std::exception&) {
            throw InvalidInputError("CONSENSUS_LAB_THREADS is not a positive integer");
        }
    }
    return 0; // library default: hardware concurrency
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInputError("cannot open output file: " + path);
    out << content;
    if (!out) throw InvalidInputError("failed writing output file: " + path);
}

void require_format(const std::string& format, const std::string& expected,
                    const std::string& command) {
    if (!format.empty() && format != expected)
        throw InvalidInputError(command + " only supports --format " + expected);
}

struct CommonArgs {
    std::string graph_path;
    std::string model_text;
    std::string out_path;
    std::string format; // empty = per-command default
    std::string tau_text = "1.0";
    std::string x0_text = "spread";
    double tol = kDefaultTauTol;
    int trials = 10000;
    int k_max = 150;
    std::uint64_t seed = 0;
    int threads = 0;
    bool continuous_access = false;
    bool full_state = false;
    bool skip_as = false;
};

int run_check_graph(const CommonArgs& args) {
    const DirectedGraph g = load_graph_file(args.graph_path);
    std::cout << "N = " << g.n << ", |E| = " << g.arc_count() << "\n";
    std::cout << "spanning tree: " << (has_spanning_tree(g) ? "yes" : "no");
    if (g.arc_count() <= kEnumerationArcCap)
        std::cout << ", M = " << (std::uint64_t{1} << g.arc_count());
    else
        std::cout << ", M = 2^" << g.arc_count() << " (exceeds enumeration cap)";
    std::cout << "\n";
    return kExitOk;
}

int run_analyze(const CommonArgs& args) {
    require_format(args.format, "json", "analyze");
    const DirectedGraph g = load_graph_file(args.graph_path);
    const RandomModel model = parse_model(args.model_text);
    AnalyzeOptions options;
    options.tol = args.tol;
    options.continuous_access = args.continuous_access;
    options.skip_as_bounds = args.skip_as;
    const AnalysisReport report = analyze(g, model, options);
    write_file(args.out_path, report_to_json(report, g, model).dump(2) + "\n");
    return kExitOk;
}

int run_simulate(const CommonArgs& args) {
    require_format(args.format, "csv", "simulate");
    SystemConfig config;
    config.graph = load_graph_file(args.graph_path);
    config.model = parse_model(args.model_text);
    config.tau = parse_tau_schedule(args.tau_text);
    config.continuous_access = args.continuous_access;
    const Eigen::VectorXd x0 = parse_x0(args.x0_text, config.graph.n, args.seed);

    RandomStream rng = RandomStream::derived(args.seed, 0);
    const Trajectory traj = simulate(config, x0, args.k_max, rng);
    std::ostringstream out;
    write_trajectory_csv(out, traj, args.full_state);
    write_file(args.out_path, out.str());
    return kExitOk;
}

int run_moments(const CommonArgs& args) {
    require_format(args.format, "csv", "moments");
    ExperimentConfig cfg;
    cfg.system.graph = load_graph_file(args.graph_path);
    cfg.system.model = parse_model(args.model_text);
    cfg.system.tau = parse_tau_schedule(args.tau_text);
    cfg.system.continuous_access = args.continuous_access;
    cfg.x0 = parse_x0(args.x0_text, cfg.system.graph.n, args.seed);
    cfg.trials = args.trials;
    cfg.k_max = args.k_max;
    cfg.root_seed = args.seed;
    cfg.threads = resolve_threads(args.threads);

    const MomentSeries series = estimate_moments(cfg);
    std::ostringstream out;
    write_moments_csv(out, series);
    write_file(args.out_path, out.str());
    return kExitOk;
}

int run_sweep(const CommonArgs& args, const std::string& family_name, int n_from, int n_to) {
    require_format(args.format, "csv", "sweep");
    GraphFamily family;
    if (family_name == "cycle")
        family = GraphFamily::Cycle;
    else if (family_name == "complete")
        family = GraphFamily::Complete;
    else
        throw InvalidInputError("--family must be cycle or complete");
    const RandomModel model = parse_model(args.model_text);
    const auto rows = sweep_N(family, n_from, n_to, model, args.tol);
    std::ostringstream out;
    write_sweep_csv(out, rows, model);
    write_file(args.out_path, out.str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sampled-data consensus over random directed networks"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string family = "cycle";
    int n_from = 2;
    int n_to = 6;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--graph", args.graph_path, "graph JSON file")->required();
        cmd->add_option("--out", args.out_path, "output file")->required();
        cmd->add_option("--format", args.format, "output format (csv|json)");
    };

    CLI::App* check = app.add_subcommand("check-graph", "validate a graph file and print facts");
    check->add_option("--graph", args.graph_path, "graph JSON file")->required();

    CLI::App* analyze_cmd =
        app.add_subcommand("analyze", "thresholds, spectral curve, divergence bounds");
    add_common(analyze_cmd);
    analyze_cmd->add_option("--model", args.model_text, "model JSON (inline or path)")->required();
    analyze_cmd->add_option("--tol", args.tol, "bisection tolerance");
    analyze_cmd->add_flag("--continuous-access", args.continuous_access,
                          "use the 1 - e^(-tau) update weight");
    analyze_cmd->add_flag("--skip-as", args.skip_as, "skip the almost-sure divergence bounds");

    CLI::App* simulate_cmd = app.add_subcommand("simulate", "one seeded trajectory to CSV");
    add_common(simulate_cmd);
    simulate_cmd->add_option("--model", args.model_text, "model JSON (inline or path)")->required();
    simulate_cmd->add_option("--tau", args.tau_text, "tau or comma-separated schedule");
    simulate_cmd->add_option("--kmax", args.k_max, "number of steps");
    simulate_cmd->add_option("--seed", args.seed, "root seed");
    simulate_cmd->add_option("--x0", args.x0_text, "initial state: list | random:lo:hi | spread");
    simulate_cmd->add_flag("--full-state", args.full_state, "append x_1..x_N columns");
    simulate_cmd->add_flag("--continuous-access", args.continuous_access,
                           "use the 1 - e^(-tau) update weight");

    CLI::App* moments_cmd =
        app.add_subcommand("moments", "E[X(k)], E[X^2(k)] over seeded trials to CSV");
    add_common(moments_cmd);
    moments_cmd->add_option("--model", args.model_text, "model JSON (inline or path)")->required();
    moments_cmd->add_option("--tau", args.tau_text, "tau or comma-separated schedule");
    moments_cmd->add_option("--trials", args.trials, "number of Monte Carlo trials");
    moments_cmd->add_option("--kmax", args.k_max, "horizon");
    moments_cmd->add_option("--seed", args.seed, "root seed");
    moments_cmd->add_option("--x0", args.x0_text, "initial state: list | random:lo:hi | spread");
    moments_cmd->add_option("--threads", args.threads, "worker cap (default: all cores)");
    moments_cmd->add_flag("--continuous-access", args.continuous_access,
                          "use the 1 - e^(-tau) update weight");

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "critical tau per network size to CSV");
    sweep_cmd->add_option("--family", family, "graph family: cycle|complete")->required();
    sweep_cmd->add_option("--n-from", n_from, "smallest network size")->required();
    sweep_cmd->add_option("--n-to", n_to, "largest network size")->required();
    sweep_cmd->add_option("--model", args.model_text, "model JSON (inline or path)")->required();
    sweep_cmd->add_option("--tol", args.tol, "bisection tolerance");
    sweep_cmd->add_option("--out", args.out_path, "output file")->required();
    sweep_cmd->add_option("--format", args.format, "output format (csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitInvalidInput;
    }

    try {
        if (check->parsed()) return run_check_graph(args);
        if (analyze_cmd->parsed()) return run_analyze(args);
        if (simulate_cmd->parsed()) return run_simulate(args);
        if (moments_cmd->parsed()) return run_moments(args);
        if (sweep_cmd->parsed()) return run_sweep(args, family, n_from, n_to);
    } catch (const InvalidInputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalidInput;
    } catch (const CapExceededError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCapExceeded;
    } catch (const InapplicableError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInapplicable;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}

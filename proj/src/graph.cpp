#include "consensus/graph.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "consensus/errors.hpp"

namespace consensus {

DirectedGraph build_graph(int n, const std::vector<std::pair<int, int>>& arcs_one_based) {
    if (n < 2) throw InvalidInputError("graph needs at least 2 nodes, got " + std::to_string(n));

    DirectedGraph g;
    g.n = n;
    g.arcs.reserve(arcs_one_based.size());
    for (const auto& [j, i] : arcs_one_based) {
        if (j < 1 || j > n || i < 1 || i > n)
            throw InvalidInputError("arc (" + std::to_string(j) + "," + std::to_string(i) +
                                    ") out of range for n=" + std::to_string(n));
        if (j == i)
            throw InvalidInputError("self-loop (" + std::to_string(j) + "," + std::to_string(i) +
                                    ") is not allowed");
        g.arcs.push_back(Arc{j - 1, i - 1});
    }
    std::sort(g.arcs.begin(), g.arcs.end());
    if (std::adjacent_find(g.arcs.begin(), g.arcs.end()) != g.arcs.end())
        throw InvalidInputError("duplicate arc in arc list");
    return g;
}

DirectedGraph cycle_graph(int n) {
    std::vector<std::pair<int, int>> arcs;
    arcs.reserve(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) arcs.emplace_back(i, i % n + 1);
    if (n == 2) arcs = {{1, 2}, {2, 1}};
    return build_graph(n, arcs);
}

DirectedGraph complete_graph(int n) {
    std::vector<std::pair<int, int>> arcs;
    arcs.reserve(static_cast<std::size_t>(n) * (n - 1));
    for (int j = 1; j <= n; ++j)
        for (int i = 1; i <= n; ++i)
            if (i != j) arcs.emplace_back(j, i);
    return build_graph(n, arcs);
}

bool is_complete(const DirectedGraph& g) {
    return g.arc_count() == g.n * (g.n - 1);
}

Eigen::MatrixXd laplacian(const DirectedGraph& g) {
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(g.n, g.n);
    for (const Arc& a : g.arcs) {
        L(a.dst, a.src) -= 1.0;
        L(a.dst, a.dst) += 1.0;
    }
    return L;
}

Eigen::MatrixXd subgraph_laplacian(const DirectedGraph& g, std::uint64_t mask) {
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(g.n, g.n);
    for (int b = 0; b < g.arc_count(); ++b) {
        if (!(mask >> b & 1)) continue;
        const Arc& a = g.arcs[static_cast<std::size_t>(b)];
        L(a.dst, a.src) -= 1.0;
        L(a.dst, a.dst) += 1.0;
    }
    return L;
}

bool has_spanning_tree(const DirectedGraph& g) {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(g.n));
    for (const Arc& a : g.arcs) out[static_cast<std::size_t>(a.src)].push_back(a.dst);

    std::vector<char> seen(static_cast<std::size_t>(g.n));
    std::vector<int> stack;
    for (int root = 0; root < g.n; ++root) {
        std::fill(seen.begin(), seen.end(), 0);
        stack.assign(1, root);
        seen[static_cast<std::size_t>(root)] = 1;
        int count = 1;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (int w : out[static_cast<std::size_t>(v)]) {
                if (!seen[static_cast<std::size_t>(w)]) {
                    seen[static_cast<std::size_t>(w)] = 1;
                    ++count;
                    stack.push_back(w);
                }
            }
        }
        if (count == g.n) return true;
    }
    return false;
}

std::vector<Eigen::MatrixXd> enumerate_subgraphs(const DirectedGraph& g) {
    const int e = g.arc_count();
    if (e > kEnumerationArcCap)
        throw CapExceededError("subgraph enumeration needs 2^" + std::to_string(e) +
                               " Laplacians; cap is 2^" + std::to_string(kEnumerationArcCap));
    const std::uint64_t m = std::uint64_t{1} << e;
    std::vector<Eigen::MatrixXd> subgraphs;
    subgraphs.reserve(m);
    for (std::uint64_t mask = 0; mask < m; ++mask)
        subgraphs.push_back(subgraph_laplacian(g, mask));
    return subgraphs;
}

DirectedGraph graph_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("n") || !j.contains("arcs"))
        throw InvalidInputError("graph JSON must be an object with \"n\" and \"arcs\"");
    if (!j["n"].is_number_integer()) throw InvalidInputError("graph field \"n\" must be an integer");
    int n = j["n"].get<int>();
    std::vector<std::pair<int, int>> arcs;
    for (const auto& entry : j["arcs"]) {
        if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number_integer() ||
            !entry[1].is_number_integer())
            throw InvalidInputError("each arc must be a [j, i] integer pair");
        arcs.emplace_back(entry[0].get<int>(), entry[1].get<int>());
    }
    return build_graph(n, arcs);
}

nlohmann::json graph_to_json(const DirectedGraph& g) {
    nlohmann::json arcs = nlohmann::json::array();
    for (const Arc& a : g.arcs) arcs.push_back({a.src + 1, a.dst + 1});
    return nlohmann::json{{"n", g.n}, {"arcs", arcs}};
}

DirectedGraph load_graph_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("cannot open graph file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInputError("graph file " + path + " is not valid JSON: " + e.what());
    }
    return graph_from_json(j);
}

} // namespace consensus

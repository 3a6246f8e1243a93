#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace consensus {

// A directed communication link. Stored 0-based; (src, dst) means
// information flows from node src to node dst, so dst listens to src.
struct Arc {
    int src = 0;
    int dst = 0;

    friend bool operator==(const Arc& a, const Arc& b) {
        return a.src == b.src && a.dst == b.dst;
    }
    friend bool operator<(const Arc& a, const Arc& b) {
        return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    }
};

// Underlying interaction graph. Arcs are kept in canonical order
// (lexicographic by (src, dst)); the position of an arc in `arcs` is its bit
// in every subgraph bitmask used downstream, so the ordering is part of the
// contract.
struct DirectedGraph {
    int n = 0;
    std::vector<Arc> arcs;

    int arc_count() const { return static_cast<int>(arcs.size()); }
};

// Exhaustive subgraph enumeration materializes 2^|arcs| Laplacians; beyond
// this cap the ensemble analysis is not desk-scale and callers get an
// explicit error instead of an OOM.
inline constexpr int kEnumerationArcCap = 24;

// Simulation stores the realized subgraph per step as a 64-bit mask.
inline constexpr int kSimulationArcCap = 64;

// Validates and canonicalizes. Node indices are 1-based at this boundary
// (matching all external formats). Rejects self-loops, out-of-range indices
// and duplicate arcs.
DirectedGraph build_graph(int n, const std::vector<std::pair<int, int>>& arcs_one_based);

// Directed cycle 1 -> 2 -> ... -> n -> 1. For n == 2 this is the
// bidirectional pair.
DirectedGraph cycle_graph(int n);

// All ordered pairs (j, i), j != i.
DirectedGraph complete_graph(int n);

bool is_complete(const DirectedGraph& g);

// In-degree Laplacian: entry (i, j) is -1 when (j, i) is an arc, the diagonal
// carries the in-degree. Rows sum to zero exactly.
Eigen::MatrixXd laplacian(const DirectedGraph& g);

// Laplacian of the subgraph whose arcs are the set bits of `mask` (bit b set
// <=> arcs[b] present).
Eigen::MatrixXd subgraph_laplacian(const DirectedGraph& g, std::uint64_t mask);

// True iff some node reaches every other node along directed arcs.
bool has_spanning_tree(const DirectedGraph& g);

// All 2^|arcs| subgraph Laplacians in increasing bitmask order; the vector
// index is the bitmask. Throws CapExceededError above kEnumerationArcCap.
std::vector<Eigen::MatrixXd> enumerate_subgraphs(const DirectedGraph& g);

// JSON graph format: {"n": <int>, "arcs": [[j, i], ...]} with 1-based nodes.
DirectedGraph graph_from_json(const nlohmann::json& j);
nlohmann::json graph_to_json(const DirectedGraph& g);
DirectedGraph load_graph_file(const std::string& path);

} // namespace consensus

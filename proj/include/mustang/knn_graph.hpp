#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mustang/errors.hpp"

namespace mustang {

// Directed k-NN graph over one patient's patch embeddings. Edges are
// (src, dst) pairs; features are row-major [num_nodes x feature_dim].
struct PatchGraph {
    int num_nodes = 0;
    int feature_dim = 0;
    std::vector<double> features;
    std::vector<std::pair<int, int>> edges;
    std::vector<int> slide_tag;            // per node, indexes slide_names
    std::vector<std::string> slide_names;  // per tag
    std::vector<int> node_origin;          // row index in the original bag

    int num_edges() const { return static_cast<int>(edges.size()); }
    const double* feature_row(int node) const {
        return features.data() + static_cast<std::size_t>(node) * feature_dim;
    }
};

// Symmetrically normalized adjacency with self-loops. Entries are stored
// per directed orientation, grouped by destination, weight(u,v) equal to
// 1/sqrt(deg_u * deg_v) where deg counts the self-loop.
struct NormalizedAdjacency {
    int num_nodes = 0;
    std::vector<int> src;
    std::vector<int> dst;
    std::vector<double> weight;

    int num_entries() const { return static_cast<int>(src.size()); }
};

struct GraphStats {
    int num_nodes = 0;
    int num_edges = 0;
    int components = 0;
    double slide_mixing = 0.0;  // fraction of edges crossing slides
};

// Each node points to its k nearest distinct neighbours by Euclidean
// distance; ties broken by lower node index, self excluded.
PatchGraph build_knn_graph(const std::vector<double>& features, int num_nodes,
                           int feature_dim, int k);

std::vector<std::vector<int>> weakly_connected_components(const PatchGraph& g);

NormalizedAdjacency normalized_adjacency(const PatchGraph& g);

// Nodes reindexed densely in kept order; an edge survives iff both
// endpoints are kept.
PatchGraph induced_subgraph(const PatchGraph& g, const std::vector<int>& kept);

// Appends one (i, i) edge per node. Input must be self-loop free.
PatchGraph add_self_loops(const PatchGraph& g);

// Fruchterman-Reingold force layout on the unit square, ideal edge
// length 1/sqrt(N), linearly cooling displacement cap. Analysis only.
std::vector<std::pair<double, double>> spring_layout(const PatchGraph& g,
                                                     int iterations,
                                                     std::uint64_t seed);

GraphStats graph_stats(const PatchGraph& g);

// Analysis exports: `src dst` edge lines and a per-node CSV
// (node_id,slide_tag,component,x,y).
void write_edge_list(const PatchGraph& g, const std::string& path);
void write_node_table(const PatchGraph& g,
                      const std::vector<std::pair<double, double>>& positions,
                      const std::string& path);

}  // namespace mustang

#include "mustang/knn_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

namespace mustang {

namespace {

class UnionFind {
  public:
    explicit UnionFind(int n) : parent_(n), count_(n) {
        std::iota(parent_.begin(), parent_.end(), 0);
    }

    int find(int x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a > b) std::swap(a, b);  // smaller index becomes the root
        parent_[b] = a;
        --count_;
    }

    int count() const { return count_; }

  private:
    std::vector<int> parent_;
    int count_;
};

std::vector<int> component_of(const PatchGraph& g) {
    UnionFind uf(g.num_nodes);
    for (const auto& [u, v] : g.edges) uf.unite(u, v);
    std::vector<int> root(g.num_nodes);
    std::vector<int> dense(g.num_nodes, -1);
    int next = 0;
    for (int i = 0; i < g.num_nodes; ++i) {
        int r = uf.find(i);
        if (dense[r] < 0) dense[r] = next++;
        root[i] = dense[r];
    }
    return root;
}

double sq_dist(const double* a, const double* b, int f) {
    double acc = 0.0;
    for (int i = 0; i < f; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

}  // namespace

PatchGraph build_knn_graph(const std::vector<double>& features, int num_nodes,
                           int feature_dim, int k) {
    if (num_nodes == 0) throw ContractError("build_knn_graph: empty bag");
    if (num_nodes < 0 || feature_dim < 1)
        throw ContractError("build_knn_graph: invalid dimensions");
    if (k < 1) throw ContractError("build_knn_graph: k must be >= 1");
    if (features.size() != static_cast<std::size_t>(num_nodes) * feature_dim)
        throw ShapeError("build_knn_graph: feature buffer size mismatch");

    PatchGraph g;
    g.num_nodes = num_nodes;
    g.feature_dim = feature_dim;
    g.features = features;
    g.slide_tag.assign(num_nodes, 0);
    g.slide_names = {"0"};
    g.node_origin.resize(num_nodes);
    std::iota(g.node_origin.begin(), g.node_origin.end(), 0);

    const int n = num_nodes;
    const int deg = std::min(k, n - 1);
    if (deg == 0) return g;
    g.edges.reserve(static_cast<std::size_t>(n) * deg);

    // Exact O(N^2) search. For moderate N keep the full symmetric distance
    // matrix so each pair is evaluated once; fall back to per-row passes
    // when the matrix would not fit comfortably in memory.
    const bool full_matrix = static_cast<std::size_t>(n) * n <= (1u << 24);
    std::vector<double> dist;
    if (full_matrix) {
        dist.assign(static_cast<std::size_t>(n) * n, 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const double d =
                    sq_dist(g.feature_row(i), g.feature_row(j), feature_dim);
                dist[static_cast<std::size_t>(i) * n + j] = d;
                dist[static_cast<std::size_t>(j) * n + i] = d;
            }
    }

    std::vector<int> order(n);
    std::vector<double> row;
    for (int i = 0; i < n; ++i) {
        const double* di;
        if (full_matrix) {
            di = dist.data() + static_cast<std::size_t>(i) * n;
        } else {
            row.assign(n, 0.0);
            for (int j = 0; j < n; ++j)
                if (j != i)
                    row[j] = sq_dist(g.feature_row(i), g.feature_row(j), feature_dim);
            di = row.data();
        }
        int m = 0;
        for (int j = 0; j < n; ++j)
            if (j != i) order[m++] = j;
        std::partial_sort(order.begin(), order.begin() + deg, order.begin() + m,
                          [di](int a, int b) {
                              if (di[a] != di[b]) return di[a] < di[b];
                              return a < b;
                          });
        for (int j = 0; j < deg; ++j) g.edges.emplace_back(i, order[j]);
    }
    return g;
}

std::vector<std::vector<int>> weakly_connected_components(const PatchGraph& g) {
    const std::vector<int> comp = component_of(g);
    int count = 0;
    for (int c : comp) count = std::max(count, c + 1);
    std::vector<std::vector<int>> out(count);
    for (int i = 0; i < g.num_nodes; ++i) out[comp[i]].push_back(i);
    return out;
}

NormalizedAdjacency normalized_adjacency(const PatchGraph& g) {
    const int n = g.num_nodes;
    // undirected support
    std::vector<std::pair<int, int>> und;
    und.reserve(g.edges.size());
    for (const auto& [u, v] : g.edges)
        if (u != v) und.emplace_back(std::min(u, v), std::max(u, v));
    std::sort(und.begin(), und.end());
    und.erase(std::unique(und.begin(), und.end()), und.end());

    std::vector<std::vector<int>> nbrs(n);
    for (const auto& [u, v] : und) {
        nbrs[u].push_back(v);
        nbrs[v].push_back(u);
    }
    std::vector<double> deg(n);
    for (int i = 0; i < n; ++i) {
        std::sort(nbrs[i].begin(), nbrs[i].end());
        deg[i] = static_cast<double>(nbrs[i].size()) + 1.0;  // self-loop
    }

    NormalizedAdjacency adj;
    adj.num_nodes = n;
    adj.src.reserve(2 * und.size() + n);
    for (int u = 0; u < n; ++u) {
        bool self_done = false;
        auto push = [&](int v) {
            adj.src.push_back(v);
            adj.dst.push_back(u);
            adj.weight.push_back(1.0 / std::sqrt(deg[u] * deg[v]));
        };
        for (int v : nbrs[u]) {
            if (!self_done && u < v) {
                push(u);
                self_done = true;
            }
            push(v);
        }
        if (!self_done) push(u);
    }
    return adj;
}

PatchGraph induced_subgraph(const PatchGraph& g, const std::vector<int>& kept) {
    if (kept.empty()) throw ContractError("induced_subgraph: empty kept set");
    std::vector<int> new_id(g.num_nodes, -1);
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const int v = kept[i];
        if (v < 0 || v >= g.num_nodes)
            throw ContractError("induced_subgraph: node index out of range");
        if (new_id[v] != -1)
            throw ContractError("induced_subgraph: duplicate kept index");
        new_id[v] = static_cast<int>(i);
    }

    PatchGraph out;
    out.num_nodes = static_cast<int>(kept.size());
    out.feature_dim = g.feature_dim;
    out.features.resize(kept.size() * static_cast<std::size_t>(g.feature_dim));
    out.slide_tag.resize(kept.size());
    out.node_origin.resize(kept.size());
    out.slide_names = g.slide_names;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        std::copy(g.feature_row(kept[i]), g.feature_row(kept[i]) + g.feature_dim,
                  out.features.begin() + i * g.feature_dim);
        out.slide_tag[i] = g.slide_tag.empty() ? 0 : g.slide_tag[kept[i]];
        out.node_origin[i] = g.node_origin.empty() ? kept[i] : g.node_origin[kept[i]];
    }
    for (const auto& [u, v] : g.edges)
        if (new_id[u] != -1 && new_id[v] != -1)
            out.edges.emplace_back(new_id[u], new_id[v]);
    return out;
}

PatchGraph add_self_loops(const PatchGraph& g) {
    PatchGraph out = g;
    out.edges.reserve(g.edges.size() + g.num_nodes);
    for (int i = 0; i < g.num_nodes; ++i) out.edges.emplace_back(i, i);
    return out;
}

std::vector<std::pair<double, double>> spring_layout(const PatchGraph& g,
                                                     int iterations,
                                                     std::uint64_t seed) {
    const int n = g.num_nodes;
    if (n < 1) throw ContractError("spring_layout: empty graph");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<std::pair<double, double>> pos(n);
    for (auto& [x, y] : pos) {
        x = uni(rng);
        y = uni(rng);
    }
    if (n == 1) return pos;

    std::vector<std::pair<int, int>> und;
    und.reserve(g.edges.size());
    for (const auto& [u, v] : g.edges)
        if (u != v) und.emplace_back(std::min(u, v), std::max(u, v));
    std::sort(und.begin(), und.end());
    und.erase(std::unique(und.begin(), und.end()), und.end());

    const double ideal = 1.0 / std::sqrt(static_cast<double>(n));
    double temp = 0.1;
    const double cool = temp / (iterations + 1);
    const double eps = 1e-9;

    std::vector<std::pair<double, double>> disp(n);
    for (int it = 0; it < iterations; ++it) {
        std::fill(disp.begin(), disp.end(), std::make_pair(0.0, 0.0));
        for (int u = 0; u < n; ++u)
            for (int v = u + 1; v < n; ++v) {
                double dx = pos[u].first - pos[v].first;
                double dy = pos[u].second - pos[v].second;
                double d = std::max(std::sqrt(dx * dx + dy * dy), eps);
                const double f = ideal * ideal / d;  // repulsion
                dx /= d;
                dy /= d;
                disp[u].first += dx * f;
                disp[u].second += dy * f;
                disp[v].first -= dx * f;
                disp[v].second -= dy * f;
            }
        for (const auto& [u, v] : und) {
            double dx = pos[u].first - pos[v].first;
            double dy = pos[u].second - pos[v].second;
            double d = std::max(std::sqrt(dx * dx + dy * dy), eps);
            const double f = d * d / ideal;  // attraction
            dx /= d;
            dy /= d;
            disp[u].first -= dx * f;
            disp[u].second -= dy * f;
            disp[v].first += dx * f;
            disp[v].second += dy * f;
        }
        for (int u = 0; u < n; ++u) {
            const double len = std::sqrt(disp[u].first * disp[u].first +
                                         disp[u].second * disp[u].second);
            if (len <= eps) continue;
            const double step = std::min(len, temp);
            pos[u].first += disp[u].first / len * step;
            pos[u].second += disp[u].second / len * step;
        }
        temp = std::max(temp - cool, 0.0);
    }
    return pos;
}

GraphStats graph_stats(const PatchGraph& g) {
    GraphStats s;
    s.num_nodes = g.num_nodes;
    s.num_edges = g.num_edges();
    s.components = static_cast<int>(weakly_connected_components(g).size());
    if (!g.edges.empty() && !g.slide_tag.empty()) {
        int crossing = 0;
        for (const auto& [u, v] : g.edges)
            if (g.slide_tag[u] != g.slide_tag[v]) ++crossing;
        s.slide_mixing = static_cast<double>(crossing) / g.num_edges();
    }
    return s;
}

void write_edge_list(const PatchGraph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (const auto& [u, v] : g.edges) out << u << " " << v << "\n";
}

void write_node_table(const PatchGraph& g,
                      const std::vector<std::pair<double, double>>& positions,
                      const std::string& path) {
    if (positions.size() != static_cast<std::size_t>(g.num_nodes))
        throw ShapeError("write_node_table: positions size mismatch");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    const std::vector<int> comp = component_of(g);
    out << "node_id,slide_tag,component,x,y\n";
    char buf[64];
    for (int i = 0; i < g.num_nodes; ++i) {
        const int tag = g.slide_tag.empty() ? 0 : g.slide_tag[i];
        const std::string& name =
            tag < static_cast<int>(g.slide_names.size()) ? g.slide_names[tag]
                                                         : std::to_string(tag);
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f", positions[i].first,
                      positions[i].second);
        out << i << "," << name << "," << comp[i] << "," << buf << "\n";
    }
}

}  // namespace mustang

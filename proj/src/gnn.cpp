#include "mustang/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mustang {

namespace {

SegmentIndex by_destination(const std::vector<int>& dst, int num_nodes) {
    return SegmentIndex{dst, num_nodes};
}

void check_self_loops(const PatchGraph& g) {
    std::vector<char> has_loop(g.num_nodes, 0);
    for (const auto& [u, v] : g.edges)
        if (u == v) has_loop[u] = 1;
    for (int i = 0; i < g.num_nodes; ++i)
        if (!has_loop[i])
            throw ContractError("gat_forward: node " + std::to_string(i) +
                                " has no self-loop");
}

}  // namespace

int pooled_count(double ratio, int n) {
    if (!(ratio > 0.0) || ratio > 1.0)
        throw ContractError("pooling ratio must lie in (0, 1]");
    const int count = static_cast<int>(std::ceil(ratio * n - 1e-9));
    return std::clamp(count, 1, n);
}

std::vector<int> top_rank(const std::vector<double>& scores, int count) {
    std::vector<int> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + count, idx.end(),
                      [&scores](int a, int b) {
                          if (scores[a] != scores[b]) return scores[a] > scores[b];
                          return a < b;
                      });
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    return idx;
}

Value propagate(const NormalizedAdjacency& adj, const Value& x) {
    if (x.rows() != adj.num_nodes)
        throw ShapeError("propagate: feature rows do not match graph nodes");
    const Value w = Value::from_data({adj.num_entries()}, adj.weight);
    const Value gathered = gather_rows(x, adj.src);
    return segment_sum(row_scale(gathered, w), by_destination(adj.dst, adj.num_nodes));
}

Value gat_forward(const PatchGraph& g, const Value& x, const GatLayerParams& params) {
    if (x.rows() != g.num_nodes)
        throw ShapeError("gat_forward: feature rows do not match graph nodes");
    if (params.heads() < 1) throw ContractError("gat_forward: needs >= 1 head");
    check_self_loops(g);

    const int e = g.num_edges();
    std::vector<int> srcs(e), dsts(e);
    for (int i = 0; i < e; ++i) {
        srcs[i] = g.edges[i].first;
        dsts[i] = g.edges[i].second;
    }
    const SegmentIndex seg = by_destination(dsts, g.num_nodes);

    const Value h = matmul(x, params.weight);
    const Value h_src = gather_rows(h, srcs);
    const Value h_dst = gather_rows(h, dsts);
    // score for edge v->u is a^T [W h_u (+) W h_v], u the aggregating node
    const Value pairs = concat({h_dst, h_src}, 1);

    Value sum;
    for (const Value& a : params.attn) {
        const Value e_scores =
            reshape(leaky_relu(matmul(pairs, a)), {e});
        const Value alpha = segment_softmax(e_scores, seg);
        const Value head = segment_sum(row_scale(h_src, alpha), seg);
        sum = sum.defined() ? add(sum, head) : head;
    }
    return params.heads() == 1 ? sum : scale(sum, 1.0 / params.heads());
}

Value gcn_forward(const NormalizedAdjacency& adj, const Value& x, const Value& weight) {
    return matmul(propagate(adj, x), weight);
}

PoolResult sagpool(const PatchGraph& g, const Value& x, const SagPoolParams& params) {
    if (g.num_nodes < 1) throw ContractError("sagpool: empty graph");
    const NormalizedAdjacency adj = normalized_adjacency(g);
    const Value z = tanh_(propagate(adj, matmul(x, params.theta_att)));  // [N x 1]

    const int count = pooled_count(params.ratio, g.num_nodes);
    const std::vector<int> kept = top_rank(z.data(), count);

    PoolResult out;
    out.kept = kept;
    out.scores = z;
    out.graph = induced_subgraph(g, kept);
    const Value gate = reshape(gather_rows(z, kept), {count});
    out.features = row_scale(gather_rows(x, kept), gate);
    return out;
}

PoolResult topk_pool(const PatchGraph& g, const Value& x, const TopKPoolParams& params) {
    if (g.num_nodes < 1) throw ContractError("topk_pool: empty graph");
    const Value norm = l2_norm(params.proj);
    if (norm.item() == 0.0)
        throw ContractError("topk_pool: degenerate projection, ||p|| = 0");
    const Value y = matmul(x, div_by_scalar(params.proj, norm));  // [N x 1]

    const int count = pooled_count(params.ratio, g.num_nodes);
    const std::vector<int> kept = top_rank(y.data(), count);

    PoolResult out;
    out.kept = kept;
    out.scores = y;
    out.graph = induced_subgraph(g, kept);
    const Value gate = reshape(sigmoid(gather_rows(y, kept)), {count});
    out.features = row_scale(gather_rows(x, kept), gate);
    return out;
}

Value readout(const Value& x) {
    if (x.rows() < 1) throw ContractError("readout: empty graph");
    return concat({reduce_mean(x), reduce_max(x)}, 0);
}

Value mlp_forward(const Value& input, const std::vector<MlpLayer>& layers,
                  Activation act) {
    if (layers.empty()) throw ContractError("mlp_forward: no layers");
    if (input.shape().size() != 1)
        throw ShapeError("mlp_forward: expected 1-d input");
    Value x = reshape(input, {1, static_cast<int>(input.numel())});
    for (std::size_t i = 0; i < layers.size(); ++i) {
        x = add_row_bias(matmul(x, layers[i].weight), layers[i].bias);
        if (i + 1 < layers.size()) x = activation(x, act);
    }
    return reshape(x, {x.cols()});
}

}  // namespace mustang

#pragma once

#include <vector>

#include "mustang/knn_graph.hpp"
#include "mustang/tensor.hpp"

namespace mustang {

// One graph-attention layer: a shared projection plus one attention
// vector per head; head outputs are averaged.
struct GatLayerParams {
    Value weight;             // [F_in x F_out]
    std::vector<Value> attn;  // per head, [2*F_out x 1]

    int heads() const { return static_cast<int>(attn.size()); }
};

struct GcnLayerParams {
    Value weight;  // [F_in x F_out]
};

struct SagPoolParams {
    Value theta_att;  // [F x 1]
    double ratio = 0.8;
};

struct TopKPoolParams {
    Value proj;  // [F x 1]
    double ratio = 0.8;
};

struct PoolResult {
    PatchGraph graph;
    Value features;
    std::vector<int> kept;  // ascending original node indices
    Value scores;           // pre-pool node scores [N x 1]
};

// Sparse D^-1/2 (A+I) D^-1/2 * x aggregation (weights are constants).
Value propagate(const NormalizedAdjacency& adj, const Value& x);

// Attention aggregation over the stored directed edges. The graph must
// already carry one self-loop per node.
Value gat_forward(const PatchGraph& g, const Value& x, const GatLayerParams& params);

Value gcn_forward(const NormalizedAdjacency& adj, const Value& x, const Value& weight);

// Scores nodes with a one-parameter graph convolution, keeps the top
// ceil(ratio*N) and gates kept features by their tanh scores.
PoolResult sagpool(const PatchGraph& g, const Value& x, const SagPoolParams& params);

// Projection-score pooling baseline; kept features gated by sigmoid(y).
PoolResult topk_pool(const PatchGraph& g, const Value& x, const TopKPoolParams& params);

// Columnwise mean concatenated with columnwise max.
Value readout(const Value& x);

struct MlpLayer {
    Value weight;
    Value bias;
};

Value mlp_forward(const Value& input, const std::vector<MlpLayer>& layers,
                  Activation act);

// Top `count` indices by score, ties broken by lower index, reported in
// ascending index order.
std::vector<int> top_rank(const std::vector<double>& scores, int count);

// ceil(ratio * n) with a guard against one-ulp float excess.
int pooled_count(double ratio, int n);

}  // namespace mustang

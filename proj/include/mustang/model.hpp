#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "mustang/gnn.hpp"

namespace mustang {

enum class ConvKind { Gat, Gcn };
enum class PoolKind { SagPool, TopK };

struct ModelConfig {
    int input_dim = 1024;
    int hidden_dim = 512;
    int num_blocks = 4;
    int heads = 2;
    double pooling_ratio = 0.8;
    ConvKind conv_kind = ConvKind::Gat;
    PoolKind pool_kind = PoolKind::SagPool;
    std::vector<int> mlp_hidden = {512, 128};  // two hidden widths -> 3 layers
    Activation block_activation = Activation::Relu;

    // {2*hidden*blocks, mlp_hidden..., 2}
    std::vector<int> mlp_dims() const;
    void validate() const;
};

struct BlockParams {
    std::variant<GatLayerParams, GcnLayerParams> conv;
    std::variant<SagPoolParams, TopKPoolParams> pool;
};

struct ModelParams {
    std::vector<BlockParams> blocks;
    std::vector<MlpLayer> mlp;

    // Flat views in a fixed order (blocks first, then MLP).
    std::vector<Value> all() const;
    std::vector<std::pair<std::string, Value>> named_arrays() const;
    std::int64_t total_param_count() const;

    // Deep copy of parameter data (snapshots, checkpoints).
    ModelParams clone() const;
};

// Glorot-uniform weights, zero biases, fully determined by seed.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

struct ForwardResult {
    Value logits;                          // [2]
    std::vector<PatchGraph> block_graphs;  // pooled graph after each block
    std::vector<std::vector<int>> kept;    // kept node indices per block
    std::vector<std::vector<double>> pool_scores;  // pre-pool scores per block
};

// conv -> activation -> pool -> readout per block; readouts concatenated
// into the MLP head.
ForwardResult mustang_forward(const PatchGraph& bag, const ModelParams& params,
                              const ModelConfig& cfg);

struct ResourceEstimate {
    std::uint64_t flops = 0;       // edge_flops + node_flops + head_flops
    std::uint64_t edge_flops = 0;  // proportional to the k-NN edge count
    std::uint64_t node_flops = 0;  // proportional to (pooled) node counts
    std::uint64_t head_flops = 0;  // size-independent: MLP head and readout divides
    std::uint64_t peak_bytes = 0;
};

// Analytic forward-pass cost for an N-node, degree-k input graph. Edge
// survival across pooling is modelled as ratio^2 per block.
ResourceEstimate resource_estimate(int num_nodes, int k, const ModelConfig& cfg);

const char* to_string(ConvKind kind);
const char* to_string(PoolKind kind);
ConvKind conv_kind_from_string(const std::string& s);
PoolKind pool_kind_from_string(const std::string& s);

}  // namespace mustang

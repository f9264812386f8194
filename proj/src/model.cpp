#include "mustang/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace mustang {

namespace {

Value glorot(std::mt19937_64& rng, int rows, int cols) {
    const double bound = std::sqrt(6.0 / (rows + cols));
    std::uniform_real_distribution<double> uni(-bound, bound);
    std::vector<double> data(static_cast<std::size_t>(rows) * cols);
    for (double& v : data) v = uni(rng);
    return Value::from_data({rows, cols}, std::move(data)).set_requires_grad(true);
}

Value zeros_param(std::vector<int> shape) {
    return Value::zeros(std::move(shape)).set_requires_grad(true);
}

Value clone_value(const Value& v) {
    Value out = Value::from_data(v.shape(), v.data());
    out.set_requires_grad(v.requires_grad());
    return out;
}

}  // namespace

std::vector<int> ModelConfig::mlp_dims() const {
    std::vector<int> dims;
    dims.push_back(2 * hidden_dim * num_blocks);
    dims.insert(dims.end(), mlp_hidden.begin(), mlp_hidden.end());
    dims.push_back(2);
    return dims;
}

void ModelConfig::validate() const {
    if (input_dim < 1 || hidden_dim < 1)
        throw ContractError("model config: dimensions must be >= 1");
    if (num_blocks < 1) throw ContractError("model config: num_blocks must be >= 1");
    if (heads < 1) throw ContractError("model config: heads must be >= 1");
    if (!(pooling_ratio > 0.0) || pooling_ratio > 1.0)
        throw ContractError("model config: pooling_ratio must lie in (0, 1]");
    if (mlp_hidden.size() != 2)
        throw ContractError("model config: head must have exactly 3 MLP layers");
    for (int d : mlp_hidden)
        if (d < 1) throw ContractError("model config: MLP widths must be >= 1");
}

std::vector<Value> ModelParams::all() const {
    std::vector<Value> out;
    for (const auto& [name, v] : named_arrays()) out.push_back(v);
    return out;
}

std::vector<std::pair<std::string, Value>> ModelParams::named_arrays() const {
    std::vector<std::pair<std::string, Value>> out;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const std::string prefix = "block" + std::to_string(b);
        if (const auto* gat = std::get_if<GatLayerParams>(&blocks[b].conv)) {
            out.emplace_back(prefix + ".conv.weight", gat->weight);
            for (std::size_t h = 0; h < gat->attn.size(); ++h)
                out.emplace_back(prefix + ".conv.attn" + std::to_string(h),
                                 gat->attn[h]);
        } else {
            out.emplace_back(prefix + ".conv.weight",
                             std::get<GcnLayerParams>(blocks[b].conv).weight);
        }
        if (const auto* sag = std::get_if<SagPoolParams>(&blocks[b].pool)) {
            out.emplace_back(prefix + ".pool.theta", sag->theta_att);
        } else {
            out.emplace_back(prefix + ".pool.proj",
                             std::get<TopKPoolParams>(blocks[b].pool).proj);
        }
    }
    for (std::size_t i = 0; i < mlp.size(); ++i) {
        out.emplace_back("mlp" + std::to_string(i) + ".weight", mlp[i].weight);
        out.emplace_back("mlp" + std::to_string(i) + ".bias", mlp[i].bias);
    }
    return out;
}

std::int64_t ModelParams::total_param_count() const {
    std::int64_t count = 0;
    for (const Value& v : all()) count += static_cast<std::int64_t>(v.numel());
    return count;
}

ModelParams ModelParams::clone() const {
    ModelParams out;
    for (const BlockParams& b : blocks) {
        BlockParams nb;
        if (const auto* gat = std::get_if<GatLayerParams>(&b.conv)) {
            GatLayerParams g;
            g.weight = clone_value(gat->weight);
            for (const Value& a : gat->attn) g.attn.push_back(clone_value(a));
            nb.conv = std::move(g);
        } else {
            nb.conv = GcnLayerParams{
                clone_value(std::get<GcnLayerParams>(b.conv).weight)};
        }
        if (const auto* sag = std::get_if<SagPoolParams>(&b.pool)) {
            nb.pool = SagPoolParams{clone_value(sag->theta_att), sag->ratio};
        } else {
            const auto& tk = std::get<TopKPoolParams>(b.pool);
            nb.pool = TopKPoolParams{clone_value(tk.proj), tk.ratio};
        }
        out.blocks.push_back(std::move(nb));
    }
    for (const MlpLayer& l : mlp)
        out.mlp.push_back({clone_value(l.weight), clone_value(l.bias)});
    return out;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    ModelParams params;
    int fin = cfg.input_dim;
    for (int b = 0; b < cfg.num_blocks; ++b) {
        BlockParams block;
        if (cfg.conv_kind == ConvKind::Gat) {
            GatLayerParams gat;
            gat.weight = glorot(rng, fin, cfg.hidden_dim);
            for (int h = 0; h < cfg.heads; ++h)
                gat.attn.push_back(glorot(rng, 2 * cfg.hidden_dim, 1));
            block.conv = std::move(gat);
        } else {
            block.conv = GcnLayerParams{glorot(rng, fin, cfg.hidden_dim)};
        }
        if (cfg.pool_kind == PoolKind::SagPool) {
            block.pool = SagPoolParams{glorot(rng, cfg.hidden_dim, 1),
                                       cfg.pooling_ratio};
        } else {
            block.pool = TopKPoolParams{glorot(rng, cfg.hidden_dim, 1),
                                        cfg.pooling_ratio};
        }
        params.blocks.push_back(std::move(block));
        fin = cfg.hidden_dim;
    }
    const std::vector<int> dims = cfg.mlp_dims();
    for (std::size_t i = 0; i + 1 < dims.size(); ++i)
        params.mlp.push_back(
            {glorot(rng, dims[i], dims[i + 1]), zeros_param({dims[i + 1]})});
    return params;
}

ForwardResult mustang_forward(const PatchGraph& bag, const ModelParams& params,
                              const ModelConfig& cfg) {
    if (bag.num_nodes < 1) throw ContractError("mustang_forward: empty bag");
    if (bag.feature_dim != cfg.input_dim)
        throw ShapeError("mustang_forward: bag feature dim " +
                         std::to_string(bag.feature_dim) + " != config input dim " +
                         std::to_string(cfg.input_dim));
    if (params.blocks.size() != static_cast<std::size_t>(cfg.num_blocks))
        throw ContractError("mustang_forward: parameter/config block mismatch");

    ForwardResult result;
    PatchGraph g = bag;
    Value x = Value::from_data({bag.num_nodes, bag.feature_dim}, bag.features);
    std::vector<Value> readouts;
    for (const BlockParams& block : params.blocks) {
        Value conv_out;
        if (const auto* gat = std::get_if<GatLayerParams>(&block.conv)) {
            conv_out = gat_forward(add_self_loops(g), x, *gat);
        } else {
            conv_out = gcn_forward(normalized_adjacency(g), x,
                                   std::get<GcnLayerParams>(block.conv).weight);
        }
        x = activation(conv_out, cfg.block_activation);

        PoolResult pooled;
        if (const auto* sag = std::get_if<SagPoolParams>(&block.pool)) {
            pooled = sagpool(g, x, *sag);
        } else {
            pooled = topk_pool(g, x, std::get<TopKPoolParams>(block.pool));
        }
        g = std::move(pooled.graph);
        x = pooled.features;
        result.kept.push_back(std::move(pooled.kept));
        result.pool_scores.push_back(pooled.scores.data());
        result.block_graphs.push_back(g);
        readouts.push_back(readout(x));
    }
    result.logits =
        mlp_forward(concat(readouts, 0), params.mlp, cfg.block_activation);
    return result;
}

ResourceEstimate resource_estimate(int num_nodes, int k, const ModelConfig& cfg) {
    if (num_nodes < 1 || k < 1)
        throw ContractError("resource_estimate: N and k must be >= 1");
    cfg.validate();

    // Mirrors the forward pass op by op with the tensor ops' FLOP
    // accounting (1 multiply-add = 2). Edge survival through pooling is
    // modelled as ratio^2 per block. The edge term is assembled as an
    // integer per-k slope times k, so it is exactly linear in k; node
    // and head tallies are integer-valued sums.
    double edge_slope = 0, node_fl = 0, head_fl = 0, alloc = 0;
    const double h = cfg.hidden_dim;
    const double m = cfg.heads;
    const double r = cfg.pooling_ratio;
    const double k_eff = std::min<double>(k, num_nodes - 1);

    double n = num_nodes;
    double eu = num_nodes;  // surviving k-NN edges per unit of k
    double fin = cfg.input_dim;
    alloc += n * fin;  // input features
    for (int b = 0; b < cfg.num_blocks; ++b) {
        const double n_kept = pooled_count(r, static_cast<int>(std::llround(n)));
        const double e = eu * k_eff;
        if (cfg.conv_kind == ConvKind::Gat) {
            // attention runs over stored edges plus one self-loop per node
            node_fl += 2 * n * fin * h;                       // X * W
            edge_slope += m * eu * (6 * h + 5);               // per-edge attention
            node_fl += m * n * (6 * h + 5);                   // self-loop rows
            node_fl += (m - 1) * n * h + (m > 1 ? n * h : 0);  // head average
            alloc += n * h + 3 * (e + n) * 2 * h +
                     m * ((e + n) * (4 + h) + n * h) + (m > 1 ? m * n * h : 0);
        } else {
            edge_slope += 4 * eu * fin;  // propagate over symmetrized edges
            node_fl += 2 * n * fin;      // propagate self-loops
            node_fl += 2 * n * fin * h;  // aggregate * W
            alloc += 2 * (2 * e + n) * fin + n * fin + n * h;
        }
        node_fl += n * h;  // block activation
        alloc += n * h;

        // pooling score + gating
        node_fl += 2 * n * h;  // X * theta (or X * p_hat)
        if (cfg.pool_kind == PoolKind::SagPool) {
            edge_slope += 4 * eu;  // score propagation over edges
            node_fl += 2 * n;      // score propagation self-loops
            node_fl += n;          // tanh
        } else {
            head_fl += 3 * h + 1;  // projection norm and divide
            node_fl += n_kept;     // sigmoid gate
        }
        node_fl += n_kept * h;  // gate kept rows
        alloc += n + 2 * (2 * e + n) + 3 * n + 2 * n_kept * h + 2 * n_kept;

        // readout on the pooled graph
        node_fl += n_kept * h;
        head_fl += h;  // mean divide
        alloc += 4 * h;

        n = n_kept;
        eu = eu * r * r;
        fin = h;
    }

    const std::vector<int> dims = cfg.mlp_dims();
    alloc += dims[0];
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        head_fl += 2.0 * dims[i] * dims[i + 1] + dims[i + 1];
        if (i + 2 < dims.size()) head_fl += dims[i + 1];
        alloc += 3.0 * dims[i + 1];
    }

    ResourceEstimate est;
    est.edge_flops = static_cast<std::uint64_t>(k_eff) *
                     static_cast<std::uint64_t>(std::llround(edge_slope));
    est.node_flops = static_cast<std::uint64_t>(std::llround(node_fl));
    est.head_flops = static_cast<std::uint64_t>(std::llround(head_fl));
    est.flops = est.edge_flops + est.node_flops + est.head_flops;
    // forward buffers plus same-size gradient buffers, 8 bytes each, and
    // the edge index itself
    const double e0 = static_cast<double>(num_nodes) * k_eff;
    est.peak_bytes = static_cast<std::uint64_t>(std::llround(16 * alloc + 8 * e0));
    return est;
}

const char* to_string(ConvKind kind) {
    return kind == ConvKind::Gat ? "gat" : "gcn";
}

const char* to_string(PoolKind kind) {
    return kind == PoolKind::SagPool ? "sag" : "topk";
}

ConvKind conv_kind_from_string(const std::string& s) {
    if (s == "gat") return ConvKind::Gat;
    if (s == "gcn") return ConvKind::Gcn;
    throw ContractError("unknown conv kind: " + s);
}

PoolKind pool_kind_from_string(const std::string& s) {
    if (s == "sag") return PoolKind::SagPool;
    if (s == "topk") return PoolKind::TopK;
    throw ContractError("unknown pool kind: " + s);
}

}  // namespace mustang

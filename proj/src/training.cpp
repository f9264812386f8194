#include "mustang/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace mustang {

void TrainConfig::validate() const {
    if (!(split_ratio > 0.0) || !(split_ratio < 1.0))
        throw ContractError("train config: split ratio must lie in (0, 1)");
    if (epochs < 1) throw ContractError("train config: epochs must be >= 1");
    if (!(lr > 0.0)) throw ContractError("train config: lr must be positive");
}

Value cross_entropy(const Value& logits, int label) {
    if (logits.numel() != 2)
        throw ShapeError("cross_entropy: expected 2 logits");
    if (label != 0 && label != 1)
        throw ContractError("cross_entropy: label must be 0 or 1");
    const double l0 = logits.data()[0];
    const double l1 = logits.data()[1];
    if (!std::isfinite(l0) || !std::isfinite(l1))
        throw ContractError("cross_entropy: non-finite logits");

    const double m = std::max(l0, l1);
    const double z = std::exp(l0 - m) + std::exp(l1 - m);
    const double loss = std::log(z) - (logits.data()[label] - m);
    const double p0 = std::exp(l0 - m) / z;

    auto ln = logits.node();
    return custom_op(
        {1}, {loss}, {logits},
        [ln, p0, label](detail::Node& o) {
            ln->ensure_grad();
            // d loss / d logits = softmax(logits) - onehot(label)
            ln->grad[0] += o.grad[0] * (p0 - (label == 0 ? 1.0 : 0.0));
            ln->grad[1] += o.grad[0] * ((1.0 - p0) - (label == 1 ? 1.0 : 0.0));
        },
        "cross_entropy", 8);
}

double positive_probability(const Value& logits) {
    if (logits.numel() != 2)
        throw ShapeError("positive_probability: expected 2 logits");
    return 1.0 / (1.0 + std::exp(logits.data()[0] - logits.data()[1]));
}

Adam::Adam(std::vector<Value> params, const TrainConfig& cfg)
    : lr_(cfg.lr), beta1_(cfg.beta1), beta2_(cfg.beta2), epsilon_(cfg.epsilon) {
    for (Value& p : params)
        slots_.push_back({p, std::vector<double>(p.numel(), 0.0),
                          std::vector<double>(p.numel(), 0.0)});
}

void Adam::zero_grad() {
    for (Slot& s : slots_) s.param.zero_grad();
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (Slot& s : slots_) {
        auto& data = s.param.data();
        const auto& grad = s.param.grad();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double g = grad.empty() ? 0.0 : grad[i];
            s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * g;
            s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * g * g;
            const double m_hat = s.m[i] / bc1;
            const double v_hat = s.v[i] / bc2;
            data[i] -= lr_ * m_hat / (std::sqrt(v_hat) + epsilon_);
        }
    }
}

std::pair<std::vector<int>, std::vector<int>> stratified_split(
    const std::vector<int>& labels, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0) || !(ratio < 1.0))
        throw ContractError("stratified_split: ratio must lie in (0, 1)");
    std::vector<int> by_class[2];
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw ContractError("stratified_split: labels must be 0 or 1");
        by_class[labels[i]].push_back(static_cast<int>(i));
    }
    for (int c = 0; c < 2; ++c)
        if (by_class[c].size() < 2)
            throw StratifyError("stratified_split: class " + std::to_string(c) +
                                " has " + std::to_string(by_class[c].size()) +
                                " patients, need >= 2");

    std::mt19937_64 rng(seed);
    std::vector<int> train, test;
    for (int c = 0; c < 2; ++c) {
        auto& idx = by_class[c];
        std::shuffle(idx.begin(), idx.end(), rng);
        const int n = static_cast<int>(idx.size());
        int n_train = static_cast<int>(std::ceil(ratio * n - 1e-9));
        n_train = std::clamp(n_train, 1, n - 1);
        train.insert(train.end(), idx.begin(), idx.begin() + n_train);
        test.insert(test.end(), idx.begin() + n_train, idx.end());
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {train, test};
}

MetricsReport compute_metrics(const std::vector<double>& scores,
                              const std::vector<int>& labels, double threshold) {
    if (scores.size() != labels.size())
        throw ShapeError("compute_metrics: scores/labels length mismatch");
    if (scores.empty()) throw ContractError("compute_metrics: empty input");

    MetricsReport r;
    int pos = 0, neg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw ContractError("compute_metrics: labels must be 0 or 1");
        const bool truth = labels[i] == 1;
        const bool pred = scores[i] >= threshold;
        pos += truth;
        neg += !truth;
        if (truth && pred) ++r.tp;
        else if (!truth && pred) ++r.fp;
        else if (truth) ++r.fn;
        else ++r.tn;
    }
    const int f1_den = 2 * r.tp + r.fp + r.fn;
    r.f1 = f1_den > 0 ? 2.0 * r.tp / f1_den : 0.0;
    r.sensitivity = pos > 0 ? static_cast<double>(r.tp) / pos : 0.0;
    r.specificity = neg > 0 ? static_cast<double>(r.tn) / neg : 0.0;

    if (pos == 0 || neg == 0) {
        r.auc_defined = false;
        return r;
    }

    // sweep distinct score thresholds descending; tied scores advance as
    // one group, which matches the rank statistic with ties counted 1/2
    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&scores](int a, int b) {
        return scores[a] > scores[b];
    });
    r.roc_points.emplace_back(0.0, 0.0);
    r.pr_points.emplace_back(0.0, 1.0);
    int tp = 0, fp = 0;
    std::size_t i = 0;
    double auc = 0.0;
    double prev_fpr = 0.0, prev_tpr = 0.0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            if (labels[order[i]] == 1) ++tp;
            else ++fp;
            ++i;
        }
        const double fpr = static_cast<double>(fp) / neg;
        const double tpr = static_cast<double>(tp) / pos;
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        r.roc_points.emplace_back(fpr, tpr);
        r.pr_points.emplace_back(tpr, static_cast<double>(tp) / (tp + fp));
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    r.auc = auc;
    r.auc_defined = true;
    return r;
}

std::uint64_t hash_split(const std::vector<int>& train, const std::vector<int>& test) {
    std::uint64_t h = 14695981039346656037ull;  // FNV-1a
    auto mix = [&h](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xff;
            h *= 1099511628211ull;
        }
    };
    for (int v : train) mix(static_cast<std::uint64_t>(v));
    mix(0xfffffffffffffffeull);
    for (int v : test) mix(static_cast<std::uint64_t>(v));
    return h;
}

std::vector<double> evaluate_scores(const std::vector<PatchGraph>& graphs,
                                    const ModelParams& params,
                                    const ModelConfig& cfg) {
    std::vector<double> out;
    out.reserve(graphs.size());
    for (const PatchGraph& g : graphs)
        out.push_back(positive_probability(mustang_forward(g, params, cfg).logits));
    return out;
}

TrainResult train(const std::vector<EmbeddingBag>& bags, const ModelConfig& model_cfg,
                  const TrainConfig& train_cfg, int knn_k) {
    model_cfg.validate();
    train_cfg.validate();
    if (bags.size() < 2) throw ContractError("train: need at least 2 patients");

    std::vector<int> labels;
    labels.reserve(bags.size());
    for (const EmbeddingBag& b : bags) labels.push_back(b.label);

    TrainResult result;
    auto [train_idx, test_idx] =
        stratified_split(labels, train_cfg.split_ratio, train_cfg.seed);
    result.train_patients = train_idx;
    result.test_patients = test_idx;
    result.split_hash = hash_split(train_idx, test_idx);

    std::vector<PatchGraph> graphs;
    graphs.reserve(bags.size());
    for (const EmbeddingBag& b : bags) graphs.push_back(bag_graph(b, knn_k));

    std::vector<PatchGraph> test_graphs;
    std::vector<int> test_labels;
    for (int i : test_idx) {
        test_graphs.push_back(graphs[i]);
        test_labels.push_back(labels[i]);
    }

    ModelParams params = init_params(model_cfg, train_cfg.seed);
    Adam opt(params.all(), train_cfg);
    std::mt19937_64 shuffle_rng(train_cfg.seed ^ 0x9e3779b97f4a7c15ull);

    double best_f1 = -1.0;
    std::vector<int> order = train_idx;
    for (int epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
        if (train_cfg.shuffle_each_epoch)
            std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        for (int i : order) {
            const ForwardResult fwd = mustang_forward(graphs[i], params, model_cfg);
            const Value loss = cross_entropy(fwd.logits, bags[i].label);
            loss_sum += loss.item();
            opt.zero_grad();
            loss.backward();
            opt.step();
        }
        const std::vector<double> scores =
            evaluate_scores(test_graphs, params, model_cfg);
        const MetricsReport metrics = compute_metrics(scores, test_labels);

        EpochStats stats;
        stats.epoch = epoch;
        stats.loss = loss_sum / static_cast<double>(order.size());
        stats.f1 = metrics.f1;
        stats.auc = metrics.auc;
        stats.sensitivity = metrics.sensitivity;
        stats.specificity = metrics.specificity;
        result.history.push_back(stats);

        if (metrics.f1 > best_f1) {
            best_f1 = metrics.f1;
            result.best_epoch = epoch;
            result.best_params = params.clone();
            result.best_metrics = metrics;
        }
        if (epoch == train_cfg.epochs) result.final_metrics = metrics;
    }
    result.optimizer_steps = opt.step_count();
    return result;
}

}  // namespace mustang

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mustang/data_io.hpp"
#include "mustang/model.hpp"

namespace mustang {

struct TrainConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double epsilon = 1e-9;
    int epochs = 50;
    double split_ratio = 0.7;
    std::uint64_t seed = 0;
    bool shuffle_each_epoch = true;

    void validate() const;
};

// Stable negative log softmax of the true class.
Value cross_entropy(const Value& logits, int label);

class Adam {
  public:
    Adam(std::vector<Value> params, const TrainConfig& cfg);

    void zero_grad();
    void step();

    std::int64_t step_count() const { return t_; }

  private:
    struct Slot {
        Value param;
        std::vector<double> m;
        std::vector<double> v;
    };
    std::vector<Slot> slots_;
    double lr_, beta1_, beta2_, epsilon_;
    std::int64_t t_ = 0;
};

// Per-class shuffled split; the fractional patient rounds toward train
// but each class keeps at least one patient on both sides.
std::pair<std::vector<int>, std::vector<int>> stratified_split(
    const std::vector<int>& labels, double ratio, std::uint64_t seed);

struct MetricsReport {
    int tp = 0, fp = 0, tn = 0, fn = 0;
    double f1 = 0.0;
    double auc = 0.0;
    bool auc_defined = false;  // false when only one class is present
    double sensitivity = 0.0;
    double specificity = 0.0;
    std::vector<std::pair<double, double>> roc_points;  // (FPR, TPR)
    std::vector<std::pair<double, double>> pr_points;   // (recall, precision)
};

// Confusion at the given threshold on positive-class scores; AUC by
// trapezoid over the ROC swept across distinct thresholds (ties grouped).
MetricsReport compute_metrics(const std::vector<double>& scores,
                              const std::vector<int>& labels,
                              double threshold = 0.5);

struct EpochStats {
    int epoch = 0;
    double loss = 0.0;
    double f1 = 0.0;
    double auc = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
};

struct TrainResult {
    ModelParams best_params;
    int best_epoch = 0;
    MetricsReport best_metrics;   // test metrics at the best-F1 epoch
    MetricsReport final_metrics;  // test metrics after the last epoch
    std::vector<EpochStats> history;
    std::vector<int> train_patients;
    std::vector<int> test_patients;
    std::uint64_t split_hash = 0;
    std::int64_t optimizer_steps = 0;
};

// One optimizer step per patient bag; evaluates the test split each
// epoch and keeps the parameter snapshot with the best test F1 (ties go
// to the earlier epoch). Graphs are built once per bag with degree k.
TrainResult train(const std::vector<EmbeddingBag>& bags, const ModelConfig& model_cfg,
                  const TrainConfig& train_cfg, int knn_k);

// Positive-class probabilities for a set of bags under fixed parameters.
std::vector<double> evaluate_scores(const std::vector<PatchGraph>& graphs,
                                    const ModelParams& params,
                                    const ModelConfig& cfg);

double positive_probability(const Value& logits);

std::uint64_t hash_split(const std::vector<int>& train, const std::vector<int>& test);

}  // namespace mustang

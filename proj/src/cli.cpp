#include "mustang/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mustang/data_io.hpp"
#include "mustang/plot_svg.hpp"
#include "mustang/training.hpp"

namespace mustang {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
    std::string manifest;
    std::string out_dir = "runs/out";
    std::string checkpoint;
    std::string stain;
    std::string conv = "gat";
    std::string pool = "sag";
    std::string split = "all";  // evaluate: all | train | test
    int k = 5;
    std::uint64_t seed = 0;
    int epochs = 50;
    double lr = 1e-4;
    double ratio = 0.8;
    int heads = 2;
    int blocks = 4;
    int hidden = 512;
    double split_ratio = 0.7;
    int layout_iterations = 50;

    ModelConfig model_config(int input_dim) const {
        ModelConfig cfg;
        cfg.input_dim = input_dim;
        cfg.hidden_dim = hidden;
        cfg.num_blocks = blocks;
        cfg.heads = heads;
        cfg.pooling_ratio = ratio;
        cfg.conv_kind = conv_kind_from_string(conv);
        cfg.pool_kind = pool_kind_from_string(pool);
        return cfg;
    }

    TrainConfig train_config() const {
        TrainConfig cfg;
        cfg.lr = lr;
        cfg.epochs = epochs;
        cfg.split_ratio = split_ratio;
        cfg.seed = seed;
        return cfg;
    }
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
}

void write_resolved_config(const RunConfig& run, const std::string& command) {
    fs::create_directories(run.out_dir);
    const json j{{"command", command},
                 {"manifest", run.manifest},
                 {"out", run.out_dir},
                 {"checkpoint", run.checkpoint},
                 {"stain", run.stain},
                 {"conv", run.conv},
                 {"pool", run.pool},
                 {"split", run.split},
                 {"k", run.k},
                 {"seed", run.seed},
                 {"epochs", run.epochs},
                 {"lr", run.lr},
                 {"ratio", run.ratio},
                 {"heads", run.heads},
                 {"blocks", run.blocks},
                 {"hidden", run.hidden},
                 {"split_ratio", run.split_ratio}};
    write_text((fs::path(run.out_dir) / "config.json").string(), j.dump(2) + "\n");
}

void apply_config_file(RunConfig& run, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError(path + ": bad config JSON: " + e.what());
    }
    auto get = [&j](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("manifest", run.manifest);
    get("out", run.out_dir);
    get("checkpoint", run.checkpoint);
    get("stain", run.stain);
    get("conv", run.conv);
    get("pool", run.pool);
    get("split", run.split);
    get("k", run.k);
    get("seed", run.seed);
    get("epochs", run.epochs);
    get("lr", run.lr);
    get("ratio", run.ratio);
    get("heads", run.heads);
    get("blocks", run.blocks);
    get("hidden", run.hidden);
    get("split_ratio", run.split_ratio);
}

std::vector<EmbeddingBag> load_dataset(const RunConfig& run) {
    if (run.manifest.empty()) throw ContractError("--manifest is required");
    if (run.stain.empty()) return load_bags(run.manifest);
    // stain filter applied on top of the manifest's own setting
    DatasetManifest manifest = load_manifest(run.manifest);
    manifest.stain_filter = run.stain;
    const fs::path tmp = fs::path(run.out_dir) / "manifest.stain.json";
    fs::create_directories(run.out_dir);
    json patients = json::array();
    for (const ManifestPatient& p : manifest.patients) {
        fs::path path(p.path);
        if (path.is_relative()) path = fs::absolute(fs::path(run.manifest).parent_path() / path);
        patients.push_back({{"id", p.id}, {"label", p.label}, {"path", path.string()}});
    }
    const json j{{"feature_dim", manifest.feature_dim},
                 {"patients", patients},
                 {"stain", manifest.stain_filter}};
    write_text(tmp.string(), j.dump(2) + "\n");
    return load_bags(tmp.string());
}

void write_metrics_files(const RunConfig& run, const MetricsReport& m,
                         const std::string& stem) {
    std::string roc_csv = "fpr,tpr\n";
    for (const auto& [x, y] : m.roc_points) roc_csv += fmt(x) + "," + fmt(y) + "\n";
    write_text((fs::path(run.out_dir) / (stem + "_roc.csv")).string(), roc_csv);
    std::string pr_csv = "recall,precision\n";
    for (const auto& [x, y] : m.pr_points) pr_csv += fmt(x) + "," + fmt(y) + "\n";
    write_text((fs::path(run.out_dir) / (stem + "_pr.csv")).string(), pr_csv);
    write_line_chart((fs::path(run.out_dir) / (stem + "_roc.svg")).string(),
                     "ROC (AUC " + fmt(m.auc) + ")", "false positive rate",
                     "true positive rate", m.roc_points);
    write_line_chart((fs::path(run.out_dir) / (stem + "_pr.svg")).string(),
                     "Precision-Recall", "recall", "precision", m.pr_points);
}

json metrics_to_json(const MetricsReport& m) {
    return json{{"tp", m.tp},
                {"fp", m.fp},
                {"tn", m.tn},
                {"fn", m.fn},
                {"f1", m.f1},
                {"auc", m.auc_defined ? json(m.auc) : json()},
                {"sensitivity", m.sensitivity},
                {"specificity", m.specificity}};
}

int cmd_generate(const RunConfig& run, const GenerateConfig& gen) {
    fs::create_directories(run.out_dir);
    GenerateConfig cfg = gen;
    cfg.seed = run.seed;
    const std::string manifest = generate_synthetic(cfg, run.out_dir);
    write_resolved_config(run, "generate");
    std::cout << "wrote " << manifest << " (" << cfg.num_patients << " patients, F="
              << cfg.feature_dim << ")\n";
    return 0;
}

int cmd_build_graph(const RunConfig& run) {
    const std::vector<EmbeddingBag> bags = load_dataset(run);
    fs::create_directories(run.out_dir);
    std::string summary = "patient,N,E,components,mixing\n";
    for (const EmbeddingBag& bag : bags) {
        const PatchGraph g = bag_graph(bag, run.k);
        const GraphStats stats = graph_stats(g);
        const auto pos = spring_layout(g, run.layout_iterations, run.seed);
        write_edge_list(g, (fs::path(run.out_dir) / (bag.patient_id + "_edges.txt")).string());
        write_node_table(g, pos,
                         (fs::path(run.out_dir) / (bag.patient_id + "_nodes.csv")).string());
        summary += bag.patient_id + "," + std::to_string(stats.num_nodes) + "," +
                   std::to_string(stats.num_edges) + "," +
                   std::to_string(stats.components) + "," + fmt(stats.slide_mixing) + "\n";
        std::cout << bag.patient_id << ": N=" << stats.num_nodes
                  << " E=" << stats.num_edges << " components=" << stats.components
                  << " weakly_connected=" << (stats.components == 1 ? "yes" : "no")
                  << "\n";
    }
    write_text((fs::path(run.out_dir) / "summary.csv").string(), summary);
    write_resolved_config(run, "build-graph");
    return 0;
}

std::string history_csv(const std::vector<EpochStats>& history) {
    std::string csv = "epoch,loss,f1,auc,sens,spec\n";
    for (const EpochStats& e : history)
        csv += std::to_string(e.epoch) + "," + fmt(e.loss) + "," + fmt(e.f1) + "," +
               fmt(e.auc) + "," + fmt(e.sensitivity) + "," + fmt(e.specificity) + "\n";
    return csv;
}

int cmd_train(const RunConfig& run) {
    const std::vector<EmbeddingBag> bags = load_dataset(run);
    if (bags.empty()) throw ContractError("manifest lists no patients");
    const ModelConfig model_cfg = run.model_config(bags.front().feature_dim);
    const TrainResult result = train(bags, model_cfg, run.train_config(), run.k);

    fs::create_directories(run.out_dir);
    save_checkpoint(result.best_params, model_cfg,
                    (fs::path(run.out_dir) / "best.ckpt").string());
    write_text((fs::path(run.out_dir) / "history.csv").string(),
               history_csv(result.history));
    const json report{
        {"protocol", "best test F1 over epochs; selecting on the test split "
                     "is optimistic, so final-epoch metrics are also reported"},
        {"best_epoch", result.best_epoch},
        {"best", metrics_to_json(result.best_metrics)},
        {"final", metrics_to_json(result.final_metrics)},
        {"split_hash", result.split_hash},
        {"train_patients", result.train_patients},
        {"test_patients", result.test_patients}};
    write_text((fs::path(run.out_dir) / "metrics.json").string(), report.dump(2) + "\n");
    write_metrics_files(run, result.best_metrics, "best");
    write_resolved_config(run, "train");
    std::cout << "best epoch " << result.best_epoch << ": F1=" << fmt(result.best_metrics.f1)
              << " AUC=" << fmt(result.best_metrics.auc)
              << " | final: F1=" << fmt(result.final_metrics.f1)
              << " AUC=" << fmt(result.final_metrics.auc) << "\n";
    std::cout << "checkpoint: " << (fs::path(run.out_dir) / "best.ckpt").string() << "\n";
    return 0;
}

int cmd_evaluate(const RunConfig& run) {
    if (run.checkpoint.empty()) throw ContractError("--checkpoint is required");
    auto [params, model_cfg] = load_checkpoint(run.checkpoint);
    const std::vector<EmbeddingBag> bags = load_dataset(run);

    std::vector<int> selected(bags.size());
    std::iota(selected.begin(), selected.end(), 0);
    if (run.split != "all") {
        std::vector<int> labels;
        for (const EmbeddingBag& b : bags) labels.push_back(b.label);
        auto [train_idx, test_idx] =
            stratified_split(labels, run.split_ratio, run.seed);
        if (run.split == "train") selected = train_idx;
        else if (run.split == "test") selected = test_idx;
        else throw ContractError("--split must be all, train or test");
    }

    std::vector<PatchGraph> graphs;
    std::vector<int> labels;
    for (int i : selected) {
        graphs.push_back(bag_graph(bags[i], run.k));
        labels.push_back(bags[i].label);
    }
    const std::vector<double> scores = evaluate_scores(graphs, params, model_cfg);
    const MetricsReport m = compute_metrics(scores, labels);

    fs::create_directories(run.out_dir);
    std::string scores_csv = "patient,label,score\n";
    for (std::size_t i = 0; i < selected.size(); ++i)
        scores_csv += bags[selected[i]].patient_id + "," + std::to_string(labels[i]) +
                      "," + fmt(scores[i]) + "\n";
    write_text((fs::path(run.out_dir) / "scores.csv").string(), scores_csv);
    write_text((fs::path(run.out_dir) / "metrics.json").string(),
               metrics_to_json(m).dump(2) + "\n");
    write_metrics_files(run, m, "eval");
    write_resolved_config(run, "evaluate");
    std::cout << "evaluated " << selected.size() << " patients (" << run.split
              << "): F1=" << fmt(m.f1) << " AUC=" << fmt(m.auc)
              << " sens=" << fmt(m.sensitivity) << " spec=" << fmt(m.specificity)
              << "\n";
    return 0;
}

int cmd_ablate(const RunConfig& run, const std::string& sweep,
               std::vector<int> k_list, std::vector<int> layers_list,
               std::vector<int> heads_list) {
    const std::vector<EmbeddingBag> bags = load_dataset(run);
    if (bags.empty()) throw ContractError("manifest lists no patients");
    const int input_dim = bags.front().feature_dim;

    struct Cell {
        std::string variant;
        RunConfig run;
    };
    std::vector<Cell> cells;
    if (sweep == "convpool") {
        for (const char* conv : {"gat", "gcn"})
            for (const char* pool : {"sag", "topk"}) {
                RunConfig r = run;
                r.conv = conv;
                r.pool = pool;
                cells.push_back({std::string(conv) + "_" + pool, r});
            }
    } else if (sweep == "k") {
        for (int k : k_list) {
            RunConfig r = run;
            r.k = k;
            cells.push_back({"k=" + std::to_string(k), r});
        }
    } else if (sweep == "layers") {
        for (int layers : layers_list) {
            RunConfig r = run;
            r.blocks = layers;
            cells.push_back({"layers=" + std::to_string(layers), r});
        }
    } else if (sweep == "heads") {
        for (int heads : heads_list) {
            RunConfig r = run;
            r.heads = heads;
            cells.push_back({"heads=" + std::to_string(heads), r});
        }
    } else {
        throw ContractError("--sweep must be convpool, k, layers or heads");
    }

    fs::create_directories(run.out_dir);
    std::string csv = "variant,f1,auc,params,runtime_s,split_hash,status\n";
    for (const Cell& cell : cells) {
        const auto started = std::chrono::steady_clock::now();
        std::string row;
        try {
            const ModelConfig model_cfg = cell.run.model_config(input_dim);
            const TrainResult r =
                train(bags, model_cfg, cell.run.train_config(), cell.run.k);
            const double seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                    .count();
            char runtime[32];
            std::snprintf(runtime, sizeof(runtime), "%.1f", seconds);
            row = cell.variant + "," + fmt(r.best_metrics.f1) + "," +
                  fmt(r.best_metrics.auc) + "," +
                  std::to_string(r.best_params.total_param_count()) + "," + runtime +
                  "," + std::to_string(r.split_hash) + ",ok";
            std::cout << row << "\n";
        } catch (const std::exception& e) {
            std::string reason = e.what();
            for (char& c : reason)
                if (c == ',' || c == '\n') c = ' ';
            row = cell.variant + ",,,,,," + "failed: " + reason;
            std::cerr << cell.variant << " failed: " << e.what() << "\n";
        }
        csv += row + "\n";
    }
    write_text((fs::path(run.out_dir) / "ablation.csv").string(), csv);
    write_resolved_config(run, "ablate");
    std::cout << "wrote " << (fs::path(run.out_dir) / "ablation.csv").string() << "\n";
    return 0;
}

int cmd_estimate(const RunConfig& run, int nodes, std::vector<int> k_list,
                 int input_dim) {
    if (k_list.empty()) k_list = {run.k};
    fs::create_directories(run.out_dir);
    ModelConfig cfg = run.model_config(input_dim);
    std::string csv = "k,flops,edge_flops,node_flops,head_flops,peak_bytes\n";
    for (int k : k_list) {
        const ResourceEstimate est = resource_estimate(nodes, k, cfg);
        csv += std::to_string(k) + "," + std::to_string(est.flops) + "," +
               std::to_string(est.edge_flops) + "," + std::to_string(est.node_flops) +
               "," + std::to_string(est.head_flops) + "," +
               std::to_string(est.peak_bytes) + "\n";
        std::cout << "N=" << nodes << " k=" << k << ": flops=" << est.flops
                  << " (edge " << est.edge_flops << ", node " << est.node_flops
                  << ", head " << est.head_flops << ") peak_bytes=" << est.peak_bytes
                  << "\n";
    }
    write_text((fs::path(run.out_dir) / "estimate.csv").string(), csv);
    write_resolved_config(run, "estimate");
    return 0;
}

std::string find_config_arg(const std::vector<std::string>& args) {
    for (std::size_t i = 0; i + 1 < args.size(); ++i)
        if (args[i] == "--config") return args[i + 1];
    for (const std::string& a : args)
        if (a.rfind("--config=", 0) == 0) return a.substr(9);
    return {};
}

void add_common_flags(CLI::App* cmd, RunConfig& run, std::string& config_path) {
    cmd->add_option("--out", run.out_dir, "Output directory")->capture_default_str();
    cmd->add_option("--seed", run.seed, "Random seed")->capture_default_str();
    cmd->add_option("--config", config_path,
                    "JSON config file; explicit flags override its values");
}

void add_model_flags(CLI::App* cmd, RunConfig& run) {
    cmd->add_option("--k", run.k, "k-NN graph degree")->capture_default_str();
    cmd->add_option("--ratio", run.ratio, "Pooling ratio in (0,1]")->capture_default_str();
    cmd->add_option("--heads", run.heads, "Attention heads")->capture_default_str();
    cmd->add_option("--blocks", run.blocks, "Conv+pool blocks")->capture_default_str();
    cmd->add_option("--hidden", run.hidden, "Hidden feature width")->capture_default_str();
    cmd->add_option("--conv", run.conv, "Graph conv kind")
        ->check(CLI::IsMember({"gat", "gcn"}))
        ->capture_default_str();
    cmd->add_option("--pool", run.pool, "Pooling kind")
        ->check(CLI::IsMember({"sag", "topk"}))
        ->capture_default_str();
}

void add_train_flags(CLI::App* cmd, RunConfig& run) {
    cmd->add_option("--epochs", run.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--lr", run.lr, "Adam learning rate")->capture_default_str();
    cmd->add_option("--split-ratio", run.split_ratio, "Train fraction of the split")
        ->capture_default_str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Patient-level graph attention pipeline over patch embeddings"};
    app.require_subcommand(1);

    RunConfig run;
    std::string config_path;
    GenerateConfig gen;
    int nodes = 2000;
    int input_dim = 1024;
    std::vector<int> k_list;
    std::vector<int> layers_list = {1, 2, 3, 4, 5};
    std::vector<int> heads_list = {1, 2, 4, 8};
    std::string sweep = "convpool";

    // config file values become defaults; explicit flags then override
    const std::string pre = find_config_arg(args);
    if (!pre.empty()) apply_config_file(run, pre);

    CLI::App* generate = app.add_subcommand("generate", "Write a synthetic embedding dataset");
    add_common_flags(generate, run, config_path);
    generate->add_option("--patients", gen.num_patients, "Number of patients")
        ->capture_default_str();
    generate->add_option("--feature-dim", gen.feature_dim, "Embedding width")
        ->capture_default_str();
    generate->add_option("--min-slides", gen.min_slides, "Min slides per patient")
        ->capture_default_str();
    generate->add_option("--max-slides", gen.max_slides, "Max slides per patient")
        ->capture_default_str();
    generate->add_option("--min-patches", gen.min_patches, "Min patches per slide")
        ->capture_default_str();
    generate->add_option("--max-patches", gen.max_patches, "Max patches per slide")
        ->capture_default_str();
    generate->add_option("--delta", gen.class_separation, "Class separation")
        ->capture_default_str();
    generate->add_option("--sigma", gen.noise, "Per-feature noise")
        ->capture_default_str();
    generate->add_option("--signal-fraction", gen.signal_fraction,
                         "Informative patch fraction in positive bags")
        ->capture_default_str();

    CLI::App* build = app.add_subcommand("build-graph", "Build and analyze per-patient k-NN graphs");
    add_common_flags(build, run, config_path);
    build->add_option("--manifest", run.manifest, "Dataset manifest JSON")->required();
    build->add_option("--k", run.k, "k-NN graph degree")->capture_default_str();
    build->add_option("--stain", run.stain, "Keep only rows with this stain");
    build->add_option("--layout-iterations", run.layout_iterations,
                      "Force-layout iterations")
        ->capture_default_str();

    CLI::App* train_cmd = app.add_subcommand("train", "Train on a dataset manifest");
    add_common_flags(train_cmd, run, config_path);
    train_cmd->add_option("--manifest", run.manifest, "Dataset manifest JSON");
    train_cmd->add_option("--stain", run.stain, "Keep only rows with this stain");
    add_model_flags(train_cmd, run);
    add_train_flags(train_cmd, run);

    CLI::App* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint");
    add_common_flags(evaluate, run, config_path);
    evaluate->add_option("--manifest", run.manifest, "Dataset manifest JSON");
    evaluate->add_option("--checkpoint", run.checkpoint, "Checkpoint path");
    evaluate->add_option("--stain", run.stain, "Keep only rows with this stain");
    evaluate->add_option("--k", run.k, "k-NN graph degree")->capture_default_str();
    evaluate->add_option("--split", run.split, "Subset to evaluate")
        ->check(CLI::IsMember({"all", "train", "test"}))
        ->capture_default_str();
    evaluate->add_option("--split-ratio", run.split_ratio,
                         "Train fraction used to reproduce the split")
        ->capture_default_str();

    CLI::App* ablate = app.add_subcommand("ablate", "Run an ablation grid");
    add_common_flags(ablate, run, config_path);
    ablate->add_option("--manifest", run.manifest, "Dataset manifest JSON");
    ablate->add_option("--stain", run.stain, "Keep only rows with this stain");
    add_model_flags(ablate, run);
    add_train_flags(ablate, run);
    ablate->add_option("--sweep", sweep, "Grid to sweep")
        ->check(CLI::IsMember({"convpool", "k", "layers", "heads"}))
        ->capture_default_str();
    ablate->add_option("--k-list", k_list, "k values for --sweep k")
        ->delimiter(',');
    ablate->add_option("--layers-list", layers_list, "Layer counts for --sweep layers")
        ->delimiter(',')
        ->capture_default_str();
    ablate->add_option("--heads-list", heads_list, "Head counts for --sweep heads")
        ->delimiter(',')
        ->capture_default_str();

    CLI::App* estimate = app.add_subcommand("estimate", "Forward-pass resource estimate");
    add_common_flags(estimate, run, config_path);
    estimate->add_option("--nodes", nodes, "Graph size N")->capture_default_str();
    estimate->add_option("--k-list", k_list, "k values to sweep")->delimiter(',');
    estimate->add_option("--input-dim", input_dim, "Embedding width")
        ->capture_default_str();
    add_model_flags(estimate, run);

    std::vector<const char*> argv;
    argv.push_back("mustang");
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (generate->parsed()) return cmd_generate(run, gen);
        if (build->parsed()) return cmd_build_graph(run);
        if (train_cmd->parsed()) return cmd_train(run);
        if (evaluate->parsed()) return cmd_evaluate(run);
        if (ablate->parsed()) {
            if (sweep == "k" && k_list.empty())
                k_list = {1, 2, 3, 4, 5, 10, 20, 50, 100};
            return cmd_ablate(run, sweep, k_list, layers_list, heads_list);
        }
        if (estimate->parsed()) return cmd_estimate(run, nodes, k_list, input_dim);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "error: no command given\n";
    return 1;
}

}  // namespace mustang

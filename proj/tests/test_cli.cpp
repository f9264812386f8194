#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "mustang/cli.hpp"
#include "mustang/data_io.hpp"
#include "mustang/knn_graph.hpp"
#include "mustang/training.hpp"

using namespace mustang;
namespace fs = std::filesystem;
using nlohmann::json;

TEST_SUITE_BEGIN("cli");

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::path("test_out") / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& file = "") const {
        return file.empty() ? path.string() : (path / file).string();
    }
};

struct CaptureStreams {
    std::stringstream out, err;
    std::streambuf* old_out;
    std::streambuf* old_err;
    CaptureStreams()
        : old_out(std::cout.rdbuf(out.rdbuf())), old_err(std::cerr.rdbuf(err.rdbuf())) {}
    ~CaptureStreams() {
        std::cout.rdbuf(old_out);
        std::cerr.rdbuf(old_err);
    }
};

int run(const std::vector<std::string>& args, std::string* err_text = nullptr) {
    CaptureStreams capture;
    const int code = run_cli(args);
    if (err_text) *err_text = capture.err.str();
    return code;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> csv_lines(const std::string& path) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) lines.push_back(line);
    return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
}

std::string tiny_dataset(const TempDir& dir, int patients = 8) {
    GenerateConfig cfg;
    cfg.num_patients = patients;
    cfg.feature_dim = 8;
    cfg.min_slides = 1;
    cfg.max_slides = 2;
    cfg.min_patches = 5;
    cfg.max_patches = 9;
    return generate_synthetic(cfg, dir.str("data"));
}

}  // namespace

TEST_CASE("generate writes a loadable dataset and its config") {
    TempDir dir("cli_generate");
    CHECK(run({"generate", "--out", dir.str("ds"), "--patients", "6",
               "--feature-dim", "5", "--min-slides", "1", "--max-slides", "2",
               "--min-patches", "4", "--max-patches", "6"}) == 0);
    const auto bags = load_bags(dir.str("ds/manifest.json"));
    CHECK(bags.size() == 6);
    CHECK(bags[0].feature_dim == 5);
    CHECK(fs::exists(dir.str("ds/config.json")));
}

TEST_CASE("build-graph emits stats matching direct library calls") {
    TempDir dir("cli_build");
    const std::string manifest = tiny_dataset(dir);
    CHECK(run({"build-graph", "--manifest", manifest, "--k", "2", "--out",
               dir.str("graphs")}) == 0);

    const auto lines = csv_lines(dir.str("graphs/summary.csv"));
    REQUIRE(lines.size() == 9);  // header + 8 patients
    CHECK(lines[0] == "patient,N,E,components,mixing");

    const auto bags = load_bags(manifest);
    for (std::size_t i = 0; i < bags.size(); ++i) {
        const GraphStats expect = graph_stats(bag_graph(bags[i], 2));
        const auto cells = split_csv(lines[i + 1]);
        REQUIRE(cells.size() == 5);
        CHECK(cells[0] == bags[i].patient_id);
        CHECK(std::stoi(cells[1]) == expect.num_nodes);
        CHECK(std::stoi(cells[2]) == expect.num_edges);
        CHECK(std::stoi(cells[3]) == expect.components);
        CHECK(std::stod(cells[4]) == doctest::Approx(expect.slide_mixing));
        CHECK(fs::exists(dir.str("graphs/" + bags[i].patient_id + "_edges.txt")));
        CHECK(fs::exists(dir.str("graphs/" + bags[i].patient_id + "_nodes.csv")));
    }
}

TEST_CASE("build-graph with k >= max bag size gives connected graphs") {
    TempDir dir("cli_build_full");
    const std::string manifest = tiny_dataset(dir);
    CHECK(run({"build-graph", "--manifest", manifest, "--k", "50", "--out",
               dir.str("graphs")}) == 0);
    for (const std::string& line : csv_lines(dir.str("graphs/summary.csv"))) {
        if (line.rfind("patient,", 0) == 0) continue;
        CHECK(split_csv(line)[3] == "1");  // one weak component
    }
}

TEST_CASE("build-graph separates crafted clusters at k=1") {
    TempDir dir("cli_clusters");
    // three far-apart pairs in a hand-written CSV embedding
    std::ofstream csv(dir.str("p0.csv"));
    csv << "s0,HE,0.0,0.0\n"
        << "s0,HE,0.1,0.0\n"
        << "s0,HE,100.0,0.0\n"
        << "s0,HE,100.1,0.0\n"
        << "s0,HE,200.0,0.0\n"
        << "s0,HE,200.1,0.0\n";
    csv.close();
    std::ofstream(dir.str("manifest.json"))
        << R"({"feature_dim":2,"patients":[{"id":"p0","label":0,"path":"p0.csv"}]})";
    CHECK(run({"build-graph", "--manifest", dir.str("manifest.json"), "--k", "1",
               "--out", dir.str("graphs")}) == 0);
    const auto lines = csv_lines(dir.str("graphs/summary.csv"));
    REQUIRE(lines.size() == 2);
    CHECK(split_csv(lines[1])[3] == "3");
}

TEST_CASE("train writes history, checkpoint and metrics; evaluate replays the best F1") {
    TempDir dir("cli_train");
    const std::string manifest = tiny_dataset(dir, 10);
    const std::vector<std::string> train_args = {
        "train", "--manifest", manifest, "--out", dir.str("run"),
        "--k", "3", "--epochs", "4", "--hidden", "8",
        "--blocks", "2", "--lr", "0.002", "--seed", "7"};
    CHECK(run(train_args) == 0);

    const auto lines = csv_lines(dir.str("run/history.csv"));
    REQUIRE(lines.size() == 5);  // header + 4 epochs
    CHECK(lines[0] == "epoch,loss,f1,auc,sens,spec");
    CHECK(fs::exists(dir.str("run/best.ckpt")));
    CHECK(fs::exists(dir.str("run/best_roc.csv")));
    CHECK(fs::exists(dir.str("run/best_pr.svg")));

    const json metrics = json::parse(read_file(dir.str("run/metrics.json")));
    const double best_f1 = metrics.at("best").at("f1").get<double>();

    SUBCASE("evaluate on the test split reproduces the training-time best F1") {
        CHECK(run({"evaluate", "--manifest", manifest, "--checkpoint",
                   dir.str("run/best.ckpt"), "--out", dir.str("eval"), "--k", "3",
                   "--split", "test", "--seed", "7"}) == 0);
        const json eval = json::parse(read_file(dir.str("eval/metrics.json")));
        CHECK(eval.at("f1").get<double>() == best_f1);  // exact replay
    }
    SUBCASE("rerunning the training command is byte-deterministic") {
        const std::string history = read_file(dir.str("run/history.csv"));
        CHECK(run(train_args) == 0);
        CHECK(read_file(dir.str("run/history.csv")) == history);
    }
}

TEST_CASE("missing manifest fails with a diagnostic naming the path") {
    std::string err;
    CHECK(run({"train", "--manifest", "does/not/exist.json", "--out",
               "test_out/none"}, &err) != 0);
    CHECK(err.find("does/not/exist.json") != std::string::npos);
}

TEST_CASE("ablate emits one row per cell sharing a single split hash") {
    TempDir dir("cli_ablate");
    const std::string manifest = tiny_dataset(dir, 10);
    CHECK(run({"ablate", "--manifest", manifest, "--out", dir.str("ab"),
               "--sweep", "convpool", "--epochs", "1", "--hidden", "6",
               "--blocks", "1", "--k", "2"}) == 0);
    const auto lines = csv_lines(dir.str("ab/ablation.csv"));
    REQUIRE(lines.size() == 5);  // header + 4 cells
    CHECK(lines[0] == "variant,f1,auc,params,runtime_s,split_hash,status");
    std::string hash;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cells = split_csv(lines[i]);
        REQUIRE(cells.size() == 7);
        CHECK(cells[6] == "ok");
        if (hash.empty()) hash = cells[5];
        CHECK(cells[5] == hash);
    }
    // the four conv/pool variants
    CHECK(lines[1].rfind("gat_sag,", 0) == 0);
    CHECK(lines[2].rfind("gat_topk,", 0) == 0);
    CHECK(lines[3].rfind("gcn_sag,", 0) == 0);
    CHECK(lines[4].rfind("gcn_topk,", 0) == 0);
}

TEST_CASE("ablate k sweep emits one row per k") {
    TempDir dir("cli_ablate_k");
    const std::string manifest = tiny_dataset(dir, 8);
    CHECK(run({"ablate", "--manifest", manifest, "--out", dir.str("ab"),
               "--sweep", "k", "--k-list", "1,2,3", "--epochs", "1",
               "--hidden", "6", "--blocks", "1"}) == 0);
    const auto lines = csv_lines(dir.str("ab/ablation.csv"));
    REQUIRE(lines.size() == 4);
    CHECK(lines[1].rfind("k=1,", 0) == 0);
    CHECK(lines[3].rfind("k=3,", 0) == 0);
}

TEST_CASE("a failing ablation cell is recorded and the sweep continues") {
    TempDir dir("cli_ablate_fail");
    const std::string manifest = tiny_dataset(dir, 8);
    CHECK(run({"ablate", "--manifest", manifest, "--out", dir.str("ab"),
               "--sweep", "layers", "--layers-list", "0,1", "--epochs", "1",
               "--hidden", "6"}) == 0);
    const auto lines = csv_lines(dir.str("ab/ablation.csv"));
    REQUIRE(lines.size() == 3);
    const auto bad = split_csv(lines[1]);
    CHECK(bad[0] == "layers=0");
    CHECK(bad.back().rfind("failed:", 0) == 0);
    const auto good = split_csv(lines[2]);
    CHECK(good[0] == "layers=1");
    CHECK(good.back() == "ok");
}

TEST_CASE("estimate sweeps k and scales linearly in the edge term") {
    TempDir dir("cli_estimate");
    CHECK(run({"estimate", "--nodes", "2000", "--k-list", "5,10,20,40", "--out",
               dir.str("est")}) == 0);
    const auto lines = csv_lines(dir.str("est/estimate.csv"));
    REQUIRE(lines.size() == 5);
    CHECK(lines[0] == "k,flops,edge_flops,node_flops,head_flops,peak_bytes");
    const double e5 = std::stod(split_csv(lines[1])[2]);
    const double e10 = std::stod(split_csv(lines[2])[2]);
    const double e40 = std::stod(split_csv(lines[4])[2]);
    CHECK(e10 == doctest::Approx(2 * e5));
    CHECK(e40 == doctest::Approx(8 * e5));

    SUBCASE("minimal input still yields positive numbers") {
        CHECK(run({"estimate", "--nodes", "1", "--k-list", "1", "--out",
                   dir.str("tiny")}) == 0);
        const auto tiny = csv_lines(dir.str("tiny/estimate.csv"));
        REQUIRE(tiny.size() == 2);
        CHECK(std::stod(split_csv(tiny[1])[1]) > 0.0);
    }
}

TEST_CASE("config file sets values and flags override it") {
    TempDir dir("cli_config");
    const std::string manifest = tiny_dataset(dir, 8);
    std::ofstream(dir.str("conf.json")) << json{{"manifest", manifest},
                                                {"k", 2},
                                                {"epochs", 1},
                                                {"hidden", 6},
                                                {"blocks", 1},
                                                {"out", dir.str("run_a")}}
                                               .dump();
    CHECK(run({"train", "--config", dir.str("conf.json")}) == 0);
    const json resolved = json::parse(read_file(dir.str("run_a/config.json")));
    CHECK(resolved.at("k").get<int>() == 2);

    CHECK(run({"train", "--config", dir.str("conf.json"), "--k", "3", "--out",
               dir.str("run_b")}) == 0);
    const json overridden = json::parse(read_file(dir.str("run_b/config.json")));
    CHECK(overridden.at("k").get<int>() == 3);
    CHECK(overridden.at("epochs").get<int>() == 1);  // from the file
}

TEST_CASE("help lists the documented flags with their defaults") {
    CaptureStreams capture;
    CHECK(run_cli({"train", "--help"}) == 0);
    const std::string help = capture.out.str();
    for (const char* flag : {"--manifest", "--k", "--seed", "--epochs", "--lr",
                             "--ratio", "--heads", "--blocks", "--conv", "--pool",
                             "--stain", "--out", "--config"})
        CHECK(help.find(flag) != std::string::npos);
    CHECK(help.find("0.8") != std::string::npos);     // pooling ratio default
    CHECK(help.find("0.0001") != std::string::npos);  // lr default
    CHECK(help.find("50") != std::string::npos);      // epochs default
}

TEST_CASE("stain filter flag reaches the loader") {
    TempDir dir("cli_stain");
    const std::string manifest = tiny_dataset(dir, 6);
    // stains cycle HE/CD20/... per slide; filtering to a missing stain fails
    std::string err;
    const int code = run({"build-graph", "--manifest", manifest, "--stain",
                          "NOPE", "--k", "1", "--out", dir.str("g")}, &err);
    CHECK(code != 0);
    CHECK(err.find("NOPE") != std::string::npos);
}

TEST_SUITE_END();

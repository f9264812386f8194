#include "mustang/data_io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

namespace mustang {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

namespace {

const char* const kStains[] = {"HE", "CD20", "CD68", "CD138"};

json config_to_json(const ModelConfig& cfg) {
    const char* act = nullptr;
    switch (cfg.block_activation) {
        case Activation::Relu: act = "relu"; break;
        case Activation::LeakyRelu: act = "leaky_relu"; break;
        case Activation::Tanh: act = "tanh"; break;
        case Activation::Elu: act = "elu"; break;
        case Activation::Sigmoid: act = "sigmoid"; break;
    }
    return json{{"input_dim", cfg.input_dim},
                {"hidden_dim", cfg.hidden_dim},
                {"num_blocks", cfg.num_blocks},
                {"heads", cfg.heads},
                {"pooling_ratio", cfg.pooling_ratio},
                {"conv", to_string(cfg.conv_kind)},
                {"pool", to_string(cfg.pool_kind)},
                {"mlp_hidden", cfg.mlp_hidden},
                {"activation", act}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig cfg;
    cfg.input_dim = j.at("input_dim").get<int>();
    cfg.hidden_dim = j.at("hidden_dim").get<int>();
    cfg.num_blocks = j.at("num_blocks").get<int>();
    cfg.heads = j.at("heads").get<int>();
    cfg.pooling_ratio = j.at("pooling_ratio").get<double>();
    cfg.conv_kind = conv_kind_from_string(j.at("conv").get<std::string>());
    cfg.pool_kind = pool_kind_from_string(j.at("pool").get<std::string>());
    cfg.mlp_hidden = j.at("mlp_hidden").get<std::vector<int>>();
    const std::string act = j.value("activation", "relu");
    if (act == "relu") cfg.block_activation = Activation::Relu;
    else if (act == "leaky_relu") cfg.block_activation = Activation::LeakyRelu;
    else if (act == "tanh") cfg.block_activation = Activation::Tanh;
    else if (act == "elu") cfg.block_activation = Activation::Elu;
    else if (act == "sigmoid") cfg.block_activation = Activation::Sigmoid;
    else throw FormatError("unknown activation: " + act);
    return cfg;
}

void write_file_atomic(const std::string& path, const std::string& payload) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot open " + tmp + " for writing");
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
        if (!out) throw IoError("write failed for " + tmp);
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp + " to " + path + ": " + ec.message());
}

std::string doubles_to_bytes(const std::vector<double>& v) {
    std::string bytes(v.size() * sizeof(double), '\0');
    std::memcpy(bytes.data(), v.data(), bytes.size());
    return bytes;
}

EmbeddingBag read_embedding_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    EmbeddingBag bag;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string slide, stain, cell;
        if (!std::getline(ss, slide, ',') || !std::getline(ss, stain, ','))
            throw FormatError(path + ":" + std::to_string(line_no) +
                              ": expected slide_id,stain,values...");
        std::vector<double> values;
        while (std::getline(ss, cell, ',')) {
            try {
                values.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw FormatError(path + ":" + std::to_string(line_no) +
                                  ": bad number '" + cell + "'");
            }
        }
        if (values.empty())
            throw FormatError(path + ":" + std::to_string(line_no) + ": no features");
        if (bag.rows.empty()) {
            bag.feature_dim = static_cast<int>(values.size());
        } else if (static_cast<int>(values.size()) != bag.feature_dim) {
            throw FormatError(path + ":" + std::to_string(line_no) +
                              ": row has " + std::to_string(values.size()) +
                              " features, expected " + std::to_string(bag.feature_dim));
        }
        bag.rows.push_back({slide, stain});
        bag.features.insert(bag.features.end(), values.begin(), values.end());
    }
    if (bag.rows.empty()) throw FormatError(path + ": empty embedding file");
    return bag;
}

bool is_csv(const std::string& path) {
    return path.size() > 4 && path.substr(path.size() - 4) == ".csv";
}

}  // namespace

void GenerateConfig::validate() const {
    if (num_patients < 2) throw ContractError("generate: need >= 2 patients");
    if (feature_dim < 1) throw ContractError("generate: feature_dim must be >= 1");
    if (min_slides < 1 || max_slides < min_slides)
        throw ContractError("generate: bad slides-per-patient range");
    if (min_patches < 1 || max_patches < min_patches)
        throw ContractError("generate: bad patches-per-slide range");
    if (!(class_separation > 0.0))
        throw ContractError("generate: class separation must be positive");
    if (noise < 0.0) throw ContractError("generate: noise must be >= 0");
    if (signal_fraction <= 0.0 || signal_fraction > 1.0)
        throw ContractError("generate: signal fraction must lie in (0, 1]");
}

void write_embedding_file(const EmbeddingBag& bag, const std::string& path) {
    if (bag.rows.empty()) throw ContractError("write_embedding_file: empty bag");
    if (bag.features.size() !=
        bag.rows.size() * static_cast<std::size_t>(bag.feature_dim))
        throw ShapeError("write_embedding_file: feature buffer size mismatch");

    if (is_csv(path)) {
        std::string text;
        char buf[32];
        for (std::size_t i = 0; i < bag.rows.size(); ++i) {
            text += bag.rows[i].slide_id + "," + bag.rows[i].stain;
            for (int j = 0; j < bag.feature_dim; ++j) {
                std::snprintf(buf, sizeof(buf), "%.17g",
                              bag.features[i * bag.feature_dim + j]);
                text += ",";
                text += buf;
            }
            text += "\n";
        }
        write_file_atomic(path, text);
        return;
    }

    json meta = json::array();
    for (const EmbeddingRowMeta& r : bag.rows)
        meta.push_back(json::array({r.slide_id, r.stain}));
    const json header{{"rows", bag.num_rows()},
                      {"feature_dim", bag.feature_dim},
                      {"row_meta", meta}};
    write_file_atomic(path, header.dump() + "\n" + doubles_to_bytes(bag.features));
}

EmbeddingBag read_embedding_file(const std::string& path) {
    if (is_csv(path)) return read_embedding_csv(path);

    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string header_line;
    if (!std::getline(in, header_line))
        throw FormatError(path + ": missing header line");
    json header;
    try {
        header = json::parse(header_line);
    } catch (const json::exception& e) {
        throw FormatError(path + ": bad header: " + e.what());
    }

    EmbeddingBag bag;
    try {
        const int rows = header.at("rows").get<int>();
        bag.feature_dim = header.at("feature_dim").get<int>();
        if (rows < 1 || bag.feature_dim < 1)
            throw FormatError(path + ": non-positive dimensions in header");
        const json& meta = header.at("row_meta");
        if (static_cast<int>(meta.size()) != rows)
            throw FormatError(path + ": row_meta size does not match rows");
        for (const json& r : meta)
            bag.rows.push_back({r.at(0).get<std::string>(), r.at(1).get<std::string>()});
    } catch (const json::exception& e) {
        throw FormatError(path + ": bad header: " + e.what());
    }

    const std::size_t n = bag.rows.size() * static_cast<std::size_t>(bag.feature_dim);
    bag.features.resize(n);
    in.read(reinterpret_cast<char*>(bag.features.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != n * sizeof(double))
        throw FormatError(path + ": truncated feature payload");
    return bag;
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError(path + ": bad manifest JSON: " + e.what());
    }
    DatasetManifest m;
    try {
        m.feature_dim = j.at("feature_dim").get<int>();
        for (const json& p : j.at("patients"))
            m.patients.push_back({p.at("id").get<std::string>(),
                                  p.at("label").get<int>(),
                                  p.at("path").get<std::string>()});
        if (j.contains("stain")) m.stain_filter = j.at("stain").get<std::string>();
    } catch (const json::exception& e) {
        throw FormatError(path + ": bad manifest JSON: " + e.what());
    }
    return m;
}

std::vector<EmbeddingBag> load_bags(const std::string& manifest_path) {
    const DatasetManifest manifest = load_manifest(manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();

    std::vector<EmbeddingBag> bags;
    for (const ManifestPatient& p : manifest.patients) {
        if (p.label != 0 && p.label != 1)
            throw FormatError("patient " + p.id + ": label must be 0 or 1, got " +
                              std::to_string(p.label));
        fs::path path(p.path);
        if (path.is_relative()) path = base / path;
        EmbeddingBag bag = read_embedding_file(path.string());
        bag.patient_id = p.id;
        bag.label = p.label;
        if (bag.feature_dim != manifest.feature_dim)
            throw FormatError("patient " + p.id + ": feature dim " +
                              std::to_string(bag.feature_dim) +
                              " does not match manifest " +
                              std::to_string(manifest.feature_dim));
        if (!manifest.stain_filter.empty()) {
            EmbeddingBag filtered;
            filtered.patient_id = bag.patient_id;
            filtered.label = bag.label;
            filtered.feature_dim = bag.feature_dim;
            for (int i = 0; i < bag.num_rows(); ++i) {
                if (bag.rows[i].stain != manifest.stain_filter) continue;
                filtered.rows.push_back(bag.rows[i]);
                filtered.features.insert(
                    filtered.features.end(),
                    bag.features.begin() + static_cast<std::size_t>(i) * bag.feature_dim,
                    bag.features.begin() +
                        static_cast<std::size_t>(i + 1) * bag.feature_dim);
            }
            if (filtered.rows.empty())
                throw FormatError("patient " + p.id + ": stain filter '" +
                                  manifest.stain_filter + "' leaves no rows");
            bag = std::move(filtered);
        }
        bags.push_back(std::move(bag));
    }
    return bags;
}

std::string generate_synthetic(const GenerateConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    fs::create_directories(out_dir);
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<int> slide_count(cfg.min_slides, cfg.max_slides);
    std::uniform_int_distribution<int> patch_count(cfg.min_patches, cfg.max_patches);

    // fixed unit signal direction
    std::vector<double> dir(cfg.feature_dim);
    double norm = 0.0;
    for (double& v : dir) {
        v = gauss(rng);
        norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : dir) v /= norm;

    json patients = json::array();
    for (int p = 0; p < cfg.num_patients; ++p) {
        char id[32];
        std::snprintf(id, sizeof(id), "patient_%03d", p);
        const int label = p % 2;

        EmbeddingBag bag;
        bag.patient_id = id;
        bag.label = label;
        bag.feature_dim = cfg.feature_dim;
        const int slides = slide_count(rng);
        for (int s = 0; s < slides; ++s) {
            const int patches = patch_count(rng);
            const std::string slide_id = std::string(id) + "_s" + std::to_string(s);
            for (int q = 0; q < patches; ++q)
                bag.rows.push_back({slide_id, kStains[s % 4]});
        }
        const int total = bag.num_rows();
        bag.features.resize(static_cast<std::size_t>(total) * cfg.feature_dim);
        for (double& v : bag.features) v = cfg.noise * gauss(rng);

        if (label == 1) {
            // only a seeded fraction of instances carries the class signal
            int signal = static_cast<int>(std::llround(cfg.signal_fraction * total));
            signal = std::clamp(signal, 1, total);
            std::vector<int> rows(total);
            std::iota(rows.begin(), rows.end(), 0);
            std::shuffle(rows.begin(), rows.end(), rng);
            for (int i = 0; i < signal; ++i)
                for (int j = 0; j < cfg.feature_dim; ++j)
                    bag.features[static_cast<std::size_t>(rows[i]) * cfg.feature_dim + j] +=
                        cfg.class_separation * dir[j];
        }

        const std::string file = std::string(id) + ".bin";
        write_embedding_file(bag, (fs::path(out_dir) / file).string());
        patients.push_back({{"id", id}, {"label", label}, {"path", file}});
    }

    const json manifest{{"feature_dim", cfg.feature_dim}, {"patients", patients}};
    const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
    write_file_atomic(manifest_path, manifest.dump(2) + "\n");
    return manifest_path;
}

PatchGraph bag_graph(const EmbeddingBag& bag, int k) {
    if (bag.rows.empty()) throw ContractError("bag_graph: empty bag");
    PatchGraph g = build_knn_graph(bag.features, bag.num_rows(), bag.feature_dim, k);
    g.slide_names.clear();
    g.slide_tag.assign(bag.num_rows(), 0);
    for (int i = 0; i < bag.num_rows(); ++i) {
        const std::string& slide = bag.rows[i].slide_id;
        int tag = -1;
        for (std::size_t t = 0; t < g.slide_names.size(); ++t)
            if (g.slide_names[t] == slide) {
                tag = static_cast<int>(t);
                break;
            }
        if (tag < 0) {
            tag = static_cast<int>(g.slide_names.size());
            g.slide_names.push_back(slide);
        }
        g.slide_tag[i] = tag;
    }
    return g;
}

void save_checkpoint(const ModelParams& params, const ModelConfig& cfg,
                     const std::string& path) {
    const auto named = params.named_arrays();
    json arrays = json::array();
    std::size_t offset = 0;
    std::string payload;
    for (const auto& [name, value] : named) {
        arrays.push_back({{"name", name},
                          {"shape", value.shape()},
                          {"offset", offset}});
        payload += doubles_to_bytes(value.data());
        offset += value.numel() * sizeof(double);
    }
    const json header{{"format", "mustang-checkpoint-v1"},
                      {"config", config_to_json(cfg)},
                      {"arrays", arrays},
                      {"payload_bytes", offset}};
    write_file_atomic(path, header.dump() + "\n" + payload);
}

std::pair<ModelParams, ModelConfig> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path);
    std::string header_line;
    if (!std::getline(in, header_line))
        throw CheckpointError(path + ": missing header");
    json header;
    try {
        header = json::parse(header_line);
    } catch (const json::exception& e) {
        throw CheckpointError(path + ": corrupted header: " + e.what());
    }

    ModelConfig cfg;
    std::size_t payload_bytes = 0;
    try {
        if (header.at("format").get<std::string>() != "mustang-checkpoint-v1")
            throw CheckpointError(path + ": unknown format");
        cfg = config_from_json(header.at("config"));
        payload_bytes = header.at("payload_bytes").get<std::size_t>();
    } catch (const json::exception& e) {
        throw CheckpointError(path + ": corrupted header: " + e.what());
    }

    std::string payload(payload_bytes, '\0');
    in.read(payload.data(), static_cast<std::streamsize>(payload_bytes));
    if (static_cast<std::size_t>(in.gcount()) != payload_bytes)
        throw CheckpointError(path + ": truncated payload");

    ModelParams params = init_params(cfg, 0);
    auto named = params.named_arrays();
    const json& arrays = header.at("arrays");
    if (arrays.size() != named.size())
        throw CheckpointError(path + ": array registry does not match config");
    try {
        for (std::size_t i = 0; i < named.size(); ++i) {
            const json& entry = arrays.at(i);
            auto& [name, value] = named[i];
            if (entry.at("name").get<std::string>() != name)
                throw CheckpointError(path + ": unexpected array '" +
                                      entry.at("name").get<std::string>() +
                                      "', expected '" + name + "'");
            if (entry.at("shape").get<std::vector<int>>() != value.shape())
                throw CheckpointError(path + ": shape mismatch for '" + name + "'");
            const std::size_t offset = entry.at("offset").get<std::size_t>();
            const std::size_t bytes = value.numel() * sizeof(double);
            if (offset + bytes > payload_bytes)
                throw CheckpointError(path + ": offset for '" + name +
                                      "' exceeds payload");
            std::memcpy(value.data().data(), payload.data() + offset, bytes);
        }
    } catch (const json::exception& e) {
        throw CheckpointError(path + ": corrupted header: " + e.what());
    }
    return {std::move(params), cfg};
}

std::string model_config_to_json_string(const ModelConfig& cfg) {
    return config_to_json(cfg).dump(2);
}

ModelConfig model_config_from_json_string(const std::string& text) {
    try {
        return config_from_json(json::parse(text));
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad model config JSON: ") + e.what());
    }
}

}  // namespace mustang

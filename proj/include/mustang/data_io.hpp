#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mustang/knn_graph.hpp"
#include "mustang/model.hpp"

namespace mustang {

struct EmbeddingRowMeta {
    std::string slide_id;
    std::string stain;
};

// One patient's stacked patch feature vectors with slide provenance and
// a binary patient-level label.
struct EmbeddingBag {
    std::string patient_id;
    int label = 0;
    int feature_dim = 0;
    std::vector<EmbeddingRowMeta> rows;
    std::vector<double> features;  // [rows x feature_dim], row-major

    int num_rows() const { return static_cast<int>(rows.size()); }
};

struct ManifestPatient {
    std::string id;
    int label = 0;
    std::string path;
};

struct DatasetManifest {
    int feature_dim = 0;
    std::vector<ManifestPatient> patients;
    std::string stain_filter;  // empty = keep all stains
};

DatasetManifest load_manifest(const std::string& path);

// Loads every patient bag listed in the manifest, applying the optional
// stain filter. Fails with a diagnostic naming the offending patient.
std::vector<EmbeddingBag> load_bags(const std::string& manifest_path);

// Embedding file: one JSON header line (row count, feature dim, per-row
// slide/stain table) followed by little-endian doubles. A `.csv` path is
// read/written as `slide_id,stain,v0,...` text instead.
void write_embedding_file(const EmbeddingBag& bag, const std::string& path);
EmbeddingBag read_embedding_file(const std::string& path);

struct GenerateConfig {
    int num_patients = 40;
    int feature_dim = 64;
    int min_slides = 2;
    int max_slides = 4;
    int min_patches = 20;
    int max_patches = 50;
    double class_separation = 1.0;  // delta, along a fixed unit direction
    double noise = 0.25;            // sigma
    double signal_fraction = 0.2;   // informative patches in positive bags
    std::uint64_t seed = 0;

    void validate() const;
};

// Writes one embedding file per patient plus manifest.json; byte-identical
// for identical configs. Returns the manifest path.
std::string generate_synthetic(const GenerateConfig& cfg, const std::string& out_dir);

// Directed k-NN graph for one bag, carrying slide tags and row origins.
PatchGraph bag_graph(const EmbeddingBag& bag, int k);

// Checkpoint: one JSON header line (config + array registry with shapes
// and payload byte offsets) followed by little-endian doubles.
void save_checkpoint(const ModelParams& params, const ModelConfig& cfg,
                     const std::string& path);
std::pair<ModelParams, ModelConfig> load_checkpoint(const std::string& path);

std::string model_config_to_json_string(const ModelConfig& cfg);
ModelConfig model_config_from_json_string(const std::string& text);

}  // namespace mustang

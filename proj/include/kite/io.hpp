#pragma once

// Interchange formats: binary/CSV feature files, model manifests, target
// lists and ground-truth tables.
//
// Feature file (little-endian):
//   "KFEA" | u8 version=1 | u8 dtype=1 (float32) | u16 reserved=0 |
//   u64 n | u64 d | n*d float32, row-major | u8 has_labels | [n x u32 labels]
//
// CSV variant: header "label,f0,...,f{d-1}", one sample per line, label -1
// meaning absent.

#include "kite/estimators.hpp"
#include "kite/evaluation.hpp"
#include "kite/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kite::io {

inline constexpr std::uint8_t kFeatureFormatVersion = 1;
inline constexpr std::uint8_t kDtypeFloat32 = 1;

struct FeatureFile {
    FeatureMatrix features;
    std::optional<LabelVector> labels;
};

/// Binary encoding. Throws NonFiniteValue if a value is not finite in float32.
std::vector<std::uint8_t> encode_features(const FeatureMatrix &features, const std::optional<LabelVector> &labels);
/// Throws BadMagic, UnsupportedVersion, TruncatedPayload, NonFiniteValue, SchemaError.
FeatureFile decode_features(std::span<const std::uint8_t> bytes, Provenance provenance = Provenance::pretrained);

/// Chooses CSV for a ".csv" extension and the binary layout otherwise.
void write_features(const std::filesystem::path &path, const FeatureMatrix &features,
                    const std::optional<LabelVector> &labels = std::nullopt);
FeatureFile read_features(const std::filesystem::path &path, Provenance provenance = Provenance::pretrained);

/// Labels from a feature file (binary or CSV) or a plain text file with one
/// integer per line (".txt").
LabelVector read_labels(const std::filesystem::path &path);

struct ManifestEntry {
    std::string model_id;
    /// Feature file for single-target use ("feature_file").
    std::optional<std::filesystem::path> feature_file;
    /// Per-target feature files ("feature_files": {target_id: path}).
    std::map<std::string, std::filesystem::path> feature_files;
    std::string architecture;
    long long layers = 0;
    std::string source_name;
    long long source_size = 0;

    /// Feature file for `target_id`, falling back to feature_file. Throws
    /// MissingFile when neither applies.
    [[nodiscard]] std::filesystem::path features_for(const std::string &target_id) const;
};

struct ModelManifest {
    std::vector<ManifestEntry> models;
};

/// Paths are resolved relative to the manifest's directory. Throws
/// DuplicateModelId, MissingFile, SchemaError.
ModelManifest load_manifest(const std::filesystem::path &path);
ModelManifest parse_manifest(const nlohmann::json &doc, const std::filesystem::path &base_dir);
/// Writes paths relative to the manifest directory when they lie below it.
void write_manifest(const std::filesystem::path &path, const ModelManifest &manifest);

struct TargetEntry {
    std::string target_id;
    /// Raw input features of the target pool, labels embedded.
    std::filesystem::path features;
    /// Optional separate label file.
    std::optional<std::filesystem::path> labels;
    /// |D_t| for the heuristic baseline; defaults to the pool size.
    std::optional<long long> size;
};

/// {"targets": [{"target_id", "features", "labels"?, "size"?}, ...]}
std::vector<TargetEntry> load_targets(const std::filesystem::path &path);
void write_targets(const std::filesystem::path &path, const std::vector<TargetEntry> &targets);

/// CSV with header model_id,target_id,accuracy (fraction) or
/// model_id,target_id,accuracy_percent. Further columns are read as estimator
/// scores keyed by their header name. Throws SchemaError on malformed input.
ScoreTable load_score_table(const std::filesystem::path &path);
ScoreTable parse_score_table(const std::string &text);
std::string format_ground_truth(const std::vector<ScoreRow> &rows, AccuracyUnit unit);

std::string read_text(const std::filesystem::path &path);
/// Creates parent directories as needed.
void write_text(const std::filesystem::path &path, const std::string &text);

}  // namespace kite::io

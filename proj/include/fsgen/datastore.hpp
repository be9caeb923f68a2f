#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "fsgen/matrix.hpp"
#include "fsgen/rng.hpp"

namespace fsgen {

enum class Split : std::uint8_t { Base = 0, Val = 1, Novel = 2 };

// Labeled feature vectors plus the class split map. Class ids are dense
// non-negative integers; display names live in a sidecar manifest. Immutable
// after load, safe for concurrent readers.
struct FeatureSet {
    Matrix features;  // num_samples x feat_dim
    std::vector<std::uint32_t> labels;
    std::vector<Split> class_split;  // indexed by class id

    std::size_t sample_count() const { return features.rows; }
    std::size_t feat_dim() const { return features.cols; }
    std::size_t class_count() const { return class_split.size(); }
    std::vector<std::uint32_t> classes_in_split(Split split) const;
    void validate() const;
};

struct SemanticTable {
    Matrix embeddings;  // num_classes x sem_dim, row index = class id

    std::size_t sem_dim() const { return embeddings.cols; }
    std::size_t class_count() const { return embeddings.rows; }
    std::span<const double> embedding(std::uint32_t class_id) const;  // LookupError on miss
};

struct Episode {
    std::size_t way = 0;
    std::size_t shot = 0;
    std::size_t queries_per_class = 0;
    std::vector<std::uint32_t> class_ids;           // way entries
    std::vector<std::vector<std::size_t>> support;  // way x shot, row indices into FeatureSet
    std::vector<std::vector<std::size_t>> query;    // way x queries_per_class
};

// Binary container, little-endian:
//   magic "FSF1" | u32 version=1 | u32 num_samples | u32 feat_dim
//   | u32 num_classes | u32 sem_dim | features f32 row-major | labels u32
//   | split codes u8 per class | semantic embeddings f32 row-major by class id
void save_features(const FeatureSet& set, const SemanticTable& table,
                   const std::filesystem::path& path);
std::pair<FeatureSet, SemanticTable> load_features(const std::filesystem::path& path);

// Sidecar manifest: one line per class, "<class_id>\t<name>".
void save_manifest(const std::vector<std::string>& class_names, const std::filesystem::path& path);
std::vector<std::string> load_manifest(const std::filesystem::path& path);

// Row indices of all samples labeled class_id, in stored order.
std::vector<std::size_t> class_sample_indices(const FeatureSet& set, std::uint32_t class_id);
Matrix class_features(const FeatureSet& set, std::uint32_t class_id);

// Every Base-split row, grouped by ascending class id: the training universe
// for the feature generator.
std::pair<Matrix, std::vector<std::uint32_t>> base_training_rows(const FeatureSet& set);

// Uniform sampling without replacement of Novel classes, then of per-class
// support/query rows. Deterministic given the rng state.
Episode sample_episode(const FeatureSet& set, std::size_t way, std::size_t shot,
                       std::size_t queries_per_class, Rng& rng);

}  // namespace fsgen

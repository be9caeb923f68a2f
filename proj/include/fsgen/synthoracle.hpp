#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fsgen/datastore.hpp"
#include "fsgen/matrix.hpp"
#include "fsgen/protoclass.hpp"
#include "fsgen/rng.hpp"

namespace fsgen {

struct SynthConfig {
    std::size_t num_base_classes = 32;
    std::size_t num_novel_classes = 8;
    std::size_t samples_per_class = 200;
    std::size_t feat_dim = 32;
    std::size_t sem_dim = 16;
    double noise_sigma = 0.1;
    double outlier_fraction = 0.1;  // in [0, 1)
    double outlier_shift = 6.0;     // sigma multiples
    std::uint64_t seed = 0;

    void validate() const;
};

// Hidden ground truth behind a planted benchmark: semantic vectors map through
// a fixed linear transform to nonnegative class means.
struct PlantedTruth {
    Matrix mixing;       // feat_dim x sem_dim
    Matrix class_means;  // num_classes x feat_dim, relu(W a_y)
    std::vector<std::vector<std::size_t>> outliers;  // per class, positions within the class block
};

struct SynthData {
    FeatureSet features;
    SemanticTable semantics;
    PlantedTruth truth;
};

// Semantic vectors uniform on the unit sphere; W entries N(0, 1/sqrt(sem_dim));
// clean samples relu(mu* + N(0, sigma^2 I)), outliers use shift*sigma noise.
// Classes 0..num_base-1 are Base, the rest Novel. Deterministic given the rng.
SynthData generate_synth(const SynthConfig& config, Rng& rng);

struct DistanceRow {
    std::uint32_t class_id = 0;
    double distance = 0.0;
};

// L2 distance of each prototype to its planted class mean.
std::vector<DistanceRow> prototype_distance_report(const PlantedTruth& truth,
                                                   const std::vector<Prototype>& prototypes);

// Truth file: magic "TRU1" | u32 feat_dim | u32 sem_dim | u32 num_classes
// | W f64 | class means f64 | per class u32 count + u32 outlier indices.
void save_truth(const PlantedTruth& truth, const std::filesystem::path& path);
PlantedTruth load_truth(const std::filesystem::path& path);

}  // namespace fsgen

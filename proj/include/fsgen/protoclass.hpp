#pragma once

#include <cstdint>
#include <vector>

#include "fsgen/cvae.hpp"
#include "fsgen/datastore.hpp"
#include "fsgen/matrix.hpp"

namespace fsgen {

enum class Provenance { SupportOnly, GeneratedOnly, Combined };

struct Prototype {
    std::uint32_t class_id = 0;
    Vec vector;
    Provenance provenance = Provenance::SupportOnly;
    double weight_generated = 0.0;
    double weight_support = 1.0;
};

enum class ClassifierKind { NearestPrototype, OneNN, LogisticRegression, LinearSVM };
enum class Method { Baseline, Svae, Rsvae, ZeroShot };
enum class DistanceMetric { Euclidean, Cosine };

Vec prototype_mean(const Matrix& features);

// w_g * p_gen + w_s * p_sup; weights must be nonnegative and sum to 1 within
// 1e-9.
Vec combine_prototypes(std::span<const double> p_gen, std::span<const double> p_sup, double w_g,
                       double w_s);

Prototype zero_shot_prototype(const CvaeModel& model, std::uint32_t class_id,
                              std::span<const double> a, std::size_t count, Rng& rng);

// Nearest prototype; ties go to the lowest class id. Euclidean by default,
// cosine distance behind the flag.
std::uint32_t classify_nearest(std::span<const double> query,
                               const std::vector<Prototype>& prototypes,
                               DistanceMetric metric = DistanceMetric::Euclidean);

// Label of the nearest reference row; ties go to the lowest row index.
std::uint32_t one_nn_classify(std::span<const double> query, const Matrix& references,
                              const std::vector<std::uint32_t>& labels,
                              DistanceMetric metric = DistanceMetric::Euclidean);

struct LinearFitConfig {
    double lr = 0.1;
    std::size_t steps = 300;
    double reg = 1e-3;  // L2 weight penalty
};

struct TaskModel {
    ClassifierKind kind = ClassifierKind::NearestPrototype;
    DistanceMetric metric = DistanceMetric::Euclidean;
    std::vector<std::uint32_t> class_ids;  // ascending

    std::vector<Prototype> prototypes;  // NearestPrototype
    Matrix reference_features;          // OneNN
    std::vector<std::uint32_t> reference_labels;
    Matrix weights;  // LogisticRegression / LinearSVM, one row per class id
    Vec bias;

    std::uint32_t classify(std::span<const double> query) const;
};

// Multinomial softmax regression, full-batch gradient descent from zero init.
TaskModel fit_logreg(const Matrix& features, const std::vector<std::uint32_t>& labels,
                     const LinearFitConfig& config);

// One-vs-rest linear SVM, L2-regularized hinge loss, sub-gradient descent from
// zero init.
TaskModel fit_linear_svm(const Matrix& features, const std::vector<std::uint32_t>& labels,
                         const LinearFitConfig& config);

struct TaskBuildConfig {
    Method method = Method::Baseline;
    ClassifierKind classifier = ClassifierKind::NearestPrototype;
    DistanceMetric metric = DistanceMetric::Euclidean;
    std::size_t gen_count = 500;
    double weight_generated = 0.5;
    double weight_support = 0.5;
    LinearFitConfig fit;
};

// Assembles the per-episode classifier. Baseline uses support features only;
// Svae/Rsvae blend generated and support prototypes (or pool generated rows
// into the training set for OneNN/LR/SVM); ZeroShot uses generated features
// only. Non-Baseline methods require a trained model.
TaskModel build_task_model(const FeatureSet& set, const SemanticTable& semantics,
                           const Episode& episode, const TaskBuildConfig& config,
                           const CvaeModel* model, Rng& rng);

}  // namespace fsgen

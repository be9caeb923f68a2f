#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "fsgen/datastore.hpp"
#include "fsgen/matrix.hpp"
#include "fsgen/rng.hpp"

namespace fsgen {

// Default blend toward the scaled identity; keeps high-dimensional estimates
// positive definite when the per-class sample count is close to the feature
// dimension.
inline constexpr double kDefaultShrinkage = 0.1;

struct ClassGaussian {
    Vec mean;
    Matrix covariance;  // after shrinkage / ridge
    Matrix cholesky;    // lower triangular L with L L^T = covariance
    double log_det = 0.0;
    double alpha = 0.0;       // requested shrinkage
    double alpha_used = 0.0;  // after any escalation
    double ridge_used = 0.0;  // identity ridge applied when shrinkage alone fails
    std::size_t sample_count = 0;

    std::size_t dim() const { return mean.size(); }
};

// Arithmetic mean per dimension.
Vec estimate_mean(const Matrix& features);

// Unbiased 1/(n-1) covariance, then shrunk: (1-alpha)*S + alpha*(tr S / d)*I.
// If the Cholesky factorization fails, alpha escalates by doubling from 1e-4;
// if even alpha=1 fails (zero trace), an identity ridge of
// 1e-4 * mean(feature^2) + 1e-12 is applied, doubling until SPD. The values
// actually used are recorded on the result.
ClassGaussian estimate_covariance(const Matrix& features, double alpha);

double mahalanobis_squared(const ClassGaussian& g, std::span<const double> x);

// log of the multivariate normal density: -(d log 2pi + log|S| + m^2(x)) / 2.
double log_density(const ClassGaussian& g, std::span<const double> x);

// Mode-normalized density exp(-m^2(x)/2), in (0, 1]; the score thresholded by
// the selection step.
double representativeness(const ClassGaussian& g, std::span<const double> x);

struct SelectionResult {
    std::uint32_t class_id = 0;
    std::vector<std::size_t> selected;  // FeatureSet row indices, ascending
    Vec scores;                         // per class sample, in stored order
    double threshold = 0.0;
    double fraction_selected = 0.0;
};

SelectionResult select_representative(const FeatureSet& set, std::uint32_t class_id,
                                      double threshold, double alpha = kDefaultShrinkage);

// Greedy exemplar selection: step t picks the sample keeping the running mean
// of the selected set closest to the class mean. Ties go to the lowest index.
std::vector<std::size_t> herding_select(const Matrix& features, std::size_t count);

// Lloyd's k-means (k = count) with k-means++ seeding; returns the sample
// nearest each final centroid, deduplicated.
std::vector<std::size_t> kmeans_select(const Matrix& features, std::size_t count, Rng& rng);

struct ClassFraction {
    std::uint32_t class_id = 0;
    double fraction_selected = 0.0;
};

// Runs select_representative over every Base class in ascending id order.
std::vector<ClassFraction> selection_stats(const FeatureSet& set, double threshold,
                                           double alpha = kDefaultShrinkage);

// CSV with header "class_id,fraction_selected,threshold".
void write_selection_stats_csv(std::ostream& out, const std::vector<ClassFraction>& stats,
                               double threshold);

}  // namespace fsgen

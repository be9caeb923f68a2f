#include "fsgen/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "fsgen/errors.hpp"

namespace fsgen {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)

double log_det_from_cholesky(const Matrix& lower) {
    double sum = 0.0;
    for (std::size_t j = 0; j < lower.rows; ++j) sum += std::log(lower(j, j));
    return 2.0 * sum;
}

Matrix shrink(const Matrix& raw, double alpha) {
    const std::size_t d = raw.rows;
    double trace = 0.0;
    for (std::size_t j = 0; j < d; ++j) trace += raw(j, j);
    const double target = trace / static_cast<double>(d);
    Matrix out(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            out(i, j) = (1.0 - alpha) * raw(i, j) + (i == j ? alpha * target : 0.0);
        }
    }
    return out;
}

}  // namespace

Vec estimate_mean(const Matrix& features) {
    if (features.rows == 0) throw CapacityError("estimate_mean: no samples");
    return column_mean(features);
}

ClassGaussian estimate_covariance(const Matrix& features, double alpha) {
    if (features.rows < 2)
        throw CapacityError("estimate_covariance: needs at least 2 samples, got " +
                            std::to_string(features.rows));
    if (alpha < 0.0 || alpha > 1.0)
        throw ContractError("estimate_covariance: alpha must be in [0,1]");
    if (!all_finite(features.data)) throw NumericError("estimate_covariance: non-finite feature");

    const std::size_t n = features.rows;
    const std::size_t d = features.cols;
    ClassGaussian g;
    g.mean = column_mean(features);
    g.alpha = alpha;
    g.sample_count = n;

    Matrix raw(d, d);
    Vec centered(d);
    for (std::size_t r = 0; r < n; ++r) {
        const auto row = features.row(r);
        for (std::size_t c = 0; c < d; ++c) centered[c] = row[c] - g.mean[c];
        for (std::size_t i = 0; i < d; ++i) {
            const double ci = centered[i];
            double* out = raw.data.data() + i * d;
            for (std::size_t j = i; j < d; ++j) out[j] += ci * centered[j];
        }
    }
    const double inv = 1.0 / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i; j < d; ++j) {
            raw(i, j) *= inv;
            raw(j, i) = raw(i, j);
        }
    }

    double alpha_used = alpha;
    Matrix cov = shrink(raw, alpha_used);
    auto chol = cholesky_lower(cov);
    if (!chol) {
        for (double a = 1e-4; !chol && a <= 1.0; a *= 2.0) {
            const double candidate = std::min(a, 1.0);
            if (candidate <= alpha_used) continue;
            alpha_used = candidate;
            cov = shrink(raw, alpha_used);
            chol = cholesky_lower(cov);
        }
    }
    double ridge = 0.0;
    if (!chol) {
        double mean_sq = 0.0;
        for (double v : features.data) mean_sq += v * v;
        mean_sq /= static_cast<double>(features.data.size());
        for (ridge = 1e-4 * mean_sq + 1e-12; !chol; ridge *= 2.0) {
            cov = shrink(raw, alpha_used);
            for (std::size_t j = 0; j < d; ++j) cov(j, j) += ridge;
            chol = cholesky_lower(cov);
        }
    }

    g.covariance = std::move(cov);
    g.cholesky = std::move(*chol);
    g.log_det = log_det_from_cholesky(g.cholesky);
    g.alpha_used = alpha_used;
    g.ridge_used = ridge;
    return g;
}

double mahalanobis_squared(const ClassGaussian& g, std::span<const double> x) {
    if (x.size() != g.dim())
        throw ShapeError("mahalanobis_squared: point has dim " + std::to_string(x.size()) +
                         ", gaussian has dim " + std::to_string(g.dim()));
    Vec centered(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) centered[i] = x[i] - g.mean[i];
    const Vec w = forward_substitute(g.cholesky, centered);
    double sum = 0.0;
    for (double v : w) sum += v * v;
    return sum;
}

double log_density(const ClassGaussian& g, std::span<const double> x) {
    const double m2 = mahalanobis_squared(g, x);
    return -0.5 * (static_cast<double>(g.dim()) * kLog2Pi + g.log_det + m2);
}

double representativeness(const ClassGaussian& g, std::span<const double> x) {
    return std::exp(-0.5 * mahalanobis_squared(g, x));
}

SelectionResult select_representative(const FeatureSet& set, std::uint32_t class_id,
                                      double threshold, double alpha) {
    if (threshold < 0.0 || threshold >= 1.0)
        throw ContractError("select_representative: threshold must be in [0,1)");
    const auto rows = class_sample_indices(set, class_id);
    const Matrix feats = class_features(set, class_id);
    const ClassGaussian g = estimate_covariance(feats, alpha);

    SelectionResult result;
    result.class_id = class_id;
    result.threshold = threshold;
    result.scores.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const double score = representativeness(g, feats.row(r));
        result.scores.push_back(score);
        if (score > threshold) result.selected.push_back(rows[r]);
    }
    result.fraction_selected =
        static_cast<double>(result.selected.size()) / static_cast<double>(rows.size());
    return result;
}

std::vector<std::size_t> herding_select(const Matrix& features, std::size_t count) {
    const std::size_t n = features.rows;
    if (count < 1 || count > n)
        throw CapacityError("herding_select: count " + std::to_string(count) +
                            " out of range for " + std::to_string(n) + " samples");
    const Vec mean = column_mean(features);
    const std::size_t d = features.cols;

    std::vector<std::size_t> selected;
    std::vector<bool> taken(n, false);
    Vec running_sum(d, 0.0);
    for (std::size_t step = 1; step <= count; ++step) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_index = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            const auto row = features.row(i);
            double dist = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = mean[c] - (running_sum[c] + row[c]) / static_cast<double>(step);
                dist += diff * diff;
            }
            if (dist < best) {
                best = dist;
                best_index = i;
            }
        }
        taken[best_index] = true;
        selected.push_back(best_index);
        const auto row = features.row(best_index);
        for (std::size_t c = 0; c < d; ++c) running_sum[c] += row[c];
    }
    return selected;
}

namespace {

Matrix kmeans_pp_seed(const Matrix& features, std::size_t k, Rng& rng) {
    const std::size_t n = features.rows;
    Matrix centroids(k, features.cols);
    std::size_t first = rng.uniform_below(n);
    std::copy(features.row(first).begin(), features.row(first).end(), centroids.row(0).begin());

    Vec min_d2(n, std::numeric_limits<double>::infinity());
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d2 = squared_distance(features.row(i), centroids.row(c - 1));
            if (d2 < min_d2[i]) min_d2[i] = d2;
            total += min_d2[i];
        }
        std::size_t chosen = n - 1;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            for (std::size_t i = 0; i < n; ++i) {
                target -= min_d2[i];
                if (target <= 0.0) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = rng.uniform_below(n);  // all points coincide with a centroid
        }
        std::copy(features.row(chosen).begin(), features.row(chosen).end(),
                  centroids.row(c).begin());
    }
    return centroids;
}

}  // namespace

std::vector<std::size_t> kmeans_select(const Matrix& features, std::size_t count, Rng& rng) {
    const std::size_t n = features.rows;
    if (count < 1 || count > n)
        throw CapacityError("kmeans_select: count " + std::to_string(count) + " out of range for " +
                            std::to_string(n) + " samples");
    const std::size_t d = features.cols;
    const std::size_t k = count;

    Matrix centroids = kmeans_pp_seed(features, k, rng);
    std::vector<std::size_t> assignment(n, 0);
    constexpr std::size_t kMaxIterations = 100;
    constexpr double kShiftTolerance = 1e-6;

    for (std::size_t iter = 0; iter < kMaxIterations; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t best_c = 0;
            for (std::size_t c = 0; c < k; ++c) {
                const double d2 = squared_distance(features.row(i), centroids.row(c));
                if (d2 < best) {
                    best = d2;
                    best_c = c;
                }
            }
            assignment[i] = best_c;
        }

        Matrix sums(k, d);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = features.row(i);
            auto sum = sums.row(assignment[i]);
            for (std::size_t c = 0; c < d; ++c) sum[c] += row[c];
            counts[assignment[i]] += 1;
        }
        double max_shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;  // empty cluster keeps its centroid
            auto centroid = centroids.row(c);
            double shift = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double updated = sums(c, j) / static_cast<double>(counts[c]);
                const double delta = updated - centroid[j];
                shift += delta * delta;
                centroid[j] = updated;
            }
            max_shift = std::max(max_shift, std::sqrt(shift));
        }
        if (max_shift < kShiftTolerance) break;
    }

    // Nearest sample per centroid; collisions fall through to the next-nearest
    // unselected sample.
    std::vector<std::size_t> selected;
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<std::pair<double, std::size_t>> order;
        order.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            order.emplace_back(squared_distance(features.row(i), centroids.row(c)), i);
        std::sort(order.begin(), order.end());
        for (const auto& [d2, index] : order) {
            (void)d2;
            if (!taken[index]) {
                taken[index] = true;
                selected.push_back(index);
                break;
            }
        }
    }
    return selected;
}

std::vector<ClassFraction> selection_stats(const FeatureSet& set, double threshold, double alpha) {
    std::vector<ClassFraction> stats;
    for (std::uint32_t class_id : set.classes_in_split(Split::Base)) {
        const auto result = select_representative(set, class_id, threshold, alpha);
        stats.push_back({class_id, result.fraction_selected});
    }
    return stats;
}

void write_selection_stats_csv(std::ostream& out, const std::vector<ClassFraction>& stats,
                               double threshold) {
    out << "class_id,fraction_selected,threshold\n";
    char line[96];
    for (const auto& row : stats) {
        std::snprintf(line, sizeof(line), "%u,%.6f,%.6f\n", row.class_id, row.fraction_selected,
                      threshold);
        out << line;
    }
}

}  // namespace fsgen

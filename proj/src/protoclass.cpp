#include "fsgen/protoclass.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "fsgen/errors.hpp"

namespace fsgen {

Vec prototype_mean(const Matrix& features) {
    if (features.rows == 0) throw CapacityError("prototype_mean: no features");
    return column_mean(features);
}

Vec combine_prototypes(std::span<const double> p_gen, std::span<const double> p_sup, double w_g,
                       double w_s) {
    if (p_gen.size() != p_sup.size()) throw ShapeError("combine_prototypes: dim mismatch");
    if (w_g < 0.0 || w_s < 0.0 || std::abs(w_g + w_s - 1.0) > 1e-9)
        throw ContractError("combine_prototypes: weights must be nonnegative and sum to 1");
    Vec out(p_gen.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = w_g * p_gen[i] + w_s * p_sup[i];
    return out;
}

Prototype zero_shot_prototype(const CvaeModel& model, std::uint32_t class_id,
                              std::span<const double> a, std::size_t count, Rng& rng) {
    const Matrix generated = generate_features(model, a, count, rng);
    Prototype p;
    p.class_id = class_id;
    p.vector = prototype_mean(generated);
    p.provenance = Provenance::GeneratedOnly;
    p.weight_generated = 1.0;
    p.weight_support = 0.0;
    return p;
}

namespace {

// Squared L2, or 1 - cosine similarity. Zero vectors fall back to L2 so the
// comparison stays total.
double pair_distance(std::span<const double> a, std::span<const double> b, DistanceMetric metric) {
    if (metric == DistanceMetric::Euclidean) return squared_distance(a, b);
    const double na = dot(a, a);
    const double nb = dot(b, b);
    if (na == 0.0 || nb == 0.0) return squared_distance(a, b);
    return 1.0 - dot(a, b) / std::sqrt(na * nb);
}

}  // namespace

std::uint32_t classify_nearest(std::span<const double> query,
                               const std::vector<Prototype>& prototypes, DistanceMetric metric) {
    if (prototypes.empty()) throw CapacityError("classify_nearest: no prototypes");
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_id = 0;
    for (const Prototype& p : prototypes) {
        const double d = pair_distance(query, p.vector, metric);
        if (d < best || (d == best && p.class_id < best_id)) {
            best = d;
            best_id = p.class_id;
        }
    }
    return best_id;
}

std::uint32_t one_nn_classify(std::span<const double> query, const Matrix& references,
                              const std::vector<std::uint32_t>& labels, DistanceMetric metric) {
    if (references.rows == 0) throw CapacityError("one_nn_classify: empty reference set");
    if (labels.size() != references.rows) throw ShapeError("one_nn_classify: label count mismatch");
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_row = 0;
    for (std::size_t i = 0; i < references.rows; ++i) {
        const double d = pair_distance(query, references.row(i), metric);
        if (d < best) {
            best = d;
            best_row = i;
        }
    }
    return labels[best_row];
}

namespace {

std::vector<std::uint32_t> distinct_sorted(const std::vector<std::uint32_t>& labels) {
    std::set<std::uint32_t> s(labels.begin(), labels.end());
    return {s.begin(), s.end()};
}

std::size_t class_index(const std::vector<std::uint32_t>& class_ids, std::uint32_t label) {
    const auto it = std::lower_bound(class_ids.begin(), class_ids.end(), label);
    return static_cast<std::size_t>(it - class_ids.begin());
}

}  // namespace

std::uint32_t TaskModel::classify(std::span<const double> query) const {
    switch (kind) {
        case ClassifierKind::NearestPrototype: return classify_nearest(query, prototypes, metric);
        case ClassifierKind::OneNN:
            return one_nn_classify(query, reference_features, reference_labels, metric);
        case ClassifierKind::LogisticRegression:
        case ClassifierKind::LinearSVM: {
            double best = -std::numeric_limits<double>::infinity();
            std::uint32_t best_id = class_ids.front();
            for (std::size_t c = 0; c < class_ids.size(); ++c) {
                const double score = dot(weights.row(c), query) + bias[c];
                if (score > best) {
                    best = score;
                    best_id = class_ids[c];
                }
            }
            return best_id;
        }
    }
    throw ContractError("TaskModel: unknown classifier kind");
}

TaskModel fit_logreg(const Matrix& features, const std::vector<std::uint32_t>& labels,
                     const LinearFitConfig& config) {
    const auto class_ids = distinct_sorted(labels);
    if (class_ids.size() < 2) throw ContractError("fit_logreg: needs at least 2 distinct labels");
    const std::size_t n = features.rows;
    const std::size_t d = features.cols;
    const std::size_t c_count = class_ids.size();

    TaskModel model;
    model.kind = ClassifierKind::LogisticRegression;
    model.class_ids = class_ids;
    model.weights = Matrix(c_count, d);
    model.bias = Vec(c_count, 0.0);

    std::vector<std::size_t> target(n);
    for (std::size_t i = 0; i < n; ++i) target[i] = class_index(class_ids, labels[i]);

    Vec logits(c_count), probs(c_count);
    Matrix w_grad(c_count, d);
    Vec b_grad(c_count);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t step = 0; step < config.steps; ++step) {
        std::fill(w_grad.data.begin(), w_grad.data.end(), 0.0);
        std::fill(b_grad.begin(), b_grad.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto x = features.row(i);
            double max_logit = -std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < c_count; ++c) {
                logits[c] = dot(model.weights.row(c), x) + model.bias[c];
                max_logit = std::max(max_logit, logits[c]);
            }
            double denom = 0.0;
            for (std::size_t c = 0; c < c_count; ++c) {
                probs[c] = std::exp(logits[c] - max_logit);
                denom += probs[c];
            }
            for (std::size_t c = 0; c < c_count; ++c) {
                const double delta = probs[c] / denom - (c == target[i] ? 1.0 : 0.0);
                auto g = w_grad.row(c);
                for (std::size_t j = 0; j < d; ++j) g[j] += delta * x[j];
                b_grad[c] += delta;
            }
        }
        for (std::size_t c = 0; c < c_count; ++c) {
            auto w = model.weights.row(c);
            const auto g = w_grad.row(c);
            for (std::size_t j = 0; j < d; ++j)
                w[j] -= config.lr * (g[j] * inv_n + config.reg * w[j]);
            model.bias[c] -= config.lr * b_grad[c] * inv_n;
        }
    }
    return model;
}

TaskModel fit_linear_svm(const Matrix& features, const std::vector<std::uint32_t>& labels,
                         const LinearFitConfig& config) {
    const auto class_ids = distinct_sorted(labels);
    if (class_ids.size() < 2)
        throw ContractError("fit_linear_svm: needs at least 2 distinct labels");
    const std::size_t n = features.rows;
    const std::size_t d = features.cols;
    const std::size_t c_count = class_ids.size();

    TaskModel model;
    model.kind = ClassifierKind::LinearSVM;
    model.class_ids = class_ids;
    model.weights = Matrix(c_count, d);
    model.bias = Vec(c_count, 0.0);

    std::vector<std::size_t> target(n);
    for (std::size_t i = 0; i < n; ++i) target[i] = class_index(class_ids, labels[i]);

    // Per-class objective: reg * ||w||^2 / 2 + mean_i hinge(y_i * f(x_i)).
    Matrix w_grad(1, d);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t c = 0; c < c_count; ++c) {
        auto w = model.weights.row(c);
        for (std::size_t step = 0; step < config.steps; ++step) {
            std::fill(w_grad.data.begin(), w_grad.data.end(), 0.0);
            double b_g = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const auto x = features.row(i);
                const double y = target[i] == c ? 1.0 : -1.0;
                const double margin = y * (dot(w, x) + model.bias[c]);
                if (margin < 1.0) {
                    auto g = w_grad.row(0);
                    for (std::size_t j = 0; j < d; ++j) g[j] -= y * x[j];
                    b_g -= y;
                }
            }
            const auto g = w_grad.row(0);
            for (std::size_t j = 0; j < d; ++j)
                w[j] -= config.lr * (config.reg * w[j] + g[j] * inv_n);
            model.bias[c] -= config.lr * b_g * inv_n;
        }
    }
    return model;
}

namespace {

Matrix rows_for_indices(const FeatureSet& set, const std::vector<std::size_t>& indices) {
    Matrix out(indices.size(), set.feat_dim());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const auto src = set.features.row(indices[r]);
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

}  // namespace

TaskModel build_task_model(const FeatureSet& set, const SemanticTable& semantics,
                           const Episode& episode, const TaskBuildConfig& config,
                           const CvaeModel* model, Rng& rng) {
    const bool needs_model = config.method != Method::Baseline;
    if (needs_model && model == nullptr)
        throw ContractError("build_task_model: method requires a trained model");

    const std::size_t way = episode.way;
    const std::size_t d = set.feat_dim();

    // Per-class support means and, when needed, generated feature blocks.
    std::vector<Vec> support_means(way);
    std::vector<Matrix> generated(way);
    for (std::size_t c = 0; c < way; ++c) {
        if (config.method != Method::ZeroShot)
            support_means[c] = prototype_mean(rows_for_indices(set, episode.support[c]));
        if (needs_model) {
            generated[c] = generate_features(*model, semantics.embedding(episode.class_ids[c]),
                                             config.gen_count, rng);
        }
    }

    TaskModel task;
    task.kind = config.classifier;
    task.metric = config.metric;
    task.class_ids = episode.class_ids;
    std::sort(task.class_ids.begin(), task.class_ids.end());

    if (config.classifier == ClassifierKind::NearestPrototype) {
        for (std::size_t c = 0; c < way; ++c) {
            Prototype p;
            p.class_id = episode.class_ids[c];
            switch (config.method) {
                case Method::Baseline:
                    p.vector = support_means[c];
                    p.provenance = Provenance::SupportOnly;
                    p.weight_support = 1.0;
                    break;
                case Method::ZeroShot:
                    p.vector = prototype_mean(generated[c]);
                    p.provenance = Provenance::GeneratedOnly;
                    p.weight_generated = 1.0;
                    p.weight_support = 0.0;
                    break;
                case Method::Svae:
                case Method::Rsvae:
                    p.vector = combine_prototypes(prototype_mean(generated[c]), support_means[c],
                                                  config.weight_generated, config.weight_support);
                    p.provenance = Provenance::Combined;
                    p.weight_generated = config.weight_generated;
                    p.weight_support = config.weight_support;
                    break;
            }
            task.prototypes.push_back(std::move(p));
        }
        std::sort(task.prototypes.begin(), task.prototypes.end(),
                  [](const Prototype& a, const Prototype& b) { return a.class_id < b.class_id; });
        return task;
    }

    // OneNN / LR / SVM consume generated features as extra training rows.
    std::size_t total_rows = 0;
    for (std::size_t c = 0; c < way; ++c) {
        if (config.method != Method::ZeroShot) total_rows += episode.support[c].size();
        if (needs_model) total_rows += generated[c].rows;
    }
    Matrix train(total_rows, d);
    std::vector<std::uint32_t> train_labels;
    train_labels.reserve(total_rows);
    std::size_t row = 0;
    for (std::size_t c = 0; c < way; ++c) {
        if (config.method != Method::ZeroShot) {
            for (std::size_t s : episode.support[c]) {
                const auto src = set.features.row(s);
                std::copy(src.begin(), src.end(), train.row(row++).begin());
                train_labels.push_back(episode.class_ids[c]);
            }
        }
        if (needs_model) {
            for (std::size_t g = 0; g < generated[c].rows; ++g) {
                const auto src = generated[c].row(g);
                std::copy(src.begin(), src.end(), train.row(row++).begin());
                train_labels.push_back(episode.class_ids[c]);
            }
        }
    }

    switch (config.classifier) {
        case ClassifierKind::OneNN:
            task.reference_features = std::move(train);
            task.reference_labels = std::move(train_labels);
            return task;
        case ClassifierKind::LogisticRegression: return fit_logreg(train, train_labels, config.fit);
        case ClassifierKind::LinearSVM: return fit_linear_svm(train, train_labels, config.fit);
        default: throw ContractError("build_task_model: unknown classifier kind");
    }
}

}  // namespace fsgen

#include "fsgen/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <ostream>
#include <thread>

#include "fsgen/errors.hpp"
#include "fsgen/selection.hpp"

namespace fsgen {

std::pair<double, double> EvalConfig::resolved_weights() const {
    if (weight_generated >= 0.0 && weight_support >= 0.0) {
        if (std::abs(weight_generated + weight_support - 1.0) > 1e-9)
            throw ContractError("EvalConfig: weights must sum to 1");
        return {weight_generated, weight_support};
    }
    if (shot == 1) return {0.5, 0.5};
    return {1.0 / 6.0, 5.0 / 6.0};
}

void EvalConfig::validate() const {
    if (episodes < 1) throw ContractError("EvalConfig: episodes must be >= 1");
    if (way < 1 || shot < 1 || queries < 1)
        throw ContractError("EvalConfig: way, shot and queries must be positive");
    resolved_weights();
}

std::pair<double, double> ci95(const std::vector<double>& values) {
    if (values.empty()) throw CapacityError("ci95: empty list");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    if (values.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    return {mean, 1.96 * sd / std::sqrt(static_cast<double>(values.size()))};
}

namespace {

TaskBuildConfig task_config_from(const EvalConfig& config) {
    TaskBuildConfig tc;
    tc.method = config.method;
    tc.classifier = config.classifier;
    tc.metric = config.metric;
    tc.gen_count = config.gen_count;
    const auto [w_g, w_s] = config.resolved_weights();
    tc.weight_generated = w_g;
    tc.weight_support = w_s;
    tc.fit = config.fit;
    return tc;
}

double score_episode(const FeatureSet& set, const Episode& episode, const TaskModel& task) {
    std::size_t correct = 0, total = 0;
    for (std::size_t c = 0; c < episode.way; ++c) {
        for (std::size_t row : episode.query[c]) {
            if (task.classify(set.features.row(row)) == episode.class_ids[c]) ++correct;
            ++total;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

// Runs fn(index, rng) for every episode index on `workers` threads; results
// land in index order so scheduling never shows in the output.
template <typename Fn>
void for_each_episode(std::size_t episodes, std::uint64_t seed, std::size_t workers, Fn&& fn) {
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;

    auto worker = [&] {
        while (true) {
            const std::size_t index = next.fetch_add(1);
            if (index >= episodes) return;
            {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (error) return;
            }
            try {
                Rng rng(derive_seed(seed, index));
                fn(index, rng);
            } catch (const CapacityError& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error)
                    error = std::make_exception_ptr(
                        CapacityError("episode " + std::to_string(index) + ": " + e.what()));
            } catch (const LookupError& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error)
                    error = std::make_exception_ptr(
                        LookupError("episode " + std::to_string(index) + ": " + e.what()));
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };

    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace

EvalReport run_eval(const FeatureSet& set, const SemanticTable& semantics, const CvaeModel* model,
                    const EvalConfig& config) {
    config.validate();
    if (config.method != Method::Baseline && model == nullptr)
        throw ContractError("run_eval: method requires a trained model");

    const TaskBuildConfig tc = task_config_from(config);
    EvalReport report;
    report.config = config;
    report.episode_accuracy.resize(config.episodes);

    for_each_episode(config.episodes, config.seed, config.workers, [&](std::size_t index, Rng& rng) {
        const Episode episode =
            sample_episode(set, config.way, config.shot, config.queries, rng);
        const TaskModel task = build_task_model(set, semantics, episode, tc, model, rng);
        report.episode_accuracy[index] = score_episode(set, episode, task);
    });

    const auto [mean, half] = ci95(report.episode_accuracy);
    report.mean = mean;
    report.ci95 = half;
    return report;
}

namespace {

const char* method_name(Method m) {
    switch (m) {
        case Method::Baseline: return "baseline";
        case Method::Svae: return "svae";
        case Method::Rsvae: return "rsvae";
        case Method::ZeroShot: return "zeroshot";
    }
    return "?";
}

const char* classifier_name(ClassifierKind k) {
    switch (k) {
        case ClassifierKind::NearestPrototype: return "proto";
        case ClassifierKind::OneNN: return "1nn";
        case ClassifierKind::LogisticRegression: return "logreg";
        case ClassifierKind::LinearSVM: return "svm";
    }
    return "?";
}

}  // namespace

void write_eval_csv(std::ostream& out, const EvalReport& report) {
    const EvalConfig& c = report.config;
    const auto [w_g, w_s] = c.resolved_weights();
    char line[256];
    std::snprintf(line, sizeof(line),
                  "# way=%zu shot=%zu queries=%zu episodes=%zu method=%s classifier=%s "
                  "distance=%s w_g=%.6f w_s=%.6f gen_count=%zu seed=%llu\n",
                  c.way, c.shot, c.queries, c.episodes, method_name(c.method),
                  classifier_name(c.classifier),
                  c.metric == DistanceMetric::Cosine ? "cosine" : "euclidean", w_g, w_s,
                  c.gen_count, static_cast<unsigned long long>(c.seed));
    out << line << "episode,accuracy\n";
    for (std::size_t i = 0; i < report.episode_accuracy.size(); ++i) {
        std::snprintf(line, sizeof(line), "%zu,%.6f\n", i, report.episode_accuracy[i]);
        out << line;
    }
    std::snprintf(line, sizeof(line), "mean,%.6f\nci95,%.6f\n", report.mean, report.ci95);
    out << line;
}

namespace {

struct BaseSelection {
    Matrix features;
    std::vector<std::uint32_t> labels;
    double fraction_kept = 0.0;
};

BaseSelection select_base_training(const FeatureSet& set, double threshold) {
    std::vector<std::size_t> rows;
    std::size_t base_total = 0;
    for (std::uint32_t class_id : set.classes_in_split(Split::Base)) {
        const auto result = select_representative(set, class_id, threshold);
        base_total += class_sample_indices(set, class_id).size();
        rows.insert(rows.end(), result.selected.begin(), result.selected.end());
    }
    BaseSelection out;
    out.features = Matrix(rows.size(), set.feat_dim());
    out.labels.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto src = set.features.row(rows[r]);
        std::copy(src.begin(), src.end(), out.features.row(r).begin());
        out.labels.push_back(set.labels[rows[r]]);
    }
    out.fraction_kept = base_total > 0
                            ? static_cast<double>(rows.size()) / static_cast<double>(base_total)
                            : 0.0;
    return out;
}

}  // namespace

std::vector<SweepRow> threshold_sweep(const FeatureSet& set, const SemanticTable& semantics,
                                      const std::vector<double>& thresholds,
                                      const CvaeConfig& train_config,
                                      const EvalConfig& eval_config) {
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        if (thresholds[i] < 0.0 || thresholds[i] >= 1.0)
            throw ContractError("threshold_sweep: thresholds must be in [0,1)");
        if (i > 0 && thresholds[i] <= thresholds[i - 1])
            throw ContractError("threshold_sweep: thresholds must be sorted ascending");
    }

    std::vector<SweepRow> rows;
    for (double threshold : thresholds) {
        const BaseSelection training = select_base_training(set, threshold);
        if (training.labels.empty())
            throw CapacityError("threshold_sweep: no samples selected at threshold " +
                                std::to_string(threshold));
        CvaeModel model = make_cvae(train_config);
        train_cvae(model, training.features, training.labels, semantics);

        SweepRow row;
        row.threshold = threshold;
        row.fraction_kept = training.fraction_kept;
        EvalConfig eval = eval_config;
        eval.method = Method::Rsvae;
        eval.shot = 1;
        eval.weight_generated = -1.0;
        eval.weight_support = -1.0;
        row.acc_1shot = run_eval(set, semantics, &model, eval).mean;
        eval.shot = 5;
        row.acc_5shot = run_eval(set, semantics, &model, eval).mean;
        rows.push_back(row);
    }
    return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "threshold,fraction_kept,acc_1shot,acc_5shot\n";
    char line[128];
    for (const auto& row : rows) {
        std::snprintf(line, sizeof(line), "%.6f,%.6f,%.6f,%.6f\n", row.threshold,
                      row.fraction_kept, row.acc_1shot, row.acc_5shot);
        out << line;
    }
}

std::vector<SupportStudyRow> support_representativeness_study(
    const FeatureSet& set, const SemanticTable& semantics, const CvaeModel* model,
    const std::vector<std::pair<double, double>>& bins, const EvalConfig& config) {
    config.validate();
    if (config.method != Method::Baseline && model == nullptr)
        throw ContractError("support_representativeness_study: method requires a model");
    for (std::size_t i = 0; i < bins.size(); ++i) {
        if (bins[i].first > bins[i].second)
            throw ContractError("support_representativeness_study: bin has lo > hi");
        for (std::size_t j = i + 1; j < bins.size(); ++j) {
            const bool overlap =
                bins[i].first < bins[j].second && bins[j].first < bins[i].second;
            if (overlap)
                throw ContractError("support_representativeness_study: bins overlap");
        }
    }

    const auto novel = set.classes_in_split(Split::Novel);
    if (novel.size() < config.way)
        throw CapacityError("support_representativeness_study: not enough novel classes");
    const std::uint32_t designated = novel.front();
    const auto designated_rows = class_sample_indices(set, designated);
    const Vec class_mean = estimate_mean(class_features(set, designated));

    Vec distance(designated_rows.size());
    for (std::size_t i = 0; i < designated_rows.size(); ++i)
        distance[i] = l2_distance(set.features.row(designated_rows[i]), class_mean);

    std::vector<std::uint32_t> others(novel.begin() + 1, novel.end());
    const TaskBuildConfig method_tc = task_config_from(config);
    TaskBuildConfig baseline_tc = method_tc;
    baseline_tc.method = Method::Baseline;

    std::vector<SupportStudyRow> rows;
    for (const auto& [lo, hi] : bins) {
        std::vector<std::size_t> candidates;  // positions within designated_rows
        for (std::size_t i = 0; i < designated_rows.size(); ++i) {
            if (distance[i] >= lo && distance[i] < hi) candidates.push_back(i);
        }
        if (candidates.size() < config.shot)
            throw CapacityError("support_representativeness_study: bin [" + std::to_string(lo) +
                                ", " + std::to_string(hi) + ") holds " +
                                std::to_string(candidates.size()) + " samples of class " +
                                std::to_string(designated));

        Vec acc_base(config.episodes), acc_method(config.episodes);
        for_each_episode(config.episodes, config.seed, config.workers,
                         [&](std::size_t index, Rng& rng) {
            Episode episode;
            episode.way = config.way;
            episode.shot = config.shot;
            episode.queries_per_class = config.queries;

            // Designated class first, with bin-restricted support.
            episode.class_ids.push_back(designated);
            std::vector<std::size_t> pool = candidates;
            for (std::size_t i = 0; i < config.shot; ++i) {
                const std::size_t j = i + rng.uniform_below(pool.size() - i);
                std::swap(pool[i], pool[j]);
            }
            std::vector<std::size_t> support;
            std::vector<bool> used(designated_rows.size(), false);
            for (std::size_t i = 0; i < config.shot; ++i) {
                support.push_back(designated_rows[pool[i]]);
                used[pool[i]] = true;
            }
            std::vector<std::size_t> query_pool;
            for (std::size_t i = 0; i < designated_rows.size(); ++i)
                if (!used[i]) query_pool.push_back(designated_rows[i]);
            if (query_pool.size() < config.queries)
                throw CapacityError("designated class too small for queries");
            for (std::size_t i = 0; i < config.queries; ++i) {
                const std::size_t j = i + rng.uniform_below(query_pool.size() - i);
                std::swap(query_pool[i], query_pool[j]);
            }
            episode.support.push_back(std::move(support));
            episode.query.emplace_back(query_pool.begin(),
                                       query_pool.begin() + static_cast<std::ptrdiff_t>(config.queries));

            // Remaining classes sample normally.
            std::vector<std::uint32_t> other_pool = others;
            for (std::size_t i = 0; i + 1 < config.way; ++i) {
                const std::size_t j = i + rng.uniform_below(other_pool.size() - i);
                std::swap(other_pool[i], other_pool[j]);
                const std::uint32_t class_id = other_pool[i];
                auto class_rows = class_sample_indices(set, class_id);
                if (class_rows.size() < config.shot + config.queries)
                    throw CapacityError("class " + std::to_string(class_id) + " too small");
                for (std::size_t k = 0; k < config.shot + config.queries; ++k) {
                    const std::size_t m = k + rng.uniform_below(class_rows.size() - k);
                    std::swap(class_rows[k], class_rows[m]);
                }
                episode.class_ids.push_back(class_id);
                episode.support.emplace_back(class_rows.begin(),
                                             class_rows.begin() + static_cast<std::ptrdiff_t>(config.shot));
                episode.query.emplace_back(
                    class_rows.begin() + static_cast<std::ptrdiff_t>(config.shot),
                    class_rows.begin() + static_cast<std::ptrdiff_t>(config.shot + config.queries));
            }

            const TaskModel method_task =
                build_task_model(set, semantics, episode, method_tc, model, rng);
            const TaskModel baseline_task =
                build_task_model(set, semantics, episode, baseline_tc, nullptr, rng);
            acc_method[index] = score_episode(set, episode, method_task);
            acc_base[index] = score_episode(set, episode, baseline_task);
        });

        SupportStudyRow row;
        row.lo = lo;
        row.hi = hi;
        row.acc_baseline = ci95(acc_base).first;
        row.acc_method = ci95(acc_method).first;
        rows.push_back(row);
    }
    return rows;
}

void write_support_study_csv(std::ostream& out, const std::vector<SupportStudyRow>& rows) {
    out << "bin_lo,bin_hi,acc_baseline,acc_method\n";
    char line[128];
    for (const auto& row : rows) {
        std::snprintf(line, sizeof(line), "%.6f,%.6f,%.6f,%.6f\n", row.lo, row.hi,
                      row.acc_baseline, row.acc_method);
        out << line;
    }
}

std::vector<KdePoint> distance_kde_report(const std::vector<double>& distances,
                                          std::optional<double> bandwidth, std::size_t grid) {
    if (distances.size() < 2) throw CapacityError("distance_kde_report: needs at least 2 points");
    if (grid < 16) throw ContractError("distance_kde_report: grid must be >= 16");

    const std::size_t n = distances.size();
    double h;
    if (bandwidth) {
        h = *bandwidth;
        if (!(h > 0.0)) throw ContractError("distance_kde_report: bandwidth must be positive");
    } else {
        const auto [mean, unused] = ci95(distances);
        (void)unused;
        double ss = 0.0;
        for (double v : distances) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / static_cast<double>(n - 1));
        h = 1.06 * sd * std::pow(static_cast<double>(n), -0.2);
        if (!(h > 0.0)) h = 1e-9;  // all points identical
    }

    const auto [min_it, max_it] = std::minmax_element(distances.begin(), distances.end());
    const double lo = *min_it - 3.0 * h;
    const double hi = *max_it + 3.0 * h;
    const double step = (hi - lo) / static_cast<double>(grid - 1);
    const double norm = 1.0 / (static_cast<double>(n) * h * std::sqrt(2.0 * 3.14159265358979323846));

    std::vector<KdePoint> curve(grid);
    for (std::size_t i = 0; i < grid; ++i) {
        const double x = lo + static_cast<double>(i) * step;
        double density = 0.0;
        for (double d : distances) {
            const double u = (x - d) / h;
            density += std::exp(-0.5 * u * u);
        }
        curve[i] = {x, density * norm};
    }
    return curve;
}

void write_kde_csv(std::ostream& out, const std::vector<KdePoint>& points) {
    out << "x,density\n";
    char line[96];
    for (const auto& p : points) {
        std::snprintf(line, sizeof(line), "%.9g,%.9g\n", p.x, p.density);
        out << line;
    }
}

std::vector<FidelityRow> prototype_fidelity_study(const FeatureSet& set,
                                                  const SemanticTable& semantics,
                                                  const PlantedTruth& truth, double threshold,
                                                  const CvaeConfig& train_config,
                                                  std::size_t gen_count) {
    const BaseSelection all_data = select_base_training(set, 0.0);
    const BaseSelection selected = select_base_training(set, threshold);
    if (selected.labels.empty())
        throw CapacityError("prototype_fidelity_study: nothing selected at threshold " +
                            std::to_string(threshold));

    CvaeModel all_model = make_cvae(train_config);
    train_cvae(all_model, all_data.features, all_data.labels, semantics);
    CvaeModel selected_model = make_cvae(train_config);
    train_cvae(selected_model, selected.features, selected.labels, semantics);

    std::vector<FidelityRow> rows;
    for (std::uint32_t class_id : set.classes_in_split(Split::Base)) {
        const auto a = semantics.embedding(class_id);
        Rng rng_all(derive_seed(train_config.seed, 0xF1DE0000ULL + class_id));
        Rng rng_sel(derive_seed(train_config.seed, 0xF1DE0000ULL + class_id));
        const Vec proto_all = prototype_mean(generate_features(all_model, a, gen_count, rng_all));
        const Vec proto_sel =
            prototype_mean(generate_features(selected_model, a, gen_count, rng_sel));
        FidelityRow row;
        row.class_id = class_id;
        row.d_all = l2_distance(proto_all, truth.class_means.row(class_id));
        row.d_selected = l2_distance(proto_sel, truth.class_means.row(class_id));
        row.improvement = row.d_all - row.d_selected;
        rows.push_back(row);
    }
    return rows;
}

void write_fidelity_csv(std::ostream& out, const std::vector<FidelityRow>& rows) {
    out << "class_id,d_all,d_selected,improvement\n";
    char line[128];
    for (const auto& row : rows) {
        std::snprintf(line, sizeof(line), "%u,%.6f,%.6f,%.6f\n", row.class_id, row.d_all,
                      row.d_selected, row.improvement);
        out << line;
    }
}

}  // namespace fsgen

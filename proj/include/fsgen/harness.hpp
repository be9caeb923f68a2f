#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "fsgen/cvae.hpp"
#include "fsgen/datastore.hpp"
#include "fsgen/protoclass.hpp"
#include "fsgen/synthoracle.hpp"

namespace fsgen {

struct EvalConfig {
    std::size_t way = 5;
    std::size_t shot = 1;
    std::size_t queries = 15;
    std::size_t episodes = 2000;
    Method method = Method::Baseline;
    ClassifierKind classifier = ClassifierKind::NearestPrototype;
    DistanceMetric metric = DistanceMetric::Euclidean;
    // Negative means "per-shot default": [1/2, 1/2] for 1-shot, [1/6, 5/6]
    // otherwise.
    double weight_generated = -1.0;
    double weight_support = -1.0;
    std::size_t gen_count = 500;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    LinearFitConfig fit;

    std::pair<double, double> resolved_weights() const;
    void validate() const;
};

struct EvalReport {
    std::vector<double> episode_accuracy;
    double mean = 0.0;
    double ci95 = 0.0;
    EvalConfig config;
};

// (mean, 1.96 * sample_std / sqrt(n)); half-width 0 for a single value.
std::pair<double, double> ci95(const std::vector<double>& values);

// Samples config.episodes episodes, fits one task model per episode and scores
// its queries. Per-episode seeds derive from (seed, episode index), so serial
// and worker-pool execution give identical reports.
EvalReport run_eval(const FeatureSet& set, const SemanticTable& semantics, const CvaeModel* model,
                    const EvalConfig& config);

// CSV: config echo comment, "episode,accuracy" rows, then mean and ci95 rows.
void write_eval_csv(std::ostream& out, const EvalReport& report);

struct SweepRow {
    double threshold = 0.0;
    double fraction_kept = 0.0;
    double acc_1shot = 0.0;
    double acc_5shot = 0.0;
};

// For each threshold (ascending): select representative base samples, train a
// fresh model with the same seed, evaluate 1-shot and 5-shot.
std::vector<SweepRow> threshold_sweep(const FeatureSet& set, const SemanticTable& semantics,
                                      const std::vector<double>& thresholds,
                                      const CvaeConfig& train_config, const EvalConfig& eval_config);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

struct SupportStudyRow {
    double lo = 0.0;
    double hi = 0.0;
    double acc_baseline = 0.0;
    double acc_method = 0.0;
};

// Restricts the support draw of the lowest-id novel class to samples whose L2
// distance to the class mean falls in [lo, hi); other classes sample normally.
std::vector<SupportStudyRow> support_representativeness_study(
    const FeatureSet& set, const SemanticTable& semantics, const CvaeModel* model,
    const std::vector<std::pair<double, double>>& bins, const EvalConfig& config);
void write_support_study_csv(std::ostream& out, const std::vector<SupportStudyRow>& rows);

struct KdePoint {
    double x = 0.0;
    double density = 0.0;
};

// Gaussian-kernel KDE sampled on [min - 3h, max + 3h]; default bandwidth is
// Silverman's rule 1.06 * std * n^(-1/5).
std::vector<KdePoint> distance_kde_report(const std::vector<double>& distances,
                                          std::optional<double> bandwidth, std::size_t grid);
void write_kde_csv(std::ostream& out, const std::vector<KdePoint>& points);

struct FidelityRow {
    std::uint32_t class_id = 0;
    double d_all = 0.0;
    double d_selected = 0.0;
    double improvement = 0.0;  // d_all - d_selected
};

// Trains one model on all base data and one on the representative subset
// (same seed), then compares generated-prototype distances to the planted
// class means.
std::vector<FidelityRow> prototype_fidelity_study(const FeatureSet& set,
                                                  const SemanticTable& semantics,
                                                  const PlantedTruth& truth, double threshold,
                                                  const CvaeConfig& train_config,
                                                  std::size_t gen_count);
void write_fidelity_csv(std::ostream& out, const std::vector<FidelityRow>& rows);

}  // namespace fsgen

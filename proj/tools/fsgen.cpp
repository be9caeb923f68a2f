// Command-line front end: planted-benchmark generation, ingest, sample
// selection, model training, feature generation, episodic evaluation and the
// analysis reports. Every output is CSV or one of the binary containers
// described in the README.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fsgen/config_file.hpp"
#include "fsgen/cvae.hpp"
#include "fsgen/datastore.hpp"
#include "fsgen/errors.hpp"
#include "fsgen/harness.hpp"
#include "fsgen/protoclass.hpp"
#include "fsgen/selection.hpp"
#include "fsgen/synthoracle.hpp"

namespace fs = std::filesystem;
using namespace fsgen;

namespace {

Method parse_method(const std::string& name) {
    if (name == "baseline") return Method::Baseline;
    if (name == "svae") return Method::Svae;
    if (name == "rsvae") return Method::Rsvae;
    if (name == "zeroshot") return Method::ZeroShot;
    throw ContractError("unknown method: " + name);
}

ClassifierKind parse_classifier(const std::string& name) {
    if (name == "proto") return ClassifierKind::NearestPrototype;
    if (name == "1nn") return ClassifierKind::OneNN;
    if (name == "logreg") return ClassifierKind::LogisticRegression;
    if (name == "svm") return ClassifierKind::LinearSVM;
    throw ContractError("unknown classifier: " + name);
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) values.push_back(std::stod(item));
    }
    return values;
}

std::vector<std::pair<double, double>> parse_bins(const std::string& text) {
    std::vector<std::pair<double, double>> bins;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos)
            throw ContractError("bin '" + item + "' must look like lo:hi");
        bins.emplace_back(std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1)));
    }
    return bins;
}

CvaeConfig train_config_from_file(const fs::path& path, std::size_t feat_dim,
                                  std::size_t sem_dim) {
    const KeyValueConfig kv = KeyValueConfig::from_file(path);
    CvaeConfig config;
    config.feat_dim = feat_dim;
    config.sem_dim = sem_dim;
    config.latent_dim = kv.get_u64("latent_dim", 512);
    config.hidden_dim = kv.get_u64("hidden_dim", 4096);
    config.decoder_depth = kv.get_u64("decoder_depth", 2);
    config.learning_rate = kv.get_double("learning_rate", 1e-4);
    config.epochs = kv.get_u64("epochs", 40);
    config.batch_size = kv.get_u64("batch_size", 128);
    config.seed = kv.get_u64("seed", 0);
    config.validate();
    return config;
}

// Base-class training rows; selection file rows when given, otherwise every
// base sample (via a threshold-0 selection so both paths order rows the same
// way).
struct TrainingRows {
    Matrix features;
    std::vector<std::uint32_t> labels;
};

TrainingRows training_rows_from_selection(const FeatureSet& set, const std::string& selection) {
    std::vector<std::size_t> rows;
    if (selection == "all") {
        for (std::uint32_t class_id : set.classes_in_split(Split::Base)) {
            const auto result = select_representative(set, class_id, 0.0);
            rows.insert(rows.end(), result.selected.begin(), result.selected.end());
        }
    } else {
        std::ifstream in(selection);
        if (!in) throw FormatError("cannot open selection file: " + selection);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty() || line == "class_id,sample_index,score") continue;
            std::stringstream ss(line);
            std::string class_field, index_field;
            if (!std::getline(ss, class_field, ',') || !std::getline(ss, index_field, ','))
                throw FormatError("selection line " + std::to_string(line_no) + " is malformed");
            rows.push_back(std::stoul(index_field));
        }
    }
    if (rows.empty()) throw CapacityError("selection yields no training samples");

    TrainingRows out;
    out.features = Matrix(rows.size(), set.feat_dim());
    out.labels.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] >= set.sample_count())
            throw LookupError("selection names sample " + std::to_string(rows[r]) +
                              " beyond the container");
        const auto src = set.features.row(rows[r]);
        std::copy(src.begin(), src.end(), out.features.row(r).begin());
        out.labels.push_back(set.labels[rows[r]]);
    }
    return out;
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot open output file: " + path.string());
    out << content;
}

std::vector<double> read_values_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open values file: " + path.string());
    std::vector<double> values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::string first = line.substr(0, line.find(','));
        try {
            values.push_back(std::stod(first));
        } catch (const std::exception&) {
            if (line_no == 1) continue;  // header row
            throw FormatError("values line " + std::to_string(line_no) + " is not numeric");
        }
    }
    return values;
}

int run(int argc, char** argv) {
    CLI::App app{"Representative-sample selection and semantic feature generation "
                 "for few-shot classification"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "Write a planted synthetic benchmark");
    std::string synth_config_path, synth_out_dir;
    synth->add_option("--config", synth_config_path, "key=value config file")->required();
    synth->add_option("--out", synth_out_dir, "output directory")->required();
    synth->callback([&] {
        const KeyValueConfig kv = KeyValueConfig::from_file(synth_config_path);
        SynthConfig config;
        config.num_base_classes = kv.get_u64("base_classes", config.num_base_classes);
        config.num_novel_classes = kv.get_u64("novel_classes", config.num_novel_classes);
        config.samples_per_class = kv.get_u64("samples_per_class", config.samples_per_class);
        config.feat_dim = kv.get_u64("feat_dim", config.feat_dim);
        config.sem_dim = kv.get_u64("sem_dim", config.sem_dim);
        config.noise_sigma = kv.get_double("noise_sigma", config.noise_sigma);
        config.outlier_fraction = kv.get_double("outlier_fraction", config.outlier_fraction);
        config.outlier_shift = kv.get_double("outlier_shift", config.outlier_shift);
        config.seed = kv.get_u64("seed", config.seed);

        Rng rng(config.seed);
        const SynthData data = generate_synth(config, rng);
        fs::create_directories(synth_out_dir);
        save_features(data.features, data.semantics, fs::path(synth_out_dir) / "data.fsf");
        save_truth(data.truth, fs::path(synth_out_dir) / "truth.tru");
        std::vector<std::string> names;
        for (std::size_t c = 0; c < data.features.class_count(); ++c)
            names.push_back("synth_class_" + std::to_string(c));
        save_manifest(names, fs::path(synth_out_dir) / "classes.tsv");
        std::cout << "wrote " << data.features.sample_count() << " samples, "
                  << data.features.class_count() << " classes to " << synth_out_dir << "\n";
    });

    // ---- ingest ----
    auto* ingest = app.add_subcommand("ingest", "Build a container from raw text tables");
    std::string ingest_features, ingest_semantics, ingest_manifest, ingest_out;
    ingest->add_option("--features", ingest_features, "lines: <class_id> v1 ... vd")->required();
    ingest->add_option("--semantics", ingest_semantics, "lines: <class_id> v1 ... vs")->required();
    ingest->add_option("--manifest", ingest_manifest, "lines: <class_id>\\t<name>\\t<base|val|novel>")
        ->required();
    ingest->add_option("--out", ingest_out, "output container path")->required();
    ingest->callback([&] {
        std::ifstream manifest(ingest_manifest);
        if (!manifest) throw FormatError("cannot open manifest: " + ingest_manifest);
        std::vector<std::string> names;
        std::vector<Split> splits;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(manifest, line)) {
            ++line_no;
            if (line.empty()) continue;
            std::stringstream ss(line);
            std::string id_field, name, split_field;
            if (!std::getline(ss, id_field, '\t') || !std::getline(ss, name, '\t') ||
                !std::getline(ss, split_field, '\t'))
                throw FormatError("manifest line " + std::to_string(line_no) +
                                  " must be <id>\\t<name>\\t<split>");
            if (std::stoul(id_field) != names.size())
                throw FormatError("manifest line " + std::to_string(line_no) +
                                  " breaks dense class-id order");
            names.push_back(name);
            if (split_field == "base") splits.push_back(Split::Base);
            else if (split_field == "val") splits.push_back(Split::Val);
            else if (split_field == "novel") splits.push_back(Split::Novel);
            else throw FormatError("manifest line " + std::to_string(line_no) +
                                   " has unknown split: " + split_field);
        }
        if (names.empty()) throw FormatError("manifest is empty");

        auto parse_table = [](const std::string& path, const char* what) {
            std::ifstream in(path);
            if (!in) throw FormatError(std::string("cannot open ") + what + ": " + path);
            std::vector<std::pair<std::uint32_t, Vec>> rows;
            std::string text_line;
            std::size_t no = 0;
            while (std::getline(in, text_line)) {
                ++no;
                if (text_line.empty()) continue;
                std::stringstream ss(text_line);
                std::uint32_t id;
                if (!(ss >> id))
                    throw FormatError(std::string(what) + " line " + std::to_string(no) +
                                      " does not start with a class id");
                Vec values;
                double v;
                while (ss >> v) values.push_back(v);
                if (values.empty())
                    throw FormatError(std::string(what) + " line " + std::to_string(no) +
                                      " has no values");
                rows.emplace_back(id, std::move(values));
            }
            return rows;
        };

        const auto feature_rows = parse_table(ingest_features, "features");
        const auto semantic_rows = parse_table(ingest_semantics, "semantics");
        if (feature_rows.empty()) throw FormatError("features file is empty");
        if (semantic_rows.size() != names.size())
            throw FormatError("semantics must have exactly one line per class");

        const std::size_t feat_dim = feature_rows.front().second.size();
        FeatureSet set;
        set.features = Matrix(feature_rows.size(), feat_dim);
        set.labels.reserve(feature_rows.size());
        for (std::size_t r = 0; r < feature_rows.size(); ++r) {
            if (feature_rows[r].second.size() != feat_dim)
                throw FormatError("features line " + std::to_string(r + 1) +
                                  " has inconsistent dimension");
            std::copy(feature_rows[r].second.begin(), feature_rows[r].second.end(),
                      set.features.row(r).begin());
            set.labels.push_back(feature_rows[r].first);
        }
        set.class_split = splits;

        const std::size_t sem_dim = semantic_rows.front().second.size();
        SemanticTable table;
        table.embeddings = Matrix(names.size(), sem_dim);
        std::vector<bool> seen(names.size(), false);
        for (const auto& [id, values] : semantic_rows) {
            if (id >= names.size())
                throw FormatError("semantics names unknown class " + std::to_string(id));
            if (values.size() != sem_dim)
                throw FormatError("semantics for class " + std::to_string(id) +
                                  " has inconsistent dimension");
            if (seen[id]) throw FormatError("duplicate semantics for class " + std::to_string(id));
            seen[id] = true;
            std::copy(values.begin(), values.end(), table.embeddings.row(id).begin());
        }

        save_features(set, table, ingest_out);
        save_manifest(names, fs::path(ingest_out).replace_extension(".tsv"));
        std::cout << "ingested " << set.sample_count() << " samples into " << ingest_out << "\n";
    });

    // ---- select ----
    auto* select = app.add_subcommand("select", "Select representative samples per base class");
    std::string select_data, select_method = "gaussian", select_out, select_stats_out;
    double select_threshold = 0.9, select_fraction = -1.0, select_alpha = kDefaultShrinkage;
    std::uint64_t select_count = 0, select_seed = 0;
    select->add_option("--data", select_data, "container path")->required();
    select->add_option("--threshold", select_threshold, "representativeness threshold (gaussian)");
    select->add_option("--method", select_method, "gaussian|herding|kmeans");
    select->add_option("--count", select_count, "per-class count (herding/kmeans)");
    select->add_option("--fraction", select_fraction, "per-class fraction (herding/kmeans)");
    select->add_option("--alpha", select_alpha, "covariance shrinkage");
    select->add_option("--seed", select_seed, "rng seed (kmeans seeding)");
    select->add_option("--out", select_out, "selection CSV (class_id,sample_index,score)")
        ->required();
    select->add_option("--stats", select_stats_out, "also write per-class fraction CSV");
    select->callback([&] {
        const auto [set, table] = load_features(select_data);
        (void)table;
        std::ostringstream csv;
        csv << "class_id,sample_index,score\n";
        std::vector<ClassFraction> stats;
        char line[96];
        for (std::uint32_t class_id : set.classes_in_split(Split::Base)) {
            const auto rows = class_sample_indices(set, class_id);
            if (select_method == "gaussian") {
                const auto result =
                    select_representative(set, class_id, select_threshold, select_alpha);
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    if (result.scores[i] > select_threshold) {
                        std::snprintf(line, sizeof(line), "%u,%zu,%.9g\n", class_id, rows[i],
                                      result.scores[i]);
                        csv << line;
                    }
                }
                stats.push_back({class_id, result.fraction_selected});
            } else {
                std::size_t count = select_count;
                if (count == 0 && select_fraction > 0.0)
                    count = std::max<std::size_t>(
                        1, static_cast<std::size_t>(select_fraction *
                                                    static_cast<double>(rows.size())));
                if (count == 0)
                    throw ContractError("method " + select_method +
                                        " needs --count or --fraction");
                const Matrix feats = class_features(set, class_id);
                std::vector<std::size_t> picked;
                if (select_method == "herding") {
                    picked = herding_select(feats, count);
                } else if (select_method == "kmeans") {
                    Rng rng(derive_seed(select_seed, class_id));
                    picked = kmeans_select(feats, count, rng);
                } else {
                    throw ContractError("unknown selection method: " + select_method);
                }
                for (std::size_t order = 0; order < picked.size(); ++order) {
                    std::snprintf(line, sizeof(line), "%u,%zu,%zu\n", class_id,
                                  rows[picked[order]], order);
                    csv << line;
                }
                stats.push_back({class_id, static_cast<double>(picked.size()) /
                                               static_cast<double>(rows.size())});
            }
        }
        write_text_file(select_out, csv.str());
        if (!select_stats_out.empty()) {
            std::ostringstream stats_csv;
            write_selection_stats_csv(stats_csv, stats, select_threshold);
            write_text_file(select_stats_out, stats_csv.str());
        }
        std::cout << "selection written to " << select_out << "\n";
    });

    // ---- train ----
    auto* train = app.add_subcommand("train", "Train the feature-generation model");
    std::string train_data, train_selection = "all", train_config_path, train_out, train_log_out;
    train->add_option("--data", train_data, "container path")->required();
    train->add_option("--selection", train_selection, "selection CSV or 'all'");
    train->add_option("--config", train_config_path, "key=value training config")->required();
    train->add_option("--out", train_out, "checkpoint path")->required();
    train->add_option("--log", train_log_out, "write per-epoch loss CSV");
    train->callback([&] {
        const auto [set, table] = load_features(train_data);
        const CvaeConfig config =
            train_config_from_file(train_config_path, set.feat_dim(), table.sem_dim());
        const TrainingRows rows = training_rows_from_selection(set, train_selection);
        CvaeModel model = make_cvae(config);
        const TrainLog log = train_cvae(model, rows.features, rows.labels, table);
        save_checkpoint(model, train_out);
        if (!train_log_out.empty()) {
            std::ostringstream csv;
            write_train_log_csv(csv, log);
            write_text_file(train_log_out, csv.str());
        }
        std::cout << "trained on " << rows.labels.size() << " samples, final loss "
                  << log.total.back() << ", checkpoint " << train_out << "\n";
    });

    // ---- generate ----
    auto* generate = app.add_subcommand("generate", "Generate features for one class");
    std::string gen_model_path, gen_data, gen_out;
    std::uint32_t gen_class = 0;
    std::uint64_t gen_count = 500, gen_seed = 0;
    generate->add_option("--model", gen_model_path, "checkpoint path")->required();
    generate->add_option("--data", gen_data, "container providing semantics")->required();
    generate->add_option("--class", gen_class, "class id")->required();
    generate->add_option("--count", gen_count, "number of features");
    generate->add_option("--seed", gen_seed, "rng seed");
    generate->add_option("--out", gen_out, "output container path")->required();
    generate->callback([&] {
        const auto [set, table] = load_features(gen_data);
        const CvaeModel model = load_checkpoint(gen_model_path);
        Rng rng(gen_seed);
        const Matrix generated =
            generate_features(model, table.embedding(gen_class), gen_count, rng);
        FeatureSet out;
        out.features = generated;
        out.labels.assign(generated.rows, gen_class);
        out.class_split = set.class_split;
        save_features(out, table, gen_out);
        std::cout << "generated " << generated.rows << " features for class " << gen_class
                  << " into " << gen_out << "\n";
    });

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "Episodic few-shot evaluation");
    std::string eval_data, eval_model_path, eval_method = "baseline", eval_classifier = "proto";
    std::string eval_distance = "euclidean", eval_out;
    EvalConfig eval_config;
    eval->add_option("--data", eval_data, "container path")->required();
    eval->add_option("--model", eval_model_path, "checkpoint (required unless baseline)");
    eval->add_option("--way", eval_config.way, "classes per episode");
    eval->add_option("--shot", eval_config.shot, "support samples per class");
    eval->add_option("--queries", eval_config.queries, "query samples per class");
    eval->add_option("--episodes", eval_config.episodes, "episode count");
    eval->add_option("--method", eval_method, "baseline|svae|rsvae|zeroshot");
    eval->add_option("--classifier", eval_classifier, "proto|1nn|logreg|svm");
    eval->add_option("--distance", eval_distance, "euclidean|cosine (proto and 1nn)");
    eval->add_option("--gen-count", eval_config.gen_count, "generated features per class");
    eval->add_option("--wg", eval_config.weight_generated, "generated-prototype weight");
    eval->add_option("--ws", eval_config.weight_support, "support-prototype weight");
    eval->add_option("--seed", eval_config.seed, "master seed");
    eval->add_option("--workers", eval_config.workers, "worker threads");
    eval->add_option("--out", eval_out, "report CSV")->required();
    eval->callback([&] {
        const auto [set, table] = load_features(eval_data);
        eval_config.method = parse_method(eval_method);
        eval_config.classifier = parse_classifier(eval_classifier);
        if (eval_distance == "cosine") eval_config.metric = DistanceMetric::Cosine;
        else if (eval_distance != "euclidean")
            throw ContractError("unknown distance metric: " + eval_distance);
        std::optional<CvaeModel> model;
        if (eval_config.method != Method::Baseline) {
            if (eval_model_path.empty())
                throw ContractError("method " + eval_method + " requires --model");
            model = load_checkpoint(eval_model_path);
        }
        const EvalReport report =
            run_eval(set, table, model ? &*model : nullptr, eval_config);
        std::ostringstream csv;
        write_eval_csv(csv, report);
        write_text_file(eval_out, csv.str());
        char summary[96];
        std::snprintf(summary, sizeof(summary), "accuracy %.4f +- %.4f over %zu episodes\n",
                      report.mean, report.ci95, report.episode_accuracy.size());
        std::cout << summary;
    });

    // ---- sweep ----
    auto* sweep = app.add_subcommand("sweep", "Threshold sweep: select, retrain, evaluate");
    std::string sweep_data, sweep_thresholds = "0.5,0.6,0.7,0.8,0.9", sweep_config_path, sweep_out;
    EvalConfig sweep_eval;
    sweep_eval.episodes = 200;
    sweep->add_option("--data", sweep_data, "container path")->required();
    sweep->add_option("--thresholds", sweep_thresholds, "comma-separated ascending list");
    sweep->add_option("--config", sweep_config_path, "training config")->required();
    sweep->add_option("--episodes", sweep_eval.episodes, "episodes per evaluation");
    sweep->add_option("--gen-count", sweep_eval.gen_count, "generated features per class");
    sweep->add_option("--seed", sweep_eval.seed, "master seed");
    sweep->add_option("--workers", sweep_eval.workers, "worker threads");
    sweep->add_option("--out", sweep_out, "sweep CSV")->required();
    sweep->callback([&] {
        const auto [set, table] = load_features(sweep_data);
        const CvaeConfig config =
            train_config_from_file(sweep_config_path, set.feat_dim(), table.sem_dim());
        const auto rows =
            threshold_sweep(set, table, parse_double_list(sweep_thresholds), config, sweep_eval);
        std::ostringstream csv;
        write_sweep_csv(csv, rows);
        write_text_file(sweep_out, csv.str());
        std::cout << "sweep written to " << sweep_out << "\n";
    });

    // ---- report ----
    auto* report = app.add_subcommand("report", "Analysis reports");
    report->require_subcommand(1);

    auto* kde = report->add_subcommand("kde", "Kernel density estimate of a value list");
    std::string kde_values, kde_out, kde_data, kde_truth, kde_model_path, kde_method = "baseline";
    double kde_bandwidth = -1.0;
    std::uint64_t kde_grid = 256, kde_episodes = 200, kde_seed = 0, kde_shot = 1;
    std::uint64_t kde_gen_count = 500;
    kde->add_option("--values", kde_values, "CSV of values (first column)");
    kde->add_option("--data", kde_data, "container (prototype-distance mode)");
    kde->add_option("--truth", kde_truth, "planted truth file");
    kde->add_option("--model", kde_model_path, "checkpoint (non-baseline methods)");
    kde->add_option("--method", kde_method, "baseline|svae|rsvae|zeroshot");
    kde->add_option("--shot", kde_shot, "support samples per class");
    kde->add_option("--gen-count", kde_gen_count, "generated features per class");
    kde->add_option("--episodes", kde_episodes, "episodes to sample distances from");
    kde->add_option("--seed", kde_seed, "master seed");
    kde->add_option("--bandwidth", kde_bandwidth, "kernel bandwidth (default Silverman)");
    kde->add_option("--grid", kde_grid, "grid size");
    kde->add_option("--out", kde_out, "curve CSV")->required();
    kde->callback([&] {
        std::vector<double> values;
        if (!kde_values.empty()) {
            values = read_values_csv(kde_values);
        } else {
            if (kde_data.empty() || kde_truth.empty())
                throw ContractError("kde needs --values, or --data and --truth");
            const auto [set, table] = load_features(kde_data);
            const PlantedTruth truth = load_truth(kde_truth);
            const Method method = parse_method(kde_method);
            std::optional<CvaeModel> model;
            if (method != Method::Baseline) {
                if (kde_model_path.empty()) throw ContractError("method requires --model");
                model = load_checkpoint(kde_model_path);
            }
            TaskBuildConfig tc;
            tc.method = method;
            tc.classifier = ClassifierKind::NearestPrototype;
            tc.gen_count = kde_gen_count;
            tc.weight_generated = kde_shot == 1 ? 0.5 : 1.0 / 6.0;
            tc.weight_support = 1.0 - tc.weight_generated;
            // Distances between estimated per-class prototypes and the planted
            // class means, over sampled episodes.
            for (std::uint64_t e = 0; e < kde_episodes; ++e) {
                Rng rng(derive_seed(kde_seed, e));
                const Episode episode = sample_episode(set, 5, kde_shot, 1, rng);
                const TaskModel task =
                    build_task_model(set, table, episode, tc, model ? &*model : nullptr, rng);
                for (const auto& row : prototype_distance_report(truth, task.prototypes))
                    values.push_back(row.distance);
            }
        }
        const auto curve = distance_kde_report(
            values, kde_bandwidth > 0.0 ? std::optional<double>(kde_bandwidth) : std::nullopt,
            kde_grid);
        std::ostringstream csv;
        write_kde_csv(csv, curve);
        write_text_file(kde_out, csv.str());
        std::cout << "kde over " << values.size() << " values written to " << kde_out << "\n";
    });

    auto* fidelity = report->add_subcommand(
        "fidelity", "Generated-prototype distance to planted means, all vs selected training");
    std::string fid_data, fid_truth, fid_config_path, fid_out;
    double fid_threshold = 0.9;
    std::uint64_t fid_gen_count = 500;
    fidelity->add_option("--data", fid_data, "container path")->required();
    fidelity->add_option("--truth", fid_truth, "planted truth file")->required();
    fidelity->add_option("--threshold", fid_threshold, "selection threshold");
    fidelity->add_option("--config", fid_config_path, "training config")->required();
    fidelity->add_option("--gen-count", fid_gen_count, "generated features per class");
    fidelity->add_option("--out", fid_out, "fidelity CSV")->required();
    fidelity->callback([&] {
        const auto [set, table] = load_features(fid_data);
        const PlantedTruth truth = load_truth(fid_truth);
        const CvaeConfig config =
            train_config_from_file(fid_config_path, set.feat_dim(), table.sem_dim());
        const auto rows =
            prototype_fidelity_study(set, table, truth, fid_threshold, config, fid_gen_count);
        std::ostringstream csv;
        write_fidelity_csv(csv, rows);
        write_text_file(fid_out, csv.str());
        std::cout << "fidelity study written to " << fid_out << "\n";
    });

    auto* support = report->add_subcommand(
        "support-study", "1-shot accuracy vs support-sample distance to the class mean");
    std::string sup_data, sup_model_path, sup_method = "svae", sup_bins = "0.0:0.2,0.2:0.4,0.4:2.0";
    std::string sup_out;
    EvalConfig sup_config;
    sup_config.episodes = 200;
    support->add_option("--data", sup_data, "container path")->required();
    support->add_option("--model", sup_model_path, "checkpoint (non-baseline method)");
    support->add_option("--method", sup_method, "baseline|svae|rsvae|zeroshot");
    support->add_option("--bins", sup_bins, "lo:hi distance bins, comma separated");
    support->add_option("--episodes", sup_config.episodes, "episodes per bin");
    support->add_option("--gen-count", sup_config.gen_count, "generated features per class");
    support->add_option("--seed", sup_config.seed, "master seed");
    support->add_option("--workers", sup_config.workers, "worker threads");
    support->add_option("--out", sup_out, "study CSV")->required();
    support->callback([&] {
        const auto [set, table] = load_features(sup_data);
        sup_config.method = parse_method(sup_method);
        sup_config.shot = 1;
        std::optional<CvaeModel> model;
        if (sup_config.method != Method::Baseline) {
            if (sup_model_path.empty()) throw ContractError("method requires --model");
            model = load_checkpoint(sup_model_path);
        }
        const auto rows = support_representativeness_study(
            set, table, model ? &*model : nullptr, parse_bins(sup_bins), sup_config);
        std::ostringstream csv;
        write_support_study_csv(csv, rows);
        write_text_file(sup_out, csv.str());
        std::cout << "support study written to " << sup_out << "\n";
    });

    CLI11_PARSE(app, argc, argv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ShapeError& e) {
        std::cerr << "error: shape: " << e.what() << "\n";
    } catch (const CapacityError& e) {
        std::cerr << "error: capacity: " << e.what() << "\n";
    } catch (const FormatError& e) {
        std::cerr << "error: format: " << e.what() << "\n";
    } catch (const LookupError& e) {
        std::cerr << "error: lookup: " << e.what() << "\n";
    } catch (const NumericError& e) {
        std::cerr << "error: numeric: " << e.what() << "\n";
    } catch (const ContractError& e) {
        std::cerr << "error: contract: " << e.what() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
    }
    return 1;
}

#include "fsgen/synthoracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "fsgen/errors.hpp"

namespace fsgen {

void SynthConfig::validate() const {
    if (num_base_classes < 1 || num_novel_classes < 1 || samples_per_class < 1)
        throw ContractError("SynthConfig: all counts must be >= 1");
    if (feat_dim < 1 || sem_dim < 1) throw ContractError("SynthConfig: dims must be >= 1");
    if (!(noise_sigma > 0.0)) throw ContractError("SynthConfig: noise_sigma must be positive");
    if (outlier_fraction < 0.0 || outlier_fraction >= 1.0)
        throw ContractError("SynthConfig: outlier_fraction must be in [0,1)");
    if (outlier_shift < 0.0) throw ContractError("SynthConfig: outlier_shift must be nonnegative");
}

SynthData generate_synth(const SynthConfig& config, Rng& rng) {
    config.validate();
    const std::size_t num_classes = config.num_base_classes + config.num_novel_classes;
    const std::size_t d = config.feat_dim;
    const std::size_t s = config.sem_dim;

    SynthData out;
    out.semantics.embeddings = Matrix(num_classes, s);
    for (std::size_t c = 0; c < num_classes; ++c) {
        auto a = out.semantics.embeddings.row(c);
        double norm_sq = 0.0;
        do {
            norm_sq = 0.0;
            for (std::size_t j = 0; j < s; ++j) {
                a[j] = rng.normal();
                norm_sq += a[j] * a[j];
            }
        } while (norm_sq == 0.0);
        const double inv_norm = 1.0 / std::sqrt(norm_sq);
        for (std::size_t j = 0; j < s; ++j) a[j] *= inv_norm;
    }

    out.truth.mixing = Matrix(d, s);
    const double w_sigma = 1.0 / std::sqrt(static_cast<double>(s));
    for (double& w : out.truth.mixing.data) w = w_sigma * rng.normal();

    out.truth.class_means = Matrix(num_classes, d);
    for (std::size_t c = 0; c < num_classes; ++c) {
        const Vec pre = matvec(out.truth.mixing, out.semantics.embeddings.row(c));
        auto mean = out.truth.class_means.row(c);
        for (std::size_t j = 0; j < d; ++j) mean[j] = pre[j] > 0.0 ? pre[j] : 0.0;
    }

    const std::size_t n = config.samples_per_class;
    const auto outlier_count =
        static_cast<std::size_t>(config.outlier_fraction * static_cast<double>(n));
    out.features.features = Matrix(num_classes * n, d);
    out.features.labels.resize(num_classes * n);
    out.features.class_split.resize(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c)
        out.features.class_split[c] = c < config.num_base_classes ? Split::Base : Split::Novel;
    out.truth.outliers.resize(num_classes);

    std::vector<std::size_t> positions(n);
    for (std::size_t c = 0; c < num_classes; ++c) {
        // Pick which positions within the class block are outliers.
        for (std::size_t i = 0; i < n; ++i) positions[i] = i;
        for (std::size_t i = 0; i < outlier_count; ++i) {
            const std::size_t j = i + rng.uniform_below(n - i);
            std::swap(positions[i], positions[j]);
        }
        std::vector<std::size_t> chosen(positions.begin(),
                                        positions.begin() + static_cast<std::ptrdiff_t>(outlier_count));
        std::sort(chosen.begin(), chosen.end());
        std::vector<bool> is_outlier(n, false);
        for (std::size_t i : chosen) is_outlier[i] = true;
        out.truth.outliers[c] = std::move(chosen);

        const auto mean = out.truth.class_means.row(c);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t row = c * n + i;
            const double sigma =
                is_outlier[i] ? config.outlier_shift * config.noise_sigma : config.noise_sigma;
            auto feature = out.features.features.row(row);
            for (std::size_t j = 0; j < d; ++j) {
                const double v = mean[j] + sigma * rng.normal();
                feature[j] = v > 0.0 ? v : 0.0;
            }
            out.features.labels[row] = static_cast<std::uint32_t>(c);
        }
    }
    out.features.validate();
    return out;
}

std::vector<DistanceRow> prototype_distance_report(const PlantedTruth& truth,
                                                   const std::vector<Prototype>& prototypes) {
    std::vector<DistanceRow> rows;
    rows.reserve(prototypes.size());
    for (const Prototype& p : prototypes) {
        if (p.class_id >= truth.class_means.rows)
            throw LookupError("prototype_distance_report: unknown class " +
                              std::to_string(p.class_id));
        if (p.vector.size() != truth.class_means.cols)
            throw ShapeError("prototype_distance_report: prototype dim mismatch");
        rows.push_back({p.class_id, l2_distance(p.vector, truth.class_means.row(p.class_id))});
    }
    return rows;
}

namespace {

constexpr char kTruthMagic[4] = {'T', 'R', 'U', '1'};

void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ofstream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(b), 8);
}

struct TruthReader {
    std::ifstream in;
    std::size_t offset = 0;

    void raw(void* p, std::size_t n, const char* what) {
        in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n)
            throw FormatError("truncated truth file: needed " + std::to_string(n) + " bytes for " +
                              what + " at offset " + std::to_string(offset));
        offset += n;
    }
    std::uint32_t u32(const char* what) {
        unsigned char b[4];
        raw(b, 4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }
    double f64(const char* what) {
        unsigned char b[8];
        raw(b, 8, what);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
};

}  // namespace

void save_truth(const PlantedTruth& truth, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open truth file for writing: " + path.string());
    out.write(kTruthMagic, 4);
    put_u32(out, static_cast<std::uint32_t>(truth.mixing.rows));
    put_u32(out, static_cast<std::uint32_t>(truth.mixing.cols));
    put_u32(out, static_cast<std::uint32_t>(truth.class_means.rows));
    for (double v : truth.mixing.data) put_f64(out, v);
    for (double v : truth.class_means.data) put_f64(out, v);
    for (const auto& list : truth.outliers) {
        put_u32(out, static_cast<std::uint32_t>(list.size()));
        for (std::size_t i : list) put_u32(out, static_cast<std::uint32_t>(i));
    }
    if (!out) throw FormatError("truth file write failed: " + path.string());
}

PlantedTruth load_truth(const std::filesystem::path& path) {
    TruthReader r;
    r.in.open(path, std::ios::binary);
    if (!r.in) throw FormatError("cannot open truth file: " + path.string());
    char magic[4];
    r.raw(magic, 4, "magic");
    if (std::memcmp(magic, kTruthMagic, 4) != 0)
        throw FormatError("bad truth magic at offset 0 in " + path.string());
    const std::uint32_t d = r.u32("feat_dim");
    const std::uint32_t s = r.u32("sem_dim");
    const std::uint32_t num_classes = r.u32("num_classes");

    PlantedTruth truth;
    truth.mixing = Matrix(d, s);
    for (double& v : truth.mixing.data) v = r.f64("mixing entry");
    truth.class_means = Matrix(num_classes, d);
    for (double& v : truth.class_means.data) v = r.f64("class mean entry");
    truth.outliers.resize(num_classes);
    for (auto& list : truth.outliers) {
        const std::uint32_t count = r.u32("outlier count");
        list.resize(count);
        for (auto& index : list) index = r.u32("outlier index");
    }
    return truth;
}

}  // namespace fsgen

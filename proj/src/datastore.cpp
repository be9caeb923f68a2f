#include "fsgen/datastore.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fsgen/errors.hpp"

namespace fsgen {

namespace {

constexpr char kMagic[4] = {'F', 'S', 'F', '1'};
constexpr std::uint32_t kVersion = 1;

// Little-endian writer/reader over a byte buffer; the reader tracks its offset
// so format errors can name the failing byte.
struct ByteWriter {
    std::vector<unsigned char> bytes;

    void raw(const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        bytes.insert(bytes.end(), c, c + n);
    }
    void u32(std::uint32_t v) {
        unsigned char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
        raw(b, 4);
    }
    void u8(std::uint8_t v) { raw(&v, 1); }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
};

struct ByteReader {
    const unsigned char* data;
    std::size_t size;
    std::size_t offset = 0;

    void need(std::size_t n, const char* what) {
        if (offset + n > size) {
            throw FormatError("truncated container: needed " + std::to_string(n) + " bytes for " +
                              what + " at offset " + std::to_string(offset));
        }
    }
    void raw(void* p, std::size_t n, const char* what) {
        need(n, what);
        std::memcpy(p, data + offset, n);
        offset += n;
    }
    std::uint32_t u32(const char* what) {
        unsigned char b[4];
        raw(b, 4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }
    std::uint8_t u8(const char* what) {
        std::uint8_t v;
        raw(&v, 1, what);
        return v;
    }
    float f32(const char* what) {
        const std::uint32_t bits = u32(what);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
};

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open file: " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open file for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed: " + path.string());
}

}  // namespace

std::vector<std::uint32_t> FeatureSet::classes_in_split(Split split) const {
    std::vector<std::uint32_t> ids;
    for (std::uint32_t c = 0; c < class_split.size(); ++c) {
        if (class_split[c] == split) ids.push_back(c);
    }
    return ids;
}

void FeatureSet::validate() const {
    if (labels.size() != features.rows)
        throw ContractError("FeatureSet: label count does not match sample count");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= class_split.size())
            throw ContractError("FeatureSet: label " + std::to_string(labels[i]) + " at row " +
                                std::to_string(i) + " has no split assignment");
    }
    if (!all_finite(features.data)) throw NumericError("FeatureSet: non-finite feature entry");
}

std::span<const double> SemanticTable::embedding(std::uint32_t class_id) const {
    if (class_id >= embeddings.rows)
        throw LookupError("SemanticTable: no embedding for class " + std::to_string(class_id));
    return embeddings.row(class_id);
}

void save_features(const FeatureSet& set, const SemanticTable& table,
                   const std::filesystem::path& path) {
    set.validate();
    if (table.class_count() != set.class_count())
        throw ContractError("save_features: semantic table does not cover all classes");

    ByteWriter w;
    w.raw(kMagic, 4);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(set.sample_count()));
    w.u32(static_cast<std::uint32_t>(set.feat_dim()));
    w.u32(static_cast<std::uint32_t>(set.class_count()));
    w.u32(static_cast<std::uint32_t>(table.sem_dim()));
    for (double v : set.features.data) w.f32(static_cast<float>(v));
    for (std::uint32_t label : set.labels) w.u32(label);
    for (Split s : set.class_split) w.u8(static_cast<std::uint8_t>(s));
    for (double v : table.embeddings.data) w.f32(static_cast<float>(v));
    write_file(path, w.bytes);
}

std::pair<FeatureSet, SemanticTable> load_features(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    ByteReader r{bytes.data(), bytes.size()};

    char magic[4];
    r.raw(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("bad magic bytes at offset 0 in " + path.string());
    const std::uint32_t version = r.u32("version");
    if (version != kVersion)
        throw FormatError("unsupported container version " + std::to_string(version) +
                          " at offset 4");

    const std::uint32_t num_samples = r.u32("num_samples");
    const std::uint32_t feat_dim = r.u32("feat_dim");
    const std::uint32_t num_classes = r.u32("num_classes");
    const std::uint32_t sem_dim = r.u32("sem_dim");
    if (feat_dim == 0 || num_classes == 0 || sem_dim == 0)
        throw FormatError("container header has zero dimension at offset 8");

    FeatureSet set;
    set.features = Matrix(num_samples, feat_dim);
    for (double& v : set.features.data) v = static_cast<double>(r.f32("feature"));
    set.labels.resize(num_samples);
    for (auto& label : set.labels) label = r.u32("label");
    set.class_split.resize(num_classes);
    for (auto& s : set.class_split) {
        const std::uint8_t code = r.u8("split code");
        if (code > 2)
            throw FormatError("invalid split code " + std::to_string(code) + " at offset " +
                              std::to_string(r.offset - 1));
        s = static_cast<Split>(code);
    }
    SemanticTable table;
    table.embeddings = Matrix(num_classes, sem_dim);
    for (double& v : table.embeddings.data) v = static_cast<double>(r.f32("embedding"));

    if (r.offset != r.size)
        throw FormatError("trailing bytes after offset " + std::to_string(r.offset));
    set.validate();
    return {std::move(set), std::move(table)};
}

void save_manifest(const std::vector<std::string>& class_names, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot open manifest for writing: " + path.string());
    for (std::size_t i = 0; i < class_names.size(); ++i) out << i << '\t' << class_names[i] << '\n';
}

std::vector<std::string> load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open manifest: " + path.string());
    std::vector<std::string> names;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw FormatError("manifest line " + std::to_string(line_no) + " is missing a tab");
        const std::size_t id = std::stoul(line.substr(0, tab));
        if (id != names.size())
            throw FormatError("manifest line " + std::to_string(line_no) +
                              " breaks dense class-id order");
        names.push_back(line.substr(tab + 1));
    }
    return names;
}

std::vector<std::size_t> class_sample_indices(const FeatureSet& set, std::uint32_t class_id) {
    if (class_id >= set.class_count())
        throw LookupError("unknown class id " + std::to_string(class_id));
    std::vector<std::size_t> indices;
    for (std::size_t i = 0; i < set.labels.size(); ++i) {
        if (set.labels[i] == class_id) indices.push_back(i);
    }
    return indices;
}

Matrix class_features(const FeatureSet& set, std::uint32_t class_id) {
    const auto indices = class_sample_indices(set, class_id);
    Matrix out(indices.size(), set.feat_dim());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const auto src = set.features.row(indices[r]);
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

std::pair<Matrix, std::vector<std::uint32_t>> base_training_rows(const FeatureSet& set) {
    std::vector<std::size_t> rows;
    for (std::uint32_t class_id : set.classes_in_split(Split::Base)) {
        const auto idx = class_sample_indices(set, class_id);
        rows.insert(rows.end(), idx.begin(), idx.end());
    }
    Matrix features(rows.size(), set.feat_dim());
    std::vector<std::uint32_t> labels;
    labels.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto src = set.features.row(rows[r]);
        std::copy(src.begin(), src.end(), features.row(r).begin());
        labels.push_back(set.labels[rows[r]]);
    }
    return {std::move(features), std::move(labels)};
}

namespace {

// First `count` entries of a Fisher-Yates shuffle over `pool`.
template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> pool, std::size_t count, Rng& rng) {
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + rng.uniform_below(pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
}

}  // namespace

Episode sample_episode(const FeatureSet& set, std::size_t way, std::size_t shot,
                       std::size_t queries_per_class, Rng& rng) {
    if (way == 0 || shot == 0 || queries_per_class == 0)
        throw ContractError("sample_episode: way, shot and queries must be positive");
    const auto novel = set.classes_in_split(Split::Novel);
    if (novel.size() < way)
        throw CapacityError("sample_episode: novel split has " + std::to_string(novel.size()) +
                            " classes, need " + std::to_string(way));

    Episode ep;
    ep.way = way;
    ep.shot = shot;
    ep.queries_per_class = queries_per_class;
    ep.class_ids = sample_without_replacement(novel, way, rng);
    for (std::uint32_t class_id : ep.class_ids) {
        auto rows = class_sample_indices(set, class_id);
        if (rows.size() < shot + queries_per_class)
            throw CapacityError("sample_episode: class " + std::to_string(class_id) + " has " +
                                std::to_string(rows.size()) + " samples, need " +
                                std::to_string(shot + queries_per_class));
        auto drawn = sample_without_replacement(std::move(rows), shot + queries_per_class, rng);
        ep.support.emplace_back(drawn.begin(), drawn.begin() + static_cast<std::ptrdiff_t>(shot));
        ep.query.emplace_back(drawn.begin() + static_cast<std::ptrdiff_t>(shot), drawn.end());
    }
    return ep;
}

}  // namespace fsgen

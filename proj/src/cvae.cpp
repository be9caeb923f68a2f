#include "fsgen/cvae.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <ostream>

#include "fsgen/errors.hpp"

namespace fsgen {

void CvaeConfig::validate() const {
    if (feat_dim < 1 || sem_dim < 1 || latent_dim < 1 || hidden_dim < 1)
        throw ContractError("CvaeConfig: all dims must be >= 1");
    if (decoder_depth != 2 && decoder_depth != 3)
        throw ContractError("CvaeConfig: decoder_depth must be 2 or 3");
    if (!(learning_rate > 0.0)) throw ContractError("CvaeConfig: learning_rate must be positive");
    if (batch_size < 1) throw ContractError("CvaeConfig: batch_size must be >= 1");
}

namespace {

MlpSpec encoder_spec(const CvaeConfig& c) {
    MlpSpec spec;
    spec.layer_dims = {c.feat_dim + c.sem_dim, c.hidden_dim, 2 * c.latent_dim};
    spec.hidden = Activation::leaky_relu();
    spec.output = Activation::identity();
    return spec;
}

MlpSpec decoder_spec(const CvaeConfig& c) {
    MlpSpec spec;
    spec.layer_dims = {c.latent_dim + c.sem_dim, c.hidden_dim};
    if (c.decoder_depth == 3) spec.layer_dims.push_back(c.hidden_dim);
    spec.layer_dims.push_back(c.feat_dim);
    spec.hidden = Activation::leaky_relu();
    spec.output = Activation::relu();
    return spec;
}

Vec concat(std::span<const double> a, std::span<const double> b) {
    Vec out;
    out.reserve(a.size() + b.size());
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

}  // namespace

CvaeModel make_cvae(const CvaeConfig& config) {
    config.validate();
    CvaeModel model;
    model.config = config;
    Rng rng(derive_seed(config.seed, 0x1715));
    model.encoder = make_mlp(encoder_spec(config), rng);
    model.decoder = make_mlp(decoder_spec(config), rng);
    model.encoder_adam = AdamState::zeros_like(model.encoder);
    model.decoder_adam = AdamState::zeros_like(model.decoder);
    return model;
}

std::pair<Vec, Vec> encode(const CvaeModel& model, std::span<const double> x,
                           std::span<const double> a) {
    if (x.size() != model.config.feat_dim || a.size() != model.config.sem_dim)
        throw ShapeError("encode: input dims do not match config");
    const Vec out = mlp_forward(model.encoder, concat(x, a));
    const std::size_t latent = model.config.latent_dim;
    Vec mu(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(latent));
    Vec logvar(latent);
    for (std::size_t i = 0; i < latent; ++i)
        logvar[i] = std::clamp(out[latent + i], -kLogvarClamp, kLogvarClamp);
    return {std::move(mu), std::move(logvar)};
}

Vec reparameterize_with_noise(std::span<const double> mu, std::span<const double> logvar,
                              std::span<const double> noise) {
    if (mu.size() != logvar.size() || mu.size() != noise.size())
        throw ShapeError("reparameterize: dim mismatch");
    Vec z(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i)
        z[i] = mu[i] + std::exp(0.5 * logvar[i]) * noise[i];
    return z;
}

Vec reparameterize(std::span<const double> mu, std::span<const double> logvar, Rng& rng) {
    Vec noise(mu.size());
    for (double& n : noise) n = rng.normal();
    return reparameterize_with_noise(mu, logvar, noise);
}

double kl_divergence(std::span<const double> mu, std::span<const double> logvar) {
    if (mu.size() != logvar.size()) throw ShapeError("kl_divergence: dim mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i)
        sum += std::exp(logvar[i]) + mu[i] * mu[i] - 1.0 - logvar[i];
    return 0.5 * sum;
}

double reconstruction_loss(std::span<const double> x, std::span<const double> x_hat) {
    if (x.size() != x_hat.size()) throw ShapeError("reconstruction_loss: dim mismatch");
    return 0.5 * squared_distance(x, x_hat);
}

CvaeLossResult cvae_loss_with_noise(const CvaeModel& model, std::span<const double> x,
                                    std::span<const double> a, std::span<const double> noise) {
    const std::size_t latent = model.config.latent_dim;
    if (noise.size() != latent) throw ShapeError("cvae_loss: noise dim mismatch");
    if (x.size() != model.config.feat_dim || a.size() != model.config.sem_dim)
        throw ShapeError("cvae_loss: input dims do not match config");

    ForwardCache enc_cache;
    const Vec enc_out = mlp_forward(model.encoder, concat(x, a), enc_cache);
    Vec mu(enc_out.begin(), enc_out.begin() + static_cast<std::ptrdiff_t>(latent));
    Vec logvar(latent);
    for (std::size_t i = 0; i < latent; ++i)
        logvar[i] = std::clamp(enc_out[latent + i], -kLogvarClamp, kLogvarClamp);

    const Vec z = reparameterize_with_noise(mu, logvar, noise);
    ForwardCache dec_cache;
    const Vec x_hat = mlp_forward(model.decoder, concat(z, a), dec_cache);

    CvaeLossResult result;
    result.kl = kl_divergence(mu, logvar);
    result.recon = reconstruction_loss(x, x_hat);
    result.total = result.kl + result.recon;
    if (!std::isfinite(result.total)) throw NumericError("cvae_loss: non-finite loss");

    // d recon / d x_hat, back through the decoder.
    Vec g_xhat(x_hat.size());
    for (std::size_t i = 0; i < x_hat.size(); ++i) g_xhat[i] = x_hat[i] - x[i];
    result.decoder_grads = GradBundle::zeros_like(model.decoder);
    const Vec g_dec_in = mlp_backward(model.decoder, dec_cache, g_xhat, result.decoder_grads);

    // Chain into the encoder outputs. The clamp passes gradients straight
    // through so a runaway logvar is still pushed back inward by the KL term.
    Vec g_enc_out(2 * latent);
    for (std::size_t i = 0; i < latent; ++i) {
        const double g_z = g_dec_in[i];
        g_enc_out[i] = g_z + mu[i];  // dz/dmu = 1, dKL/dmu = mu
        const double sigma = std::exp(0.5 * logvar[i]);
        g_enc_out[latent + i] =
            g_z * 0.5 * sigma * noise[i] + 0.5 * (std::exp(logvar[i]) - 1.0);
    }
    result.encoder_grads = GradBundle::zeros_like(model.encoder);
    mlp_backward(model.encoder, enc_cache, g_enc_out, result.encoder_grads);
    return result;
}

CvaeLossResult cvae_loss(const CvaeModel& model, std::span<const double> x,
                         std::span<const double> a, Rng& rng) {
    Vec noise(model.config.latent_dim);
    for (double& n : noise) n = rng.normal();
    return cvae_loss_with_noise(model, x, a, noise);
}

namespace {

struct EpochStats {
    double total = 0.0, kl = 0.0, recon = 0.0;
    std::size_t count = 0;

    void add(const CvaeLossResult& r) {
        total += r.total;
        kl += r.kl;
        recon += r.recon;
        count += 1;
    }
    void record(TrainLog& log) const {
        const double inv = count > 0 ? 1.0 / static_cast<double>(count) : 0.0;
        log.total.push_back(total * inv);
        log.kl.push_back(kl * inv);
        log.recon.push_back(recon * inv);
    }
};

}  // namespace

TrainLog train_cvae(CvaeModel& model, const Matrix& features,
                    const std::vector<std::uint32_t>& labels, const SemanticTable& semantics) {
    if (features.rows == 0) throw CapacityError("train_cvae: empty training set");
    if (labels.size() != features.rows) throw ShapeError("train_cvae: label count mismatch");
    for (std::uint32_t label : labels) semantics.embedding(label);  // LookupError early

    const CvaeConfig& cfg = model.config;
    Rng rng(derive_seed(cfg.seed, 0x7261));

    TrainLog log;
    log.seed = cfg.seed;

    // Pre-training evaluation, recorded as epoch 0.
    {
        EpochStats stats;
        for (std::size_t i = 0; i < features.rows; ++i)
            stats.add(cvae_loss(model, features.row(i), semantics.embedding(labels[i]), rng));
        stats.record(log);
    }

    std::vector<std::size_t> order(features.rows);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            const std::size_t j = i + rng.uniform_below(order.size() - i);
            std::swap(order[i], order[j]);
        }
        EpochStats stats;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, order.size());
            GradBundle enc_grads = GradBundle::zeros_like(model.encoder);
            GradBundle dec_grads = GradBundle::zeros_like(model.decoder);
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t row = order[k];
                CvaeLossResult r =
                    cvae_loss(model, features.row(row), semantics.embedding(labels[row]), rng);
                if (!std::isfinite(r.total))
                    throw NumericError("train_cvae: non-finite loss at epoch " +
                                       std::to_string(epoch) + ", batch starting " +
                                       std::to_string(start));
                enc_grads.add(r.encoder_grads);
                dec_grads.add(r.decoder_grads);
                stats.add(r);
            }
            const double scale = 1.0 / static_cast<double>(end - start);
            enc_grads.scale(scale);
            dec_grads.scale(scale);
            adam_step(model.encoder, enc_grads, model.encoder_adam, cfg.learning_rate);
            adam_step(model.decoder, dec_grads, model.decoder_adam, cfg.learning_rate);
        }
        stats.record(log);
        log.epochs_completed = epoch;
    }
    return log;
}

Matrix generate_features(const CvaeModel& model, std::span<const double> a, std::size_t count,
                         Rng& rng) {
    if (count < 1) throw ContractError("generate_features: count must be >= 1");
    if (a.size() != model.config.sem_dim)
        throw ShapeError("generate_features: semantic dim mismatch");
    const std::size_t latent = model.config.latent_dim;
    Matrix out(count, model.config.feat_dim);
    Vec z(latent);
    for (std::size_t r = 0; r < count; ++r) {
        for (double& v : z) v = rng.normal();
        const Vec x_hat = mlp_forward(model.decoder, concat(z, a));
        std::copy(x_hat.begin(), x_hat.end(), out.row(r).begin());
    }
    return out;
}

namespace {

constexpr char kCkptMagic[4] = {'C', 'V', 'A', '1'};
constexpr std::uint32_t kCkptVersion = 1;

void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ofstream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

struct CkptReader {
    std::ifstream in;
    std::size_t offset = 0;

    void raw(void* p, std::size_t n, const char* what) {
        in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n)
            throw FormatError("truncated checkpoint: needed " + std::to_string(n) + " bytes for " +
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
    std::uint64_t u64(const char* what) {
        unsigned char b[8];
        raw(b, 8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }
    double f64(const char* what) {
        const std::uint64_t bits = u64(what);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
};

void put_net(std::ofstream& out, const Mlp& net) {
    for (const auto& layer : net.layers) {
        for (double v : layer.weights.data) put_f64(out, v);
        for (double v : layer.bias) put_f64(out, v);
    }
}

void get_net(CkptReader& r, Mlp& net) {
    for (auto& layer : net.layers) {
        for (double& v : layer.weights.data) v = r.f64("weight");
        for (double& v : layer.bias) v = r.f64("bias");
    }
}

void put_adam(std::ofstream& out, const AdamState& s) {
    put_u64(out, s.step_count);
    put_f64(out, s.beta1);
    put_f64(out, s.beta2);
    put_f64(out, s.epsilon);
    for (std::size_t l = 0; l < s.weight_m.size(); ++l) {
        for (double v : s.weight_m[l].data) put_f64(out, v);
        for (double v : s.weight_v[l].data) put_f64(out, v);
        for (double v : s.bias_m[l]) put_f64(out, v);
        for (double v : s.bias_v[l]) put_f64(out, v);
    }
}

void get_adam(CkptReader& r, AdamState& s) {
    s.step_count = r.u64("adam step_count");
    s.beta1 = r.f64("adam beta1");
    s.beta2 = r.f64("adam beta2");
    s.epsilon = r.f64("adam epsilon");
    for (std::size_t l = 0; l < s.weight_m.size(); ++l) {
        for (double& v : s.weight_m[l].data) v = r.f64("adam m");
        for (double& v : s.weight_v[l].data) v = r.f64("adam v");
        for (double& v : s.bias_m[l]) v = r.f64("adam m");
        for (double& v : s.bias_v[l]) v = r.f64("adam v");
    }
}

}  // namespace

void save_checkpoint(const CvaeModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open checkpoint for writing: " + path.string());
    out.write(kCkptMagic, 4);
    put_u32(out, kCkptVersion);
    const CvaeConfig& c = model.config;
    put_u32(out, static_cast<std::uint32_t>(c.feat_dim));
    put_u32(out, static_cast<std::uint32_t>(c.sem_dim));
    put_u32(out, static_cast<std::uint32_t>(c.latent_dim));
    put_u32(out, static_cast<std::uint32_t>(c.hidden_dim));
    put_u32(out, static_cast<std::uint32_t>(c.decoder_depth));
    put_u32(out, static_cast<std::uint32_t>(c.epochs));
    put_u32(out, static_cast<std::uint32_t>(c.batch_size));
    put_f64(out, c.learning_rate);
    put_u64(out, c.seed);
    put_net(out, model.encoder);
    put_net(out, model.decoder);
    put_adam(out, model.encoder_adam);
    put_adam(out, model.decoder_adam);
    if (!out) throw FormatError("checkpoint write failed: " + path.string());
}

CvaeModel load_checkpoint(const std::filesystem::path& path) {
    CkptReader r;
    r.in.open(path, std::ios::binary);
    if (!r.in) throw FormatError("cannot open checkpoint: " + path.string());
    char magic[4];
    r.raw(magic, 4, "magic");
    if (std::memcmp(magic, kCkptMagic, 4) != 0)
        throw FormatError("bad checkpoint magic at offset 0 in " + path.string());
    const std::uint32_t version = r.u32("version");
    if (version != kCkptVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version));

    CvaeConfig c;
    c.feat_dim = r.u32("feat_dim");
    c.sem_dim = r.u32("sem_dim");
    c.latent_dim = r.u32("latent_dim");
    c.hidden_dim = r.u32("hidden_dim");
    c.decoder_depth = r.u32("decoder_depth");
    c.epochs = r.u32("epochs");
    c.batch_size = r.u32("batch_size");
    c.learning_rate = r.f64("learning_rate");
    c.seed = r.u64("seed");
    c.validate();

    CvaeModel model = make_cvae(c);
    get_net(r, model.encoder);
    get_net(r, model.decoder);
    get_adam(r, model.encoder_adam);
    get_adam(r, model.decoder_adam);
    return model;
}

void write_train_log_csv(std::ostream& out, const TrainLog& log) {
    out << "epoch,total,kl,recon\n";
    char line[128];
    for (std::size_t e = 0; e < log.total.size(); ++e) {
        std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g,%.9g\n", e, log.total[e], log.kl[e],
                      log.recon[e]);
        out << line;
    }
}

}  // namespace fsgen

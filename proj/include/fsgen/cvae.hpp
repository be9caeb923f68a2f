#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "fsgen/datastore.hpp"
#include "fsgen/gradnet.hpp"
#include "fsgen/matrix.hpp"
#include "fsgen/rng.hpp"

namespace fsgen {

struct CvaeConfig {
    std::size_t feat_dim = 0;
    std::size_t sem_dim = 0;
    std::size_t latent_dim = 512;
    std::size_t hidden_dim = 4096;
    std::size_t decoder_depth = 2;  // 3 inserts one extra hidden FC + LeakyReLU
    double learning_rate = 1e-4;
    std::size_t epochs = 40;
    std::size_t batch_size = 128;
    std::uint64_t seed = 0;

    void validate() const;
};

// Encoder maps concat(x, a) to concat(mu_z, logvar_z); decoder maps
// concat(z, a) back to a nonnegative feature vector (ReLU output). The latent
// prior is N(0, I) for every class.
struct CvaeModel {
    CvaeConfig config;
    Mlp encoder;
    Mlp decoder;
    AdamState encoder_adam;
    AdamState decoder_adam;
};

CvaeModel make_cvae(const CvaeConfig& config);

inline constexpr double kLogvarClamp = 10.0;

// Returns (mu_z, logvar_z); logvar is clamped to [-10, 10].
std::pair<Vec, Vec> encode(const CvaeModel& model, std::span<const double> x,
                           std::span<const double> a);

// z = mu + exp(logvar / 2) * n with n ~ N(0, I).
Vec reparameterize(std::span<const double> mu, std::span<const double> logvar, Rng& rng);
Vec reparameterize_with_noise(std::span<const double> mu, std::span<const double> logvar,
                              std::span<const double> noise);

// Closed form KL(N(mu, diag exp(logvar)) || N(0, I)).
double kl_divergence(std::span<const double> mu, std::span<const double> logvar);

// Half squared error, the unit-variance Gaussian reconstruction likelihood.
double reconstruction_loss(std::span<const double> x, std::span<const double> x_hat);

struct CvaeLossResult {
    double total = 0.0;
    double kl = 0.0;
    double recon = 0.0;
    GradBundle encoder_grads;
    GradBundle decoder_grads;
};

// Single-sample loss with gradients flowing through the reparameterization
// into both networks.
CvaeLossResult cvae_loss(const CvaeModel& model, std::span<const double> x,
                         std::span<const double> a, Rng& rng);
CvaeLossResult cvae_loss_with_noise(const CvaeModel& model, std::span<const double> x,
                                    std::span<const double> a, std::span<const double> noise);

struct TrainLog {
    // Index 0 holds the pre-training evaluation; index e >= 1 holds the mean
    // over the batches of epoch e.
    std::vector<double> total;
    std::vector<double> kl;
    std::vector<double> recon;
    std::size_t epochs_completed = 0;
    std::uint64_t seed = 0;
};

// Shuffled mini-batches, gradients averaged within a batch, one Adam step per
// batch. Deterministic given config.seed.
TrainLog train_cvae(CvaeModel& model, const Matrix& features,
                    const std::vector<std::uint32_t>& labels, const SemanticTable& semantics);

// count rows of G(z, a) with z ~ N(0, I).
Matrix generate_features(const CvaeModel& model, std::span<const double> a, std::size_t count,
                         Rng& rng);

// Checkpoint: magic "CVA1" | u32 version | config | weights f64 | adam state.
void save_checkpoint(const CvaeModel& model, const std::filesystem::path& path);
CvaeModel load_checkpoint(const std::filesystem::path& path);

// CSV with header "epoch,total,kl,recon"; epoch 0 is the pre-training row.
void write_train_log_csv(std::ostream& out, const TrainLog& log);

}  // namespace fsgen

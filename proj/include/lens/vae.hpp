// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "json.hpp"
#include "lens/datapipe.hpp"
#include "lens/nncore.hpp"

namespace lens::nn {

/// Variational autoencoder over standardized feature rows.
///
/// The encoder trunk feeds two linear heads giving the posterior mean and
/// log-variance of a diagonal Gaussian in k dimensions. The decoder maps a
/// latent code back to the d input features with a linear final layer.
struct VaeModel {
    DenseNet encoder;      // d -> trunk width, relu
    DenseNet mu_head;      // one linear layer -> k
    DenseNet logvar_head;  // one linear layer -> k
    DenseNet decoder;      // k -> d, linear output
    std::size_t latent_dim = 0;
    double beta = 1.0;

    std::size_t input_dim() const noexcept;
    void validate() const;
    bool operator==(const VaeModel&) const = default;
};

struct VaeSpec {
    std::vector<std::size_t> encoder_hidden{64, 32};
    std::size_t latent_dim = 16;
    std::vector<std::size_t> decoder_hidden{32, 64};
    double beta = 1.0;

    void validate(std::size_t input_dim) const;
};

nlohmann::json to_json(const VaeSpec& spec);
VaeSpec vae_spec_from_json(const nlohmann::json& j, VaeSpec defaults = {});

VaeModel make_vae(std::size_t input_dim, const VaeSpec& spec, Rng& rng);

struct VaeEncoding {
    Matrix mu;
    Matrix logvar;
};

VaeEncoding vae_encode(const VaeModel& model, const Matrix& batch);

/// z = mu + exp(logvar / 2) * noise, elementwise.
Matrix reparameterize(const Matrix& mu, const Matrix& logvar, const Matrix& noise);

struct VaeLoss {
    double loss = 0.0;
    double recon = 0.0;
    double kl = 0.0;
};

/// recon is the row mean of the summed squared error; kl is the row mean of
/// -1/2 * sum(1 + logvar - mu^2 - exp(logvar)); loss = recon + beta * kl.
VaeLoss vae_loss(const Matrix& x, const Matrix& x_hat, const Matrix& mu, const Matrix& logvar, double beta);

struct VaeLossGrad {
    VaeLoss value;
    Matrix d_x_hat;
    Matrix d_mu;
    Matrix d_logvar;
};

VaeLossGrad vae_loss_grad(const Matrix& x, const Matrix& x_hat, const Matrix& mu, const Matrix& logvar, double beta);

struct VaeGradients {
    GradientSet encoder;
    GradientSet mu_head;
    GradientSet logvar_head;
    GradientSet decoder;

    static VaeGradients zeros_like(const VaeModel& model);
};

/// Loss of one batch under the given noise, with parameter gradients added
/// into `grads`.
VaeLoss vae_batch_gradients(const VaeModel& model, const Matrix& x, const Matrix& noise, VaeGradients& grads);

std::vector<std::span<double>> parameter_views(VaeModel& model);
std::vector<std::span<const double>> gradient_views(const VaeGradients& grads);

struct EpochRecord {
    double loss = 0.0;
    double recon = 0.0;
    double kl = 0.0;
};

struct VaeTrainResult {
    VaeModel model;
    std::vector<EpochRecord> history;
};

/// Seeded minibatch training: initialization, per-epoch shuffles and the
/// reparameterization noise all come from one generator seeded by cfg.seed.
VaeTrainResult train_vae(const data::Dataset& data, const VaeSpec& spec, const TrainConfig& cfg);

/// Replaces features with the posterior means; labels and row order kept.
data::Dataset encode_dataset(const VaeModel& model, const data::Dataset& data);

/// Encoder trunk, both heads and the decoder.
std::size_t count_parameters(const VaeModel& model) noexcept;

nlohmann::json to_json(const VaeModel& model);
VaeModel vae_from_json(const nlohmann::json& j);

}  // namespace lens::nn

// SPDX-License-Identifier: Apache-2.0
#include "lens/vae.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "lens/error.hpp"

namespace lens::nn {

using nlohmann::json;

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw UsageError(std::string(what) + ": shape mismatch");
}

void append(std::vector<std::span<double>>& out, std::vector<std::span<double>> more) {
    out.insert(out.end(), more.begin(), more.end());
}

void append(std::vector<std::span<const double>>& out, std::vector<std::span<const double>> more) {
    out.insert(out.end(), more.begin(), more.end());
}

std::vector<std::size_t> chain(std::size_t first, const std::vector<std::size_t>& hidden, std::size_t last) {
    std::vector<std::size_t> widths{first};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(last);
    return widths;
}

}  // namespace

std::size_t VaeModel::input_dim() const noexcept {
    return encoder.layers.empty() ? mu_head.in_dim() : encoder.in_dim();
}

void VaeModel::validate() const {
    encoder.validate();
    mu_head.validate();
    logvar_head.validate();
    decoder.validate();
    if (mu_head.layers.size() != 1 || logvar_head.layers.size() != 1) {
        throw UsageError("vae: heads must be single linear layers");
    }
    const std::size_t trunk = encoder.layers.empty() ? mu_head.in_dim() : encoder.out_dim();
    if (mu_head.in_dim() != trunk || logvar_head.in_dim() != trunk) throw UsageError("vae: heads do not fit trunk");
    if (mu_head.out_dim() != latent_dim || logvar_head.out_dim() != latent_dim) {
        throw UsageError("vae: head width differs from latent_dim");
    }
    if (decoder.in_dim() != latent_dim || decoder.out_dim() != input_dim()) {
        throw UsageError("vae: decoder must map latent_dim back to the input width");
    }
    if (latent_dim == 0 || latent_dim >= input_dim()) throw UsageError("vae: latent_dim must satisfy 0 < k < d");
    if (!(beta >= 0.0)) throw UsageError("vae: beta must be non-negative");
}

void VaeSpec::validate(std::size_t input_dim) const {
    if (latent_dim == 0 || latent_dim >= input_dim) {
        throw UsageError("latent_dim " + std::to_string(latent_dim) + " must be in (0, " + std::to_string(input_dim) +
                         ")");
    }
    if (!(beta >= 0.0)) throw UsageError("beta must be non-negative");
}

json to_json(const VaeSpec& s) {
    return {{"encoder_hidden", s.encoder_hidden},
            {"latent_dim", s.latent_dim},
            {"decoder_hidden", s.decoder_hidden},
            {"beta", s.beta}};
}

VaeSpec vae_spec_from_json(const json& j, VaeSpec d) {
    d.encoder_hidden = j.value("encoder_hidden", d.encoder_hidden);
    d.latent_dim = j.value("latent_dim", d.latent_dim);
    d.decoder_hidden = j.value("decoder_hidden", d.decoder_hidden);
    d.beta = j.value("beta", d.beta);
    return d;
}

VaeModel make_vae(std::size_t input_dim, const VaeSpec& spec, Rng& rng) {
    spec.validate(input_dim);
    VaeModel m;
    m.latent_dim = spec.latent_dim;
    m.beta = spec.beta;
    std::size_t trunk = input_dim;
    if (!spec.encoder_hidden.empty()) {
        std::vector<std::size_t> widths{input_dim};
        widths.insert(widths.end(), spec.encoder_hidden.begin(), spec.encoder_hidden.end());
        m.encoder = make_dense_net(widths, Activation::relu, Activation::relu, rng);
        trunk = spec.encoder_hidden.back();
    }
    const std::size_t head[] = {trunk, spec.latent_dim};
    m.mu_head = make_dense_net(head, Activation::linear, Activation::linear, rng);
    m.logvar_head = make_dense_net(head, Activation::linear, Activation::linear, rng);
    m.decoder = make_dense_net(chain(spec.latent_dim, spec.decoder_hidden, input_dim), Activation::relu,
                               Activation::linear, rng);
    return m;
}

VaeEncoding vae_encode(const VaeModel& model, const Matrix& batch) {
    if (batch.cols() != model.input_dim()) throw UsageError("vae_encode: batch width does not match model");
    const Matrix h = forward(model.encoder, batch);
    return {forward(model.mu_head, h), forward(model.logvar_head, h)};
}

Matrix reparameterize(const Matrix& mu, const Matrix& logvar, const Matrix& noise) {
    require_same_shape(mu, logvar, "reparameterize");
    require_same_shape(mu, noise, "reparameterize");
    Matrix z(mu.rows(), mu.cols());
    for (std::size_t k = 0; k < z.size(); ++k) {
        z.values()[k] = mu.values()[k] + std::exp(0.5 * logvar.values()[k]) * noise.values()[k];
    }
    return z;
}

VaeLoss vae_loss(const Matrix& x, const Matrix& x_hat, const Matrix& mu, const Matrix& logvar, double beta) {
    return vae_loss_grad(x, x_hat, mu, logvar, beta).value;
}

VaeLossGrad vae_loss_grad(const Matrix& x, const Matrix& x_hat, const Matrix& mu, const Matrix& logvar,
                          double beta) {
    require_same_shape(x, x_hat, "vae_loss");
    require_same_shape(mu, logvar, "vae_loss");
    if (mu.rows() != x.rows()) throw UsageError("vae_loss: row count mismatch");
    if (!(beta >= 0.0)) throw UsageError("vae_loss: beta must be non-negative");
    for (const Matrix* m : {&x, &x_hat, &mu, &logvar}) {
        for (double v : m->values()) {
            if (!std::isfinite(v)) throw NumericError("vae_loss: non-finite input");
        }
    }

    const std::size_t n = x.rows();
    VaeLossGrad out{{}, Matrix(n, x.cols()), Matrix(n, mu.cols()), Matrix(n, mu.cols())};
    if (n == 0) return out;
    const double inv_n = 1.0 / static_cast<double>(n);

    double recon = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double diff = x_hat.values()[k] - x.values()[k];
        recon += diff * diff;
        out.d_x_hat.values()[k] = 2.0 * diff * inv_n;
    }
    double kl = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) {
        const double m = mu.values()[k];
        const double lv = logvar.values()[k];
        const double var = std::exp(lv);
        kl += -0.5 * (1.0 + lv - m * m - var);
        out.d_mu.values()[k] = beta * m * inv_n;
        out.d_logvar.values()[k] = beta * 0.5 * (var - 1.0) * inv_n;
    }
    out.value.recon = recon * inv_n;
    out.value.kl = kl * inv_n;
    out.value.loss = out.value.recon + beta * out.value.kl;
    return out;
}

VaeGradients VaeGradients::zeros_like(const VaeModel& m) {
    return {GradientSet::zeros_like(m.encoder), GradientSet::zeros_like(m.mu_head),
            GradientSet::zeros_like(m.logvar_head), GradientSet::zeros_like(m.decoder)};
}

VaeLoss vae_batch_gradients(const VaeModel& model, const Matrix& x, const Matrix& noise, VaeGradients& grads) {
    ForwardTrace enc, mu_t, lv_t, dec;
    const Matrix h = forward(model.encoder, x, &enc);
    const Matrix mu = forward(model.mu_head, h, &mu_t);
    const Matrix logvar = forward(model.logvar_head, h, &lv_t);
    const Matrix z = reparameterize(mu, logvar, noise);
    const Matrix x_hat = forward(model.decoder, z, &dec);

    auto lg = vae_loss_grad(x, x_hat, mu, logvar, model.beta);
    const Matrix dz = backward(model.decoder, dec, lg.d_x_hat, grads.decoder);
    for (std::size_t k = 0; k < dz.size(); ++k) {
        lg.d_mu.values()[k] += dz.values()[k];
        lg.d_logvar.values()[k] += dz.values()[k] * noise.values()[k] * 0.5 * std::exp(0.5 * logvar.values()[k]);
    }
    Matrix dh = backward(model.mu_head, mu_t, lg.d_mu, grads.mu_head);
    const Matrix dh_lv = backward(model.logvar_head, lv_t, lg.d_logvar, grads.logvar_head);
    for (std::size_t k = 0; k < dh.size(); ++k) dh.values()[k] += dh_lv.values()[k];
    backward(model.encoder, enc, dh, grads.encoder);
    return lg.value;
}

std::vector<std::span<double>> parameter_views(VaeModel& m) {
    std::vector<std::span<double>> v;
    append(v, parameter_views(m.encoder));
    append(v, parameter_views(m.mu_head));
    append(v, parameter_views(m.logvar_head));
    append(v, parameter_views(m.decoder));
    return v;
}

std::vector<std::span<const double>> gradient_views(const VaeGradients& g) {
    std::vector<std::span<const double>> v;
    append(v, gradient_views(g.encoder));
    append(v, gradient_views(g.mu_head));
    append(v, gradient_views(g.logvar_head));
    append(v, gradient_views(g.decoder));
    return v;
}

VaeTrainResult train_vae(const data::Dataset& data, const VaeSpec& spec, const TrainConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    VaeTrainResult result{make_vae(data.width(), spec, rng), {}};
    if (cfg.epochs == 0 || data.rows() == 0) return result;

    VaeModel& model = result.model;
    Optimizer opt(cfg.optimizer, cfg.learning_rate);
    VaeGradients grads = VaeGradients::zeros_like(model);
    std::vector<std::size_t> order(data.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(std::span(order));
        EpochRecord rec;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::span<const std::size_t> rows(order.data() + start, end - start);
            const Matrix batch = data.features.gather_rows(rows);
            Matrix noise(rows.size(), model.latent_dim);
            for (double& e : noise.values()) e = rng.normal();

            for (auto* g : {&grads.encoder, &grads.mu_head, &grads.logvar_head, &grads.decoder}) g->clear();
            VaeLoss value;
            try {
                value = vae_batch_gradients(model, batch, noise, grads);
            } catch (const NumericError&) {
                throw DivergenceError("vae: non-finite activations", epoch);
            }
            if (!std::isfinite(value.loss)) throw DivergenceError("vae: non-finite loss", epoch);
            const double w = static_cast<double>(rows.size());
            rec.loss += value.loss * w;
            rec.recon += value.recon * w;
            rec.kl += value.kl * w;
            auto params = parameter_views(model);
            auto gviews = gradient_views(grads);
            opt.step(params, gviews);
        }
        const double n = static_cast<double>(order.size());
        result.history.push_back({rec.loss / n, rec.recon / n, rec.kl / n});
    }
    try {
        model.validate();
    } catch (const NumericError&) {
        throw DivergenceError("vae: non-finite parameters", cfg.epochs - 1);
    }
    return result;
}

data::Dataset encode_dataset(const VaeModel& model, const data::Dataset& data) {
    data::Dataset out;
    out.features = vae_encode(model, data.features).mu;
    out.labels = data.labels;
    out.class_names = data.class_names;
    out.source_rows = data.source_rows;
    for (std::size_t k = 0; k < model.latent_dim; ++k) out.feature_names.push_back("latent_" + std::to_string(k));
    return out;
}

std::size_t count_parameters(const VaeModel& m) noexcept {
    return count_parameters(m.encoder) + count_parameters(m.mu_head) + count_parameters(m.logvar_head) +
           count_parameters(m.decoder);
}

json to_json(const VaeModel& m) {
    return {{"encoder", to_json(m.encoder)},
            {"mu_head", to_json(m.mu_head)},
            {"logvar_head", to_json(m.logvar_head)},
            {"decoder", to_json(m.decoder)},
            {"latent_dim", m.latent_dim},
            {"beta", m.beta}};
}

VaeModel vae_from_json(const json& j) {
    VaeModel m;
    m.encoder = dense_net_from_json(j.at("encoder"));
    m.mu_head = dense_net_from_json(j.at("mu_head"));
    m.logvar_head = dense_net_from_json(j.at("logvar_head"));
    m.decoder = dense_net_from_json(j.at("decoder"));
    m.latent_dim = j.at("latent_dim").get<std::size_t>();
    m.beta = j.at("beta").get<double>();
    m.validate();
    return m;
}

}  // namespace lens::nn

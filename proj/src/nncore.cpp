// SPDX-License-Identifier: Apache-2.0
#include "lens/nncore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lens/error.hpp"
#include "lens/kernels.hpp"

namespace lens::nn {

using nlohmann::json;

namespace {

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

const char* activation_name(Activation a) { return a == Activation::relu ? "relu" : "linear"; }

Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "linear") return Activation::linear;
    throw UsageError("unknown activation '" + s + "'");
}

}  // namespace

void DenseNet::validate() const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.bias.size() != l.out_dim()) throw UsageError("layer " + std::to_string(i) + ": bias size mismatch");
        if (i > 0 && layers[i - 1].out_dim() != l.in_dim()) {
            throw UsageError("layer " + std::to_string(i) + ": input width does not chain");
        }
        if (!all_finite(l.weight.values()) || !all_finite(l.bias)) {
            throw NumericError("layer " + std::to_string(i) + ": non-finite parameter");
        }
    }
}

bool DenseNet::operator==(const DenseNet& other) const {
    if (layers.size() != other.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& a = layers[i];
        const auto& b = other.layers[i];
        if (a.activation != b.activation || a.weight != b.weight || a.bias != b.bias) return false;
    }
    return true;
}

DenseNet make_dense_net(std::span<const std::size_t> widths, Activation hidden, Activation output, Rng& rng) {
    if (widths.size() < 2) throw UsageError("make_dense_net needs at least input and output widths");
    DenseNet net;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const std::size_t in = widths[i];
        const std::size_t out = widths[i + 1];
        if (in == 0 || out == 0) throw UsageError("layer widths must be positive");
        DenseLayer layer;
        layer.weight = Matrix(out, in);
        layer.bias.assign(out, 0.0);
        layer.activation = (i + 2 == widths.size()) ? output : hidden;
        const double limit = std::sqrt(6.0 / static_cast<double>(in));
        for (double& w : layer.weight.values()) w = rng.uniform(-limit, limit);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

Matrix forward(const DenseNet& net, const Matrix& batch, ForwardTrace* trace) {
    if (trace) {
        trace->inputs.clear();
        trace->outputs.clear();
    }
    if (net.layers.empty()) return batch;
    if (batch.cols() != net.in_dim()) {
        throw UsageError("forward: batch width " + std::to_string(batch.cols()) + " != net input " +
                         std::to_string(net.in_dim()));
    }
    Matrix current = batch;
    for (const auto& layer : net.layers) {
        Matrix next(current.rows(), layer.out_dim());
        for (std::size_t i = 0; i < current.rows(); ++i) {
            auto in = current.row(i);
            auto out = next.row(i);
            for (std::size_t o = 0; o < layer.out_dim(); ++o) {
                double v = layer.bias[o] + kernels::dot(layer.weight.row(o), in);
                if (layer.activation == Activation::relu && v < 0.0) v = 0.0;
                out[o] = v;
            }
        }
        if (trace) {
            trace->inputs.push_back(std::move(current));
            trace->outputs.push_back(next);
        }
        current = std::move(next);
    }
    if (!all_finite(current.values())) throw NumericError("forward: non-finite network output");
    return current;
}

GradientSet GradientSet::zeros_like(const DenseNet& net) {
    GradientSet g;
    for (const auto& l : net.layers) g.layers.push_back({Matrix(l.out_dim(), l.in_dim()), std::vector<double>(l.out_dim())});
    return g;
}

void GradientSet::clear() {
    for (auto& l : layers) {
        l.weight.fill(0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
}

Matrix backward(const DenseNet& net, const ForwardTrace& trace, const Matrix& grad_output, GradientSet& grads) {
    if (net.layers.empty()) return grad_output;
    if (trace.inputs.size() != net.layers.size()) throw UsageError("backward: trace does not match net");
    if (grads.layers.size() != net.layers.size()) throw UsageError("backward: gradient set does not match net");

    Matrix delta = grad_output;
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const auto& layer = net.layers[li];
        const Matrix& input = trace.inputs[li];
        const Matrix& output = trace.outputs[li];
        auto& g = grads.layers[li];
        if (delta.rows() != input.rows() || delta.cols() != layer.out_dim()) {
            throw UsageError("backward: gradient shape mismatch at layer " + std::to_string(li));
        }
        if (layer.activation == Activation::relu) {
            for (std::size_t k = 0; k < delta.size(); ++k) {
                if (output.values()[k] <= 0.0) delta.values()[k] = 0.0;
            }
        }
        Matrix grad_input(input.rows(), layer.in_dim());
        for (std::size_t i = 0; i < input.rows(); ++i) {
            auto d = delta.row(i);
            for (std::size_t o = 0; o < layer.out_dim(); ++o) {
                if (d[o] == 0.0) continue;
                kernels::axpy(d[o], input.row(i), g.weight.row(o));
                g.bias[o] += d[o];
                kernels::axpy(d[o], layer.weight.row(o), grad_input.row(i));
            }
        }
        delta = std::move(grad_input);
    }
    return delta;
}

Matrix softmax_rows(const Matrix& logits, double temperature) {
    if (!(temperature > 0.0)) throw UsageError("softmax temperature must be positive");
    Matrix probs(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        auto in = logits.row(i);
        auto out = probs.row(i);
        const double top = *std::max_element(in.begin(), in.end());
        double total = 0.0;
        for (std::size_t c = 0; c < in.size(); ++c) {
            out[c] = std::exp((in[c] - top) / temperature);
            total += out[c];
        }
        for (double& p : out) p /= total;
    }
    return probs;
}

LossAndGrad softmax_cross_entropy(const Matrix& logits, std::span<const std::size_t> labels) {
    if (labels.size() != logits.rows()) throw UsageError("softmax_cross_entropy: label count mismatch");
    const std::size_t n = logits.rows();
    const std::size_t classes = logits.cols();
    LossAndGrad out{0.0, Matrix(n, classes)};
    if (n == 0) return out;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] >= classes) throw UsageError("softmax_cross_entropy: label out of range");
        auto z = logits.row(i);
        const double top = *std::max_element(z.begin(), z.end());
        double total = 0.0;
        for (double v : z) total += std::exp(v - top);
        const double log_total = std::log(total);
        out.loss += -(z[labels[i]] - top - log_total);
        auto g = out.grad.row(i);
        for (std::size_t c = 0; c < classes; ++c) {
            const double p = std::exp(z[c] - top - log_total);
            g[c] = (p - (c == labels[i] ? 1.0 : 0.0)) * inv_n;
        }
    }
    out.loss *= inv_n;
    return out;
}

std::size_t count_parameters(const DenseNet& net) noexcept {
    std::size_t total = 0;
    for (const auto& l : net.layers) total += l.out_dim() * l.in_dim() + l.out_dim();
    return total;
}

std::vector<std::span<double>> parameter_views(DenseNet& net) {
    std::vector<std::span<double>> views;
    for (auto& l : net.layers) {
        views.push_back(l.weight.values());
        views.push_back(l.bias);
    }
    return views;
}

std::vector<std::span<const double>> gradient_views(const GradientSet& grads) {
    std::vector<std::span<const double>> views;
    for (const auto& l : grads.layers) {
        views.push_back(l.weight.values());
        views.push_back(l.bias);
    }
    return views;
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw UsageError("batch_size must be positive");
    if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be positive");
}

json to_json(const TrainConfig& cfg) {
    return {{"epochs", cfg.epochs},
            {"batch_size", cfg.batch_size},
            {"learning_rate", cfg.learning_rate},
            {"seed", cfg.seed},
            {"optimizer", cfg.optimizer == OptimizerKind::adam ? "adam" : "sgd"}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig d) {
    d.epochs = j.value("epochs", d.epochs);
    d.batch_size = j.value("batch_size", d.batch_size);
    d.learning_rate = j.value("learning_rate", d.learning_rate);
    d.seed = j.value("seed", d.seed);
    if (j.contains("optimizer")) {
        const auto name = j.at("optimizer").get<std::string>();
        if (name == "adam") d.optimizer = OptimizerKind::adam;
        else if (name == "sgd") d.optimizer = OptimizerKind::sgd;
        else throw UsageError("optimizer must be adam or sgd");
    }
    d.validate();
    return d;
}

void Optimizer::step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads) {
    if (params.size() != grads.size()) throw UsageError("optimizer: parameter/gradient count mismatch");
    if (kind_ == OptimizerKind::sgd) {
        for (std::size_t k = 0; k < params.size(); ++k) kernels::axpy(-lr_, grads[k], params[k]);
        return;
    }
    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double eps = 1e-8;
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.size(), 0.0);
            v_.emplace_back(p.size(), 0.0);
        }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto p = params[k];
        auto g = grads[k];
        auto& m = m_[k];
        auto& v = v_[k];
        if (p.size() != m.size() || g.size() != p.size()) throw UsageError("optimizer: tensor shape changed");
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            p[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

std::vector<double> fit_dense(DenseNet& net, const Matrix& inputs, const TrainConfig& cfg, Rng& rng,
                              const BatchLoss& loss) {
    cfg.validate();
    if (inputs.cols() != net.in_dim()) throw UsageError("fit_dense: input width does not match net");
    std::vector<double> history;
    if (cfg.epochs == 0 || inputs.rows() == 0) return history;

    Optimizer opt(cfg.optimizer, cfg.learning_rate);
    GradientSet grads = GradientSet::zeros_like(net);
    std::vector<std::size_t> order(inputs.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    ForwardTrace trace;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(std::span(order));
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::span<const std::size_t> rows(order.data() + start, end - start);
            const Matrix batch = inputs.gather_rows(rows);
            Matrix out;
            try {
                out = forward(net, batch, &trace);
            } catch (const NumericError&) {
                throw DivergenceError("non-finite network output", epoch);
            }
            auto [value, grad] = loss(rows, out);
            if (!std::isfinite(value)) throw DivergenceError("non-finite training loss", epoch);
            total += value * static_cast<double>(rows.size());
            grads.clear();
            backward(net, trace, grad, grads);
            auto params = parameter_views(net);
            auto gviews = gradient_views(grads);
            opt.step(params, gviews);
        }
        history.push_back(total / static_cast<double>(order.size()));
    }
    try {
        net.validate();
    } catch (const NumericError&) {
        throw DivergenceError("non-finite parameters after training", cfg.epochs - 1);
    }
    return history;
}

json to_json(const DenseNet& net) {
    json layers = json::array();
    for (const auto& l : net.layers) {
        layers.push_back({{"in", l.in_dim()},
                          {"out", l.out_dim()},
                          {"activation", activation_name(l.activation)},
                          {"weight", l.weight.storage()},
                          {"bias", l.bias}});
    }
    return {{"layers", layers}};
}

DenseNet dense_net_from_json(const json& j) {
    DenseNet net;
    for (const auto& l : j.at("layers")) {
        DenseLayer layer;
        const auto in = l.at("in").get<std::size_t>();
        const auto out = l.at("out").get<std::size_t>();
        layer.weight = Matrix(out, in, l.at("weight").get<std::vector<double>>());
        layer.bias = l.at("bias").get<std::vector<double>>();
        layer.activation = parse_activation(l.at("activation").get<std::string>());
        net.layers.push_back(std::move(layer));
    }
    net.validate();
    return net;
}

}  // namespace lens::nn

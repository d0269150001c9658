// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "json.hpp"
#include "lens/matrix.hpp"
#include "lens/rng.hpp"

namespace lens::nn {

enum class Activation { relu, linear };

struct DenseLayer {
    Matrix weight;  // out x in, row-major
    std::vector<double> bias;
    Activation activation = Activation::linear;

    std::size_t in_dim() const noexcept { return weight.cols(); }
    std::size_t out_dim() const noexcept { return weight.rows(); }
};

/// Stack of fully connected layers. An empty net is the identity map.
struct DenseNet {
    std::vector<DenseLayer> layers;

    std::size_t in_dim() const noexcept { return layers.empty() ? 0 : layers.front().in_dim(); }
    std::size_t out_dim() const noexcept { return layers.empty() ? 0 : layers.back().out_dim(); }

    /// Throws UsageError if layer shapes do not chain or NumericError if any
    /// parameter is non-finite.
    void validate() const;

    bool operator==(const DenseNet& other) const;
};

/// Builds a net with layer widths {in, h1, ..., out}. Weights are drawn
/// uniformly from +-sqrt(6 / fan_in); biases start at zero.
DenseNet make_dense_net(std::span<const std::size_t> widths, Activation hidden, Activation output, Rng& rng);

/// Intermediate values kept for backpropagation. inputs[i] feeds layer i,
/// outputs[i] is its post-activation result.
struct ForwardTrace {
    std::vector<Matrix> inputs;
    std::vector<Matrix> outputs;
};

/// Evaluates the net on each row of `batch`. Throws UsageError on a width
/// mismatch and NumericError if the output contains NaN or infinity.
Matrix forward(const DenseNet& net, const Matrix& batch, ForwardTrace* trace = nullptr);

struct LayerGradient {
    Matrix weight;
    std::vector<double> bias;
};

struct GradientSet {
    std::vector<LayerGradient> layers;

    static GradientSet zeros_like(const DenseNet& net);
    void clear();
};

/// Pushes dLoss/dOutput back through the net. Parameter gradients are added
/// into `grads`; the gradient with respect to the net input is returned.
Matrix backward(const DenseNet& net, const ForwardTrace& trace, const Matrix& grad_output, GradientSet& grads);

struct LossAndGrad {
    double loss = 0.0;
    Matrix grad;
};

/// Mean over rows of -log softmax(logits)[label], with gradient
/// (softmax - onehot) / n. Rows are max-shifted before exponentiation.
LossAndGrad softmax_cross_entropy(const Matrix& logits, std::span<const std::size_t> labels);

/// Row-wise softmax of logits / temperature, max-shifted.
Matrix softmax_rows(const Matrix& logits, double temperature = 1.0);

/// Sum over layers of out*in + out.
std::size_t count_parameters(const DenseNet& net) noexcept;

std::vector<std::span<double>> parameter_views(DenseNet& net);
std::vector<std::span<const double>> gradient_views(const GradientSet& grads);

enum class OptimizerKind { adam, sgd };

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::adam;

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig defaults = {});

/// First-order update over a fixed list of parameter tensors. Adam uses
/// beta1 = 0.9, beta2 = 0.999, eps = 1e-8 with bias correction.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, double learning_rate) : kind_(kind), lr_(learning_rate) {}

    void step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads);

private:
    OptimizerKind kind_;
    double lr_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

/// Loss for one minibatch: `rows` are dataset row indices, `outputs` the net
/// outputs for those rows. Returns the batch-mean loss and dLoss/dOutputs.
using BatchLoss = std::function<LossAndGrad(std::span<const std::size_t> rows, const Matrix& outputs)>;

/// Minibatch training of a single net. Each epoch shuffles the row order with
/// `rng`. Returns the row-weighted mean loss of every epoch. Throws
/// DivergenceError on a non-finite loss.
std::vector<double> fit_dense(DenseNet& net, const Matrix& inputs, const TrainConfig& cfg, Rng& rng,
                              const BatchLoss& loss);

nlohmann::json to_json(const DenseNet& net);
DenseNet dense_net_from_json(const nlohmann::json& j);

}  // namespace lens::nn

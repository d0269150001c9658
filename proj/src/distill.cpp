// SPDX-License-Identifier: Apache-2.0
#include "lens/distill.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lens/error.hpp"

namespace lens::distill {

using nlohmann::json;

namespace {

/// log softmax(row / T), max-shifted.
void log_softmax(std::span<const double> row, double temperature, std::span<double> out) {
    double top = row[0];
    for (double v : row) top = std::max(top, v);
    double total = 0.0;
    for (double v : row) total += std::exp((v - top) / temperature);
    const double log_total = std::log(total);
    for (std::size_t c = 0; c < row.size(); ++c) out[c] = (row[c] - top) / temperature - log_total;
}

}  // namespace

void DistillConfig::validate() const {
    if (!(temperature > 0.0)) throw UsageError("temperature must be positive");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("alpha must lie in [0, 1]");
    teacher_cfg.validate();
    student_cfg.validate();
}

json to_json(const DistillConfig& cfg) {
    return {{"temperature", cfg.temperature},
            {"alpha", cfg.alpha},
            {"teacher", nn::to_json(cfg.teacher_cfg)},
            {"student", nn::to_json(cfg.student_cfg)}};
}

DistillConfig distill_config_from_json(const json& j, DistillConfig d) {
    d.temperature = j.value("temperature", d.temperature);
    d.alpha = j.value("alpha", d.alpha);
    if (j.contains("teacher")) d.teacher_cfg = nn::train_config_from_json(j.at("teacher"), d.teacher_cfg);
    if (j.contains("student")) d.student_cfg = nn::train_config_from_json(j.at("student"), d.student_cfg);
    d.validate();
    return d;
}

void Classifier::validate() const {
    net.validate();
    if (net.out_dim() < 2) throw UsageError("classifier needs at least two output classes");
    if (class_names.size() != net.out_dim()) throw UsageError("classifier: class_names size != output width");
}

json to_json(const Classifier& model) { return {{"net", nn::to_json(model.net)}, {"class_names", model.class_names}}; }

Classifier classifier_from_json(const json& j) {
    Classifier c{nn::dense_net_from_json(j.at("net")), j.at("class_names").get<std::vector<std::string>>()};
    c.validate();
    return c;
}

Matrix tempered_softmax(const Matrix& logits, double temperature) {
    if (!(temperature > 0.0)) throw UsageError("tempered_softmax: temperature must be positive");
    return nn::softmax_rows(logits, temperature);
}

nn::LossAndGrad distillation_loss(const Matrix& student_logits, const Matrix& teacher_logits,
                                  std::span<const std::size_t> labels, double temperature, double alpha) {
    if (!(temperature > 0.0)) throw UsageError("distillation_loss: temperature must be positive");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("distillation_loss: alpha must lie in [0, 1]");
    if (student_logits.rows() != teacher_logits.rows() || student_logits.cols() != teacher_logits.cols()) {
        throw UsageError("distillation_loss: student and teacher logits differ in shape");
    }

    auto hard = nn::softmax_cross_entropy(student_logits, labels);
    const std::size_t n = student_logits.rows();
    const std::size_t classes = student_logits.cols();
    if (n == 0) return hard;
    const double inv_n = 1.0 / static_cast<double>(n);

    double kl = 0.0;
    std::vector<double> log_t(classes), log_s(classes);
    nn::LossAndGrad out{0.0, Matrix(n, classes)};
    for (std::size_t i = 0; i < n; ++i) {
        log_softmax(teacher_logits.row(i), temperature, log_t);
        log_softmax(student_logits.row(i), temperature, log_s);
        auto g = out.grad.row(i);
        auto g_hard = hard.grad.row(i);
        for (std::size_t c = 0; c < classes; ++c) {
            const double p_t = std::exp(log_t[c]);
            const double p_s = std::exp(log_s[c]);
            kl += p_t * (log_t[c] - log_s[c]);
            // d/ds of T^2 * KL is T * (p_s - p_t).
            g[c] = (1.0 - alpha) * g_hard[c] + alpha * temperature * (p_s - p_t) * inv_n;
        }
    }
    kl = std::max(0.0, kl * inv_n);
    out.loss = (1.0 - alpha) * hard.loss + alpha * temperature * temperature * kl;
    return out;
}

Classifier make_classifier(std::size_t input_dim, const std::vector<std::string>& class_names,
                           const ClassifierSpec& spec, Rng& rng) {
    if (class_names.size() < 2) throw UsageError("classifier needs at least two classes");
    std::vector<std::size_t> widths{input_dim};
    widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
    widths.push_back(class_names.size());
    return {nn::make_dense_net(widths, nn::Activation::relu, nn::Activation::linear, rng), class_names};
}

TrainedClassifier train_teacher(const data::Dataset& data, const ClassifierSpec& spec, const nn::TrainConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    TrainedClassifier out{make_classifier(data.width(), data.class_names, spec, rng), {}};
    out.history = nn::fit_dense(out.model.net, data.features, cfg, rng,
                                [&](std::span<const std::size_t> rows, const Matrix& logits) {
                                    std::vector<std::size_t> labels;
                                    labels.reserve(rows.size());
                                    for (auto r : rows) labels.push_back(data.labels[r]);
                                    return nn::softmax_cross_entropy(logits, labels);
                                });
    return out;
}

TrainedClassifier train_student(const data::Dataset& data, const Classifier& teacher, const ClassifierSpec& spec,
                                const DistillConfig& dcfg) {
    dcfg.validate();
    if (teacher.num_classes() != data.class_names.size()) {
        throw UsageError("train_student: teacher has " + std::to_string(teacher.num_classes()) + " classes, data has " +
                         std::to_string(data.class_names.size()));
    }
    if (teacher.net.in_dim() != data.width()) throw UsageError("train_student: teacher input width mismatch");
    const auto& cfg = dcfg.student_cfg;
    Rng rng(cfg.seed);
    TrainedClassifier out{make_classifier(data.width(), data.class_names, spec, rng), {}};
    out.history = nn::fit_dense(out.model.net, data.features, cfg, rng,
                                [&](std::span<const std::size_t> rows, const Matrix& logits) {
                                    std::vector<std::size_t> labels;
                                    labels.reserve(rows.size());
                                    for (auto r : rows) labels.push_back(data.labels[r]);
                                    const Matrix soft = nn::forward(teacher.net, data.features.gather_rows(rows));
                                    return distillation_loss(logits, soft, labels, dcfg.temperature, dcfg.alpha);
                                });
    return out;
}

std::size_t argmax(std::span<const double> row) noexcept {
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
        if (row[c] > row[best]) best = c;
    }
    return best;
}

Prediction predict(const Classifier& model, const Matrix& features) {
    if (features.cols() != model.net.in_dim()) throw UsageError("predict: feature width does not match model");
    Prediction p;
    const Matrix logits = nn::forward(model.net, features);
    p.probs = tempered_softmax(logits, 1.0);
    p.labels.reserve(features.rows());
    for (std::size_t i = 0; i < features.rows(); ++i) p.labels.push_back(argmax(logits.row(i)));
    return p;
}

}  // namespace lens::distill

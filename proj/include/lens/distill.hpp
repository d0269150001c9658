// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lens/datapipe.hpp"
#include "lens/nncore.hpp"

namespace lens::distill {

/// Hidden layer widths of a classifier MLP; input and output widths come from
/// the data.
struct ClassifierSpec {
    std::vector<std::size_t> hidden;
};

struct DistillConfig {
    double temperature = 2.0;
    double alpha = 0.5;
    nn::TrainConfig teacher_cfg;
    nn::TrainConfig student_cfg;

    void validate() const;
};

nlohmann::json to_json(const DistillConfig& cfg);
DistillConfig distill_config_from_json(const nlohmann::json& j, DistillConfig defaults = {});

struct Classifier {
    nn::DenseNet net;  // relu hidden layers, linear logits
    std::vector<std::string> class_names;

    std::size_t num_classes() const noexcept { return net.out_dim(); }
    void validate() const;
};

nlohmann::json to_json(const Classifier& model);
Classifier classifier_from_json(const nlohmann::json& j);

struct TrainedClassifier {
    Classifier model;
    std::vector<double> history;  // mean loss per epoch
};

/// softmax(logits / T) per row.
Matrix tempered_softmax(const Matrix& logits, double temperature);

/// (1 - alpha) * CE(labels, student) + alpha * T^2 * KL(softmax_T(teacher) || softmax_T(student)),
/// both terms averaged over rows. The gradient is with respect to the
/// student logits only; teacher logits are constants.
nn::LossAndGrad distillation_loss(const Matrix& student_logits, const Matrix& teacher_logits,
                                  std::span<const std::size_t> labels, double temperature, double alpha);

Classifier make_classifier(std::size_t input_dim, const std::vector<std::string>& class_names,
                           const ClassifierSpec& spec, Rng& rng);

/// Cross-entropy training. Initialization and shuffling share one generator
/// seeded by cfg.seed.
TrainedClassifier train_teacher(const data::Dataset& data, const ClassifierSpec& spec, const nn::TrainConfig& cfg);

/// Trains a fresh student against the frozen teacher under distillation_loss,
/// using dcfg.student_cfg. Teacher logits are evaluated per batch.
TrainedClassifier train_student(const data::Dataset& data, const Classifier& teacher, const ClassifierSpec& spec,
                                const DistillConfig& dcfg);

struct Prediction {
    std::vector<std::size_t> labels;
    Matrix probs;
};

/// Probabilities at T = 1; labels are the row argmax, lowest index on ties.
Prediction predict(const Classifier& model, const Matrix& features);

std::size_t argmax(std::span<const double> row) noexcept;

}  // namespace lens::distill

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lens/matrix.hpp"
#include "lens/nncore.hpp"
#include "lens/vae.hpp"

namespace lens::eval {

/// counts[t][p]: rows with true class t predicted as p.
struct ConfusionMatrix {
    std::vector<std::vector<std::size_t>> counts;
    std::vector<std::string> class_names;

    std::size_t num_classes() const noexcept { return counts.size(); }
    std::size_t total() const noexcept;
};

ConfusionMatrix confusion(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred,
                          std::size_t num_classes, std::vector<std::string> class_names = {});

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct Aggregate {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct MetricsReport {
    double accuracy = 0.0;
    std::vector<ClassMetrics> per_class;
    Aggregate weighted;  // support-weighted means
    Aggregate macro;     // unweighted means over classes with support
    std::size_t params = 0;
    std::size_t memory_bytes = 0;
    double inference_ms_per_batch = 0.0;  // wall clock; left out of to_json so reruns compare equal
};

/// Rates from a confusion matrix. Rates with a zero denominator are 0.
MetricsReport metrics(const ConfusionMatrix& cm);

struct Timing {
    double ms_per_batch = 0.0;
    double ms_per_sample = 0.0;
};

/// Median wall-clock time of `repeats` calls to `run` after one warm-up
/// call, and that time divided by the batch size.
Timing time_inference(const std::function<void()>& run, std::size_t batch_size, std::size_t repeats);
Timing time_inference(const nn::DenseNet& net, const Matrix& batch, std::size_t repeats);
Timing time_inference(const nn::VaeModel& model, const Matrix& batch, std::size_t repeats);

/// Size of the serialized model description with the parameter arrays left
/// empty.
std::size_t metadata_bytes(const nn::DenseNet& net);
std::size_t metadata_bytes(const nn::VaeModel& model);

/// Parameter count times bytes per value, plus metadata_bytes().
std::size_t analytic_memory(const nn::DenseNet& net, std::size_t bytes_per_value = sizeof(double));
std::size_t analytic_memory(const nn::VaeModel& model, std::size_t bytes_per_value = sizeof(double));

nlohmann::json to_json(const ConfusionMatrix& cm);
/// Rates, per-class rows, aggregates, params and memory. Timing is left out
/// so the record is reproducible byte for byte.
nlohmann::json to_json(const MetricsReport& report, const std::vector<std::string>& class_names);

/// One overall row followed by one row per class:
/// Class, Accuracy, Precision, Recall, F1, Support. Per-class accuracy is the
/// class recall.
void write_metrics_csv(const MetricsReport& report, const std::vector<std::string>& class_names, std::ostream& out);
void write_confusion_csv(const ConfusionMatrix& cm, std::ostream& out);

}  // namespace lens::eval

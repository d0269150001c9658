// SPDX-License-Identifier: Apache-2.0
#include "lens/eval.hpp"

#include <algorithm>
#include <chrono>
#include <ostream>

#include "lens/csv.hpp"
#include "lens/error.hpp"

namespace lens::eval {

using nlohmann::json;

namespace {

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

json strip_parameters(json net) {
    for (auto& layer : net.at("layers")) {
        layer["weight"] = json::array();
        layer["bias"] = json::array();
    }
    return net;
}

std::string num(double v) { return csv::format_double(v); }

}  // namespace

std::size_t ConfusionMatrix::total() const noexcept {
    std::size_t n = 0;
    for (const auto& row : counts) {
        for (auto c : row) n += c;
    }
    return n;
}

ConfusionMatrix confusion(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred,
                          std::size_t num_classes, std::vector<std::string> class_names) {
    if (y_true.size() != y_pred.size()) throw UsageError("confusion: label vectors differ in length");
    if (!class_names.empty() && class_names.size() != num_classes) {
        throw UsageError("confusion: class name count does not match num_classes");
    }
    ConfusionMatrix cm;
    cm.counts.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
    cm.class_names = std::move(class_names);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] >= num_classes || y_pred[i] >= num_classes) throw UsageError("confusion: label out of range");
        ++cm.counts[y_true[i]][y_pred[i]];
    }
    return cm;
}

MetricsReport metrics(const ConfusionMatrix& cm) {
    const std::size_t total = cm.total();
    if (cm.num_classes() == 0 || total == 0) throw UsageError("metrics: empty confusion matrix");
    const std::size_t k = cm.num_classes();
    MetricsReport r;
    std::size_t correct = 0;
    std::size_t supported = 0;
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t predicted = 0;
        std::size_t actual = 0;
        for (std::size_t o = 0; o < k; ++o) {
            predicted += cm.counts[o][c];
            actual += cm.counts[c][o];
        }
        const std::size_t tp = cm.counts[c][c];
        correct += tp;
        ClassMetrics m;
        m.support = actual;
        m.precision = ratio(tp, predicted);
        m.recall = ratio(tp, actual);
        const double denom = m.precision + m.recall;
        m.f1 = denom > 0.0 ? 2.0 * m.precision * m.recall / denom : 0.0;
        r.per_class.push_back(m);

        const double w = static_cast<double>(actual);
        r.weighted.precision += w * m.precision;
        r.weighted.recall += w * m.recall;
        r.weighted.f1 += w * m.f1;
        if (actual > 0) {
            ++supported;
            r.macro.precision += m.precision;
            r.macro.recall += m.recall;
            r.macro.f1 += m.f1;
        }
    }
    const double n = static_cast<double>(total);
    r.accuracy = ratio(correct, total);
    r.weighted.precision /= n;
    r.weighted.recall /= n;
    r.weighted.f1 /= n;
    const double s = static_cast<double>(supported);
    r.macro.precision /= s;
    r.macro.recall /= s;
    r.macro.f1 /= s;
    return r;
}

Timing time_inference(const std::function<void()>& run, std::size_t batch_size, std::size_t repeats) {
    if (batch_size == 0) throw UsageError("time_inference: empty batch");
    if (repeats < 3) throw UsageError("time_inference: need at least 3 repeats");
    run();  // warm-up
    std::vector<double> samples;
    samples.reserve(repeats);
    for (std::size_t i = 0; i < repeats; ++i) {
        const auto start = std::chrono::steady_clock::now();
        run();
        const auto stop = std::chrono::steady_clock::now();
        samples.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
    }
    std::sort(samples.begin(), samples.end());
    const std::size_t mid = samples.size() / 2;
    const double median = samples.size() % 2 ? samples[mid] : 0.5 * (samples[mid - 1] + samples[mid]);
    return {median, median / static_cast<double>(batch_size)};
}

Timing time_inference(const nn::DenseNet& net, const Matrix& batch, std::size_t repeats) {
    return time_inference([&] { (void)nn::forward(net, batch); }, batch.rows(), repeats);
}

Timing time_inference(const nn::VaeModel& model, const Matrix& batch, std::size_t repeats) {
    return time_inference([&] { (void)nn::vae_encode(model, batch); }, batch.rows(), repeats);
}

std::size_t metadata_bytes(const nn::DenseNet& net) { return strip_parameters(nn::to_json(net)).dump().size(); }

std::size_t metadata_bytes(const nn::VaeModel& model) {
    json j = nn::to_json(model);
    for (const char* part : {"encoder", "mu_head", "logvar_head", "decoder"}) j[part] = strip_parameters(j[part]);
    return j.dump().size();
}

std::size_t analytic_memory(const nn::DenseNet& net, std::size_t bytes_per_value) {
    return nn::count_parameters(net) * bytes_per_value + metadata_bytes(net);
}

std::size_t analytic_memory(const nn::VaeModel& model, std::size_t bytes_per_value) {
    return nn::count_parameters(model) * bytes_per_value + metadata_bytes(model);
}

json to_json(const ConfusionMatrix& cm) { return {{"class_names", cm.class_names}, {"counts", cm.counts}}; }

json to_json(const MetricsReport& r, const std::vector<std::string>& class_names) {
    json per_class = json::array();
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        const auto& m = r.per_class[c];
        per_class.push_back({{"class", c < class_names.size() ? class_names[c] : std::to_string(c)},
                             {"precision", m.precision},
                             {"recall", m.recall},
                             {"f1", m.f1},
                             {"support", m.support}});
    }
    auto agg = [](const Aggregate& a) { return json{{"precision", a.precision}, {"recall", a.recall}, {"f1", a.f1}}; };
    return {{"accuracy", r.accuracy},
            {"weighted", agg(r.weighted)},
            {"macro", agg(r.macro)},
            {"per_class", per_class},
            {"params", r.params},
            {"memory_bytes", r.memory_bytes}};
}

void write_metrics_csv(const MetricsReport& r, const std::vector<std::string>& class_names, std::ostream& out) {
    csv::write_record(out, {"Class", "Accuracy", "Precision", "Recall", "F1", "Support"});
    std::size_t total = 0;
    for (const auto& m : r.per_class) total += m.support;
    csv::write_record(out, {"Overall", num(r.accuracy), num(r.weighted.precision), num(r.weighted.recall),
                            num(r.weighted.f1), std::to_string(total)});
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        const auto& m = r.per_class[c];
        csv::write_record(out, {c < class_names.size() ? class_names[c] : std::to_string(c), num(m.recall),
                                num(m.precision), num(m.recall), num(m.f1), std::to_string(m.support)});
    }
}

void write_confusion_csv(const ConfusionMatrix& cm, std::ostream& out) {
    csv::Record header{"true\\predicted"};
    for (std::size_t c = 0; c < cm.num_classes(); ++c) {
        header.push_back(c < cm.class_names.size() ? cm.class_names[c] : std::to_string(c));
    }
    csv::write_record(out, header);
    for (std::size_t t = 0; t < cm.num_classes(); ++t) {
        csv::Record rec{header[t + 1]};
        for (auto v : cm.counts[t]) rec.push_back(std::to_string(v));
        csv::write_record(out, rec);
    }
}

}  // namespace lens::eval

// SPDX-License-Identifier: Apache-2.0
#include "lens/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "lens/csv.hpp"
#include "lens/error.hpp"
#include "lens/parallel.hpp"
#include "lens/rng.hpp"

namespace lens::attr {

using nlohmann::json;

namespace {

void check_inputs(const PredictFunction& f, const Matrix& background, std::span<const double> instance) {
    if (background.rows() == 0) throw UsageError("background set is empty");
    if (background.cols() != f.width()) throw UsageError("background width does not match the predict function");
    if (instance.size() != f.width()) throw UsageError("instance width does not match the predict function");
}

/// Shifted mean, reduced in index order. Exact when all values are equal, so a
/// feature the model ignores gets a contribution of exactly zero even on the
/// step that reaches the all-fixed endpoint.
double mean_in_order(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x - v[0];
    return v[0] + s / static_cast<double>(v.size());
}

}  // namespace

PredictFunction PredictFunction::from_row(std::size_t width, RowFn fn) {
    return PredictFunction(width, [fn = std::move(fn)](const Matrix& rows, std::span<double> scores) {
        for (std::size_t i = 0; i < rows.rows(); ++i) scores[i] = fn(rows.row(i));
    });
}

double PredictFunction::operator()(std::span<const double> row) const {
    if (row.size() != width_) throw UsageError("predict function: row width mismatch");
    Matrix one(1, width_, std::vector<double>(row.begin(), row.end()));
    double score = 0.0;
    batch_(one, std::span(&score, 1));
    return score;
}

std::vector<double> PredictFunction::operator()(const Matrix& rows) const {
    if (rows.cols() != width_) throw UsageError("predict function: row width mismatch");
    std::vector<double> scores(rows.rows());
    // Each chunk is scored independently, so chunking never changes a value.
    parallel_for(rows.rows(), [&](std::size_t begin, std::size_t end) {
        if (begin == 0 && end == rows.rows()) {
            batch_(rows, scores);
            return;
        }
        std::vector<std::size_t> idx(end - begin);
        std::iota(idx.begin(), idx.end(), begin);
        batch_(rows.gather_rows(idx), std::span(scores).subspan(begin, end - begin));
    });
    return scores;
}

double Attribution::reconstructed() const noexcept {
    double total = baseline;
    for (const auto& c : contributions) total += c.value;
    return total;
}

double mean_prediction(const PredictFunction& f, const Matrix& background) {
    if (background.rows() == 0) throw UsageError("background set is empty");
    if (background.cols() != f.width()) throw UsageError("background width does not match the predict function");
    return mean_in_order(f(background));
}

double conditional_expectation(const PredictFunction& f, const Matrix& background, std::span<const double> instance,
                               std::span<const std::size_t> fixed) {
    check_inputs(f, background, instance);
    std::vector<bool> seen(f.width(), false);
    std::size_t distinct = 0;
    for (auto j : fixed) {
        if (j >= f.width()) throw UsageError("conditional_expectation: feature index out of range");
        if (!seen[j]) {
            seen[j] = true;
            ++distinct;
        }
    }
    if (distinct == f.width()) return f(instance);
    if (distinct == 0) return mean_prediction(f, background);

    Matrix rows = background;
    for (std::size_t i = 0; i < rows.rows(); ++i) {
        auto r = rows.row(i);
        for (auto j : fixed) r[j] = instance[j];
    }
    return mean_in_order(f(rows));
}

double conditional_difference(const PredictFunction& f, const Matrix& background, std::span<const double> instance,
                              std::span<const std::size_t> given, std::span<const std::size_t> added) {
    for (auto l : added) {
        if (std::find(given.begin(), given.end(), l) != given.end()) {
            throw UsageError("conditional_difference: index sets must be disjoint");
        }
    }
    std::vector<std::size_t> both(given.begin(), given.end());
    both.insert(both.end(), added.begin(), added.end());
    return conditional_expectation(f, background, instance, both) -
           conditional_expectation(f, background, instance, given);
}

std::vector<std::size_t> marginal_importance_order(const PredictFunction& f, const Matrix& background,
                                                   std::span<const double> instance) {
    check_inputs(f, background, instance);
    const std::size_t p = f.width();
    if (p == 0) throw UsageError("marginal_importance_order: no features");
    const double v0 = mean_prediction(f, background);
    std::vector<double> importance(p);
    for (std::size_t j = 0; j < p; ++j) {
        const std::size_t fixed[] = {j};
        importance[j] = std::abs(conditional_expectation(f, background, instance, fixed) - v0);
    }
    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return importance[a] > importance[b]; });
    return order;
}

Attribution breakdown(const PredictFunction& f, const Matrix& background, std::span<const double> instance,
                      std::optional<std::vector<std::size_t>> ordering, std::span<const std::string> feature_names) {
    check_inputs(f, background, instance);
    const std::size_t p = f.width();
    if (!feature_names.empty() && feature_names.size() != p) {
        throw UsageError("breakdown: feature name count does not match width");
    }

    Attribution out;
    if (ordering) {
        std::vector<bool> seen(p, false);
        if (ordering->size() != p) throw UsageError("breakdown: ordering is not a permutation");
        for (auto j : *ordering) {
            if (j >= p || seen[j]) throw UsageError("breakdown: ordering is not a permutation");
            seen[j] = true;
        }
        out.ordering = std::move(*ordering);
    } else {
        out.ordering = marginal_importance_order(f, background, instance);
    }

    out.baseline = mean_prediction(f, background);
    double previous = out.baseline;
    std::vector<std::size_t> fixed;
    fixed.reserve(p);
    for (auto j : out.ordering) {
        fixed.push_back(j);
        const double current = conditional_expectation(f, background, instance, fixed);
        out.contributions.push_back(
            {j, feature_names.empty() ? "x" + std::to_string(j) : feature_names[j], current - previous});
        previous = current;
    }
    out.final_prediction = p == 0 ? out.baseline : previous;
    return out;
}

PredictFunction class_probability(const distill::Classifier& model, const nn::VaeModel* encoder,
                                  std::size_t target_class) {
    if (target_class >= model.num_classes()) {
        throw UsageError("target class " + std::to_string(target_class) + " out of range (model has " +
                         std::to_string(model.num_classes()) + " classes)");
    }
    const std::size_t width = encoder ? encoder->input_dim() : model.net.in_dim();
    if (encoder && encoder->latent_dim != model.net.in_dim()) {
        throw UsageError("encoder latent width does not match classifier input");
    }
    return PredictFunction(width, [&model, encoder, target_class](const Matrix& rows, std::span<double> scores) {
        const Matrix inputs = encoder ? nn::vae_encode(*encoder, rows).mu : rows;
        const Matrix probs = distill::predict(model, inputs).probs;
        for (std::size_t i = 0; i < rows.rows(); ++i) scores[i] = probs(i, target_class);
    });
}

Attribution explain_instance(const distill::Classifier& model, const nn::VaeModel* encoder,
                             std::span<const std::string> feature_names, const Matrix& background,
                             std::span<const double> instance, std::size_t target_class) {
    const auto f = class_probability(model, encoder, target_class);
    return breakdown(f, background, instance, std::nullopt, feature_names);
}

Attribution explain_instance(const distill::Classifier& model, const nn::VaeModel* encoder,
                             const data::Preprocessor& pre, const Matrix& background,
                             std::span<const data::Cell> raw_row, std::size_t target_class) {
    std::vector<double> instance(pre.output_dim());
    pre.transform_row(raw_row, instance);
    return explain_instance(model, encoder, pre.output_feature_names(), background, instance, target_class);
}

Matrix sample_background(const Matrix& rows, std::size_t max_rows, std::uint64_t seed) {
    if (max_rows == 0) throw UsageError("background size must be positive");
    if (max_rows >= rows.rows()) return rows;
    Rng rng(seed);
    std::vector<std::size_t> idx(rows.rows());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < max_rows; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
    idx.resize(max_rows);
    std::sort(idx.begin(), idx.end());
    return rows.gather_rows(idx);
}

json to_json(const Attribution& a, std::size_t target_class, const std::string& target_name) {
    json contributions = json::array();
    double running = a.baseline;
    for (std::size_t i = 0; i < a.contributions.size(); ++i) {
        const auto& c = a.contributions[i];
        running += c.value;
        contributions.push_back(
            {{"step", i + 1}, {"index", c.feature}, {"name", c.name}, {"value", c.value}, {"cumulative", running}});
    }
    return {{"target_class", target_class},
            {"target_name", target_name},
            {"baseline", a.baseline},
            {"contributions", contributions},
            {"final_prediction", a.final_prediction},
            {"ordering", a.ordering},
            {"local_accuracy_error", std::abs(running - a.final_prediction)}};
}

void write_waterfall_csv(const Attribution& a, std::ostream& out) {
    csv::write_record(out, {"Mapped Feature", "Contribution", "Cumulative Prediction"});
    double running = a.baseline;
    csv::write_record(out, {"Intercept", csv::format_double(a.baseline), csv::format_double(running)});
    for (const auto& c : a.contributions) {
        running += c.value;
        csv::write_record(out, {c.name, csv::format_double(c.value), csv::format_double(running)});
    }
}

}  // namespace lens::attr

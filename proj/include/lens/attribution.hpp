// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lens/datapipe.hpp"
#include "lens/distill.hpp"
#include "lens/matrix.hpp"
#include "lens/vae.hpp"

namespace lens::attr {

/// Scalar model response over feature rows of width p. Evaluation is batched:
/// the callback fills one score per row of its input matrix. Must be pure.
class PredictFunction {
public:
    using BatchFn = std::function<void(const Matrix& rows, std::span<double> scores)>;
    using RowFn = std::function<double(std::span<const double> row)>;

    PredictFunction(std::size_t width, BatchFn fn) : width_(width), batch_(std::move(fn)) {}
    static PredictFunction from_row(std::size_t width, RowFn fn);

    std::size_t width() const noexcept { return width_; }
    double operator()(std::span<const double> row) const;
    std::vector<double> operator()(const Matrix& rows) const;

private:
    std::size_t width_;
    BatchFn batch_;
};

struct Contribution {
    std::size_t feature = 0;
    std::string name;
    double value = 0.0;
};

struct Attribution {
    double baseline = 0.0;  // v0, mean prediction over the background
    std::vector<Contribution> contributions;  // in walk order
    double final_prediction = 0.0;
    std::vector<std::size_t> ordering;

    /// baseline + sum of contributions
    double reconstructed() const noexcept;
};

/// Mean of f over the background rows.
double mean_prediction(const PredictFunction& f, const Matrix& background);

/// Mean of f over the background rows after overwriting the `fixed` columns
/// with the instance's values. Rows are reduced in index order.
double conditional_expectation(const PredictFunction& f, const Matrix& background, std::span<const double> instance,
                               std::span<const std::size_t> fixed);

/// E[f | x_J, x_L] - E[f | x_J] for disjoint index sets J and L.
double conditional_difference(const PredictFunction& f, const Matrix& background, std::span<const double> instance,
                              std::span<const std::size_t> given, std::span<const std::size_t> added);

/// Features sorted by |E[f | x_j] - v0| descending; ties keep ascending index.
std::vector<std::size_t> marginal_importance_order(const PredictFunction& f, const Matrix& background,
                                                   std::span<const double> instance);

/// Sequential break-down along `ordering` (or the marginal-importance order
/// when absent). Each contribution is the change in conditional expectation
/// from fixing one more feature, so the values telescope to f(instance).
Attribution breakdown(const PredictFunction& f, const Matrix& background, std::span<const double> instance,
                      std::optional<std::vector<std::size_t>> ordering = std::nullopt,
                      std::span<const std::string> feature_names = {});

/// Probability of `target_class` from a classifier, optionally composed with
/// a VAE encoder (features -> posterior mean -> classifier).
PredictFunction class_probability(const distill::Classifier& model, const nn::VaeModel* encoder,
                                  std::size_t target_class);

/// Break-down of one preprocessed instance. When `encoder` is given the
/// attribution is over the preprocessed input features; otherwise over the
/// classifier's own inputs. Names come from `feature_names`.
Attribution explain_instance(const distill::Classifier& model, const nn::VaeModel* encoder,
                             std::span<const std::string> feature_names, const Matrix& background,
                             std::span<const double> instance, std::size_t target_class);

/// Same, starting from a raw table row that is run through the preprocessor.
Attribution explain_instance(const distill::Classifier& model, const nn::VaeModel* encoder,
                             const data::Preprocessor& pre, const Matrix& background,
                             std::span<const data::Cell> raw_row, std::size_t target_class);

/// Up to `max_rows` rows drawn without replacement (seeded), in ascending
/// index order; all rows when max_rows >= rows.
Matrix sample_background(const Matrix& rows, std::size_t max_rows, std::uint64_t seed);

/// Report record: v0, ordered contributions with running totals, prediction.
nlohmann::json to_json(const Attribution& a, std::size_t target_class, const std::string& target_name);

/// Waterfall table: Mapped Feature, Contribution, Cumulative Prediction, with
/// an Intercept row first.
void write_waterfall_csv(const Attribution& a, std::ostream& out);

}  // namespace lens::attr

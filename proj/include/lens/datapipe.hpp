// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "lens/matrix.hpp"

namespace lens::data {

enum class ColumnKind { numeric, nominal, ordinal, label, drop };

struct ColumnSchema {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    /// Category order, lowest first. Required iff kind == ordinal.
    std::vector<std::string> ordinal_order;
};

/// Column list plus label handling for one CSV layout.
///
/// `label_map` rewrites raw label strings to class names before anything else
/// sees them; the key "*" catches labels that are not listed. `classes` pins
/// the class vocabulary and its index order; when empty it is the sorted set
/// of mapped labels found in the data.
struct TableSchema {
    std::vector<ColumnSchema> columns;
    bool has_header = true;
    std::vector<std::string> classes;
    std::map<std::string, std::string> label_map;

    /// Throws UsageError unless exactly one label column exists and ordinal
    /// orders are present and duplicate-free.
    void validate() const;
    std::size_t label_column() const;
};

TableSchema schema_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TableSchema& schema);
TableSchema load_schema(const std::filesystem::path& path);

/// A parsed cell: missing, a number (numeric columns) or a category string.
using Cell = std::variant<std::monostate, double, std::string>;

inline bool is_missing(const Cell& c) noexcept { return std::holds_alternative<std::monostate>(c); }

struct RawTable {
    std::vector<ColumnSchema> columns;
    std::vector<std::vector<Cell>> rows;
    /// Class vocabulary; label cells hold one of these names or are missing.
    std::vector<std::string> class_names;

    std::size_t label_column() const;
    /// Class index of a row's label, or nullopt if the label is missing.
    std::optional<std::size_t> label_of(std::size_t row) const;
    RawTable subset(std::span<const std::size_t> row_indices) const;
};

RawTable load_table(const std::filesystem::path& path, const TableSchema& schema);
RawTable load_table(const std::filesystem::path& path, std::span<const ColumnSchema> columns);
/// Concatenates several files sharing one schema; the class vocabulary is
/// resolved over all of them.
RawTable load_tables(std::span<const std::filesystem::path> paths, const TableSchema& schema);
RawTable parse_table(std::istream& in, const TableSchema& schema);

enum class ImputeStrategy { mean, median };
enum class UnseenCategory { error, all_zeros };

struct PreprocessPolicy {
    ImputeStrategy impute_numeric = ImputeStrategy::mean;
    /// Rows whose missing-cell fraction is strictly larger are excluded.
    double row_drop_threshold = 0.5;
    UnseenCategory unseen_category = UnseenCategory::all_zeros;

    void validate() const;
};

nlohmann::json to_json(const PreprocessPolicy& policy);
PreprocessPolicy policy_from_json(const nlohmann::json& j);

/// Rows that survive the missingness filter and carry a label, ascending.
std::vector<std::size_t> retained_rows(const RawTable& table, const PreprocessPolicy& policy);

struct Dataset {
    Matrix features;
    std::vector<std::size_t> labels;
    std::vector<std::string> feature_names;
    std::vector<std::string> class_names;
    /// Row index in the source RawTable for each output row.
    std::vector<std::size_t> source_rows;

    std::size_t rows() const noexcept { return features.rows(); }
    std::size_t width() const noexcept { return features.cols(); }
    Dataset subset(std::span<const std::size_t> indices) const;
};

void write_dataset_csv(const Dataset& data, std::ostream& out);

/// Fitted, immutable preprocessing state.
class Preprocessor {
public:
    struct Column {
        std::string name;
        ColumnKind kind = ColumnKind::numeric;
        double impute_value = 0.0;           // numeric, ordinal (encoded index)
        std::string impute_category;         // nominal
        std::vector<std::string> categories; // nominal (sorted) or ordinal (given order)
        double mean = 0.0;                   // numeric, ordinal
        double stddev = 1.0;                 // numeric, ordinal
        std::size_t source = 0;              // column index in the RawTable
        std::size_t offset = 0;              // first output column
    };

    const std::vector<Column>& columns() const noexcept { return columns_; }
    const std::vector<std::string>& output_feature_names() const noexcept { return feature_names_; }
    const std::vector<std::string>& class_names() const noexcept { return class_names_; }
    const PreprocessPolicy& policy() const noexcept { return policy_; }
    std::size_t output_dim() const noexcept { return feature_names_.size(); }

    /// Transforms one raw row. Throws DataError on unseen categories under
    /// UnseenCategory::error.
    void transform_row(std::span<const Cell> row, std::span<double> out) const;

    nlohmann::json to_json() const;
    static Preprocessor from_json(const nlohmann::json& j);
    /// Hex FNV-1a digest of the serialized state; identifies the fit.
    std::string fingerprint() const;

    friend Preprocessor fit_preprocessor(const RawTable& table, const PreprocessPolicy& policy);
    friend Dataset apply_preprocessor(const Preprocessor& pre, const RawTable& table);

private:
    std::vector<Column> columns_;        // schema order, label/drop skipped
    std::vector<std::string> input_names_;  // full schema order, for table matching
    std::vector<std::string> feature_names_;
    std::vector<std::string> class_names_;
    PreprocessPolicy policy_;
};

Preprocessor fit_preprocessor(const RawTable& table, const PreprocessPolicy& policy);
Dataset apply_preprocessor(const Preprocessor& pre, const RawTable& table);

struct Partition {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Seeded train/test partition of positions [0, labels.size()). Both sides
/// come back sorted ascending.
Partition partition_rows(std::span<const std::size_t> labels, std::size_t num_classes, double train_fraction,
                         std::uint64_t seed, bool stratified);

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double train_fraction, std::uint64_t seed,
                                          bool stratified = true);

}  // namespace lens::data

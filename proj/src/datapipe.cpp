// SPDX-License-Identifier: Apache-2.0
#include "lens/datapipe.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>
#include <unordered_map>

#include "lens/csv.hpp"
#include "lens/error.hpp"
#include "lens/hash.hpp"
#include "lens/parallel.hpp"
#include "lens/rng.hpp"

namespace lens::data {

using nlohmann::json;

namespace {

constexpr std::string_view kind_name(ColumnKind kind) {
    switch (kind) {
        case ColumnKind::numeric: return "numeric";
        case ColumnKind::nominal: return "nominal";
        case ColumnKind::ordinal: return "ordinal";
        case ColumnKind::label: return "label";
        case ColumnKind::drop: return "drop";
    }
    return "?";
}

ColumnKind parse_kind(const std::string& s) {
    for (auto k : {ColumnKind::numeric, ColumnKind::nominal, ColumnKind::ordinal, ColumnKind::label, ColumnKind::drop}) {
        if (s == kind_name(k)) return k;
    }
    throw UsageError("unknown column kind '" + s + "'");
}

bool is_feature(ColumnKind k) {
    return k == ColumnKind::numeric || k == ColumnKind::nominal || k == ColumnKind::ordinal;
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

bool is_missing_text(std::string_view s) { return s.empty() || s == "NaN"; }

Cell parse_cell(std::string_view raw, const ColumnSchema& col, const TableSchema& schema) {
    const std::string_view s = trim(raw);
    if (col.kind == ColumnKind::drop || is_missing_text(s)) return std::monostate{};
    if (col.kind == ColumnKind::numeric) {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::monostate{};
        return v;
    }
    if (col.kind == ColumnKind::label && !schema.label_map.empty()) {
        if (auto it = schema.label_map.find(std::string(s)); it != schema.label_map.end()) return it->second;
        if (auto it = schema.label_map.find("*"); it != schema.label_map.end()) return it->second;
    }
    return std::string(s);
}

/// Rows of one file, cells in schema order.
std::vector<std::vector<Cell>> parse_rows(std::istream& in, const TableSchema& schema, const std::string& source) {
    const auto records = csv::read(in);
    std::vector<std::size_t> mapping(schema.columns.size());
    std::size_t width = schema.columns.size();
    std::size_t first_data = 0;

    if (schema.has_header) {
        if (records.empty()) throw DataError(source + ": empty file");
        auto header = records.front();
        if (!header.empty() && header.front().starts_with("\xEF\xBB\xBF")) header.front().erase(0, 3);
        std::unordered_map<std::string, std::size_t> position;
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (!position.emplace(std::string(trim(header[i])), i).second) {
                throw DataError(source + ": duplicate header column '" + header[i] + "'");
            }
        }
        std::set<std::string> expected;
        for (std::size_t c = 0; c < schema.columns.size(); ++c) {
            const auto& name = schema.columns[c].name;
            expected.insert(name);
            auto it = position.find(name);
            if (it == position.end()) throw DataError(source + ": header lacks schema column '" + name + "'");
            mapping[c] = it->second;
        }
        for (const auto& [name, idx] : position) {
            if (!expected.contains(name)) throw DataError(source + ": header column '" + name + "' not in schema");
        }
        width = header.size();
        first_data = 1;
    } else {
        std::iota(mapping.begin(), mapping.end(), std::size_t{0});
    }

    std::vector<std::vector<Cell>> rows;
    rows.reserve(records.size() - first_data);
    for (std::size_t r = first_data; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.size() != width) {
            throw DataError(source + ": record " + std::to_string(r + 1) + " has " + std::to_string(rec.size()) +
                            " fields, expected " + std::to_string(width));
        }
        std::vector<Cell> row(schema.columns.size());
        for (std::size_t c = 0; c < schema.columns.size(); ++c) {
            row[c] = parse_cell(rec[mapping[c]], schema.columns[c], schema);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

RawTable finalize(const TableSchema& schema, std::vector<std::vector<Cell>> rows) {
    if (rows.empty()) throw DataError("table has no data rows");
    RawTable table;
    table.columns = schema.columns;
    const std::size_t label = schema.label_column();
    if (!schema.classes.empty()) {
        table.class_names = schema.classes;
        const std::set<std::string> known(schema.classes.begin(), schema.classes.end());
        for (const auto& row : rows) {
            if (const auto* s = std::get_if<std::string>(&row[label]); s && !known.contains(*s)) {
                throw DataError("label '" + *s + "' is not one of the schema classes");
            }
        }
    } else {
        std::set<std::string> seen;
        for (const auto& row : rows) {
            if (const auto* s = std::get_if<std::string>(&row[label])) seen.insert(*s);
        }
        table.class_names.assign(seen.begin(), seen.end());
    }
    table.rows = std::move(rows);
    return table;
}

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Population mean and standard deviation; sigma of a constant column is 1.
std::pair<double, double> moments(std::span<const double> v) {
    const double mu = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - mu) * (x - mu);
    double sigma = std::sqrt(ss / static_cast<double>(v.size()));
    if (sigma <= 1e-12 * std::max(1.0, std::abs(mu))) sigma = 1.0;
    return {mu, sigma};
}

std::size_t index_in(const std::vector<std::string>& order, const std::string& value) {
    auto it = std::find(order.begin(), order.end(), value);
    return it == order.end() ? order.size() : static_cast<std::size_t>(it - order.begin());
}

}  // namespace

// ---------------------------------------------------------------- schema

void TableSchema::validate() const {
    std::size_t labels = 0;
    std::set<std::string> names;
    for (const auto& c : columns) {
        if (!names.insert(c.name).second) throw UsageError("duplicate schema column '" + c.name + "'");
        if (c.kind == ColumnKind::label) ++labels;
        if (c.kind == ColumnKind::ordinal) {
            if (c.ordinal_order.empty()) throw UsageError("ordinal column '" + c.name + "' needs an order");
            std::set<std::string> uniq(c.ordinal_order.begin(), c.ordinal_order.end());
            if (uniq.size() != c.ordinal_order.size()) {
                throw UsageError("ordinal column '" + c.name + "' has duplicate categories");
            }
        } else if (!c.ordinal_order.empty()) {
            throw UsageError("column '" + c.name + "' is not ordinal but has an order");
        }
    }
    if (labels != 1) throw UsageError("schema must have exactly one label column");
    std::set<std::string> uniq(classes.begin(), classes.end());
    if (uniq.size() != classes.size()) throw UsageError("schema classes contain duplicates");
}

std::size_t TableSchema::label_column() const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].kind == ColumnKind::label) return i;
    }
    throw UsageError("schema has no label column");
}

TableSchema schema_from_json(const json& j) {
    TableSchema s;
    for (const auto& c : j.at("columns")) {
        ColumnSchema col;
        col.name = c.at("name").get<std::string>();
        col.kind = parse_kind(c.at("kind").get<std::string>());
        if (c.contains("order")) col.ordinal_order = c.at("order").get<std::vector<std::string>>();
        s.columns.push_back(std::move(col));
    }
    s.has_header = j.value("has_header", true);
    if (j.contains("classes")) s.classes = j.at("classes").get<std::vector<std::string>>();
    if (j.contains("label_map")) s.label_map = j.at("label_map").get<std::map<std::string, std::string>>();
    s.validate();
    return s;
}

json to_json(const TableSchema& schema) {
    json cols = json::array();
    for (const auto& c : schema.columns) {
        json o{{"name", c.name}, {"kind", kind_name(c.kind)}};
        if (!c.ordinal_order.empty()) o["order"] = c.ordinal_order;
        cols.push_back(std::move(o));
    }
    json j{{"columns", cols}, {"has_header", schema.has_header}};
    if (!schema.classes.empty()) j["classes"] = schema.classes;
    if (!schema.label_map.empty()) j["label_map"] = schema.label_map;
    return j;
}

TableSchema load_schema(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open schema " + path.string());
    try {
        return schema_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw DataError("schema " + path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------- tables

std::size_t RawTable::label_column() const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].kind == ColumnKind::label) return i;
    }
    throw UsageError("table has no label column");
}

std::optional<std::size_t> RawTable::label_of(std::size_t row) const {
    const auto* s = std::get_if<std::string>(&rows.at(row)[label_column()]);
    if (!s) return std::nullopt;
    const std::size_t idx = index_in(class_names, *s);
    if (idx == class_names.size()) throw DataError("label '" + *s + "' not in class vocabulary");
    return idx;
}

RawTable RawTable::subset(std::span<const std::size_t> row_indices) const {
    RawTable out;
    out.columns = columns;
    out.class_names = class_names;
    out.rows.reserve(row_indices.size());
    for (auto r : row_indices) out.rows.push_back(rows.at(r));
    return out;
}

RawTable parse_table(std::istream& in, const TableSchema& schema) {
    schema.validate();
    return finalize(schema, parse_rows(in, schema, "<stream>"));
}

RawTable load_table(const std::filesystem::path& path, const TableSchema& schema) {
    return load_tables(std::span(&path, 1), schema);
}

RawTable load_table(const std::filesystem::path& path, std::span<const ColumnSchema> columns) {
    TableSchema schema;
    schema.columns.assign(columns.begin(), columns.end());
    return load_table(path, schema);
}

RawTable load_tables(std::span<const std::filesystem::path> paths, const TableSchema& schema) {
    schema.validate();
    std::vector<std::vector<Cell>> rows;
    for (const auto& p : paths) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw DataError("cannot open " + p.string());
        auto part = parse_rows(in, schema, p.string());
        std::move(part.begin(), part.end(), std::back_inserter(rows));
    }
    return finalize(schema, std::move(rows));
}

// ---------------------------------------------------------------- policy

void PreprocessPolicy::validate() const {
    if (!(row_drop_threshold >= 0.0 && row_drop_threshold <= 1.0)) {
        throw UsageError("row_drop_threshold must lie in [0, 1]");
    }
}

json to_json(const PreprocessPolicy& p) {
    return {{"impute_numeric", p.impute_numeric == ImputeStrategy::mean ? "mean" : "median"},
            {"row_drop_threshold", p.row_drop_threshold},
            {"unseen_category", p.unseen_category == UnseenCategory::error ? "error" : "all_zeros"}};
}

PreprocessPolicy policy_from_json(const json& j) {
    PreprocessPolicy p;
    const auto impute = j.value("impute_numeric", std::string("mean"));
    if (impute == "mean") p.impute_numeric = ImputeStrategy::mean;
    else if (impute == "median") p.impute_numeric = ImputeStrategy::median;
    else throw UsageError("impute_numeric must be mean or median");
    p.row_drop_threshold = j.value("row_drop_threshold", 0.5);
    const auto unseen = j.value("unseen_category", std::string("all_zeros"));
    if (unseen == "error") p.unseen_category = UnseenCategory::error;
    else if (unseen == "all_zeros") p.unseen_category = UnseenCategory::all_zeros;
    else throw UsageError("unseen_category must be error or all_zeros");
    p.validate();
    return p;
}

std::vector<std::size_t> retained_rows(const RawTable& table, const PreprocessPolicy& policy) {
    policy.validate();
    const std::size_t label = table.label_column();
    std::size_t features = 0;
    for (const auto& c : table.columns) features += is_feature(c.kind) ? 1 : 0;
    std::vector<std::size_t> kept;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (is_missing(row[label])) continue;
        std::size_t missing = 0;
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (is_feature(table.columns[c].kind) && is_missing(row[c])) ++missing;
        }
        const double frac = features ? static_cast<double>(missing) / static_cast<double>(features) : 0.0;
        if (frac <= policy.row_drop_threshold) kept.push_back(r);
    }
    return kept;
}

// ---------------------------------------------------------------- datasets

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.features = features.gather_rows(indices);
    out.feature_names = feature_names;
    out.class_names = class_names;
    out.labels.reserve(indices.size());
    out.source_rows.reserve(indices.size());
    for (auto i : indices) {
        out.labels.push_back(labels.at(i));
        out.source_rows.push_back(source_rows.empty() ? i : source_rows.at(i));
    }
    return out;
}

void write_dataset_csv(const Dataset& data, std::ostream& out) {
    csv::Record header = data.feature_names;
    header.emplace_back("label");
    csv::write_record(out, header);
    csv::Record rec(data.width() + 1);
    for (std::size_t r = 0; r < data.rows(); ++r) {
        for (std::size_t c = 0; c < data.width(); ++c) rec[c] = csv::format_double(data.features(r, c));
        rec.back() = data.class_names.at(data.labels[r]);
        csv::write_record(out, rec);
    }
}

// ---------------------------------------------------------------- preprocessor

Preprocessor fit_preprocessor(const RawTable& table, const PreprocessPolicy& policy) {
    policy.validate();
    const auto rows = retained_rows(table, policy);
    if (rows.empty()) throw DataError("no rows left after missing-value filtering");

    Preprocessor pre;
    pre.policy_ = policy;
    pre.class_names_ = table.class_names;
    std::size_t offset = 0;

    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        const auto& schema = table.columns[c];
        pre.input_names_.push_back(schema.name);
        if (!is_feature(schema.kind)) continue;

        Preprocessor::Column col;
        col.name = schema.name;
        col.kind = schema.kind;
        col.source = c;
        col.offset = offset;

        if (schema.kind == ColumnKind::nominal) {
            std::map<std::string, std::size_t> counts;
            for (auto r : rows) {
                if (const auto* s = std::get_if<std::string>(&table.rows[r][c])) ++counts[*s];
            }
            if (counts.empty()) throw DataError("column '" + schema.name + "' has no observed categories");
            std::size_t best = 0;
            for (const auto& [cat, n] : counts) {
                col.categories.push_back(cat);
                if (n > best) {  // map order makes ties resolve to the smallest name
                    best = n;
                    col.impute_category = cat;
                }
            }
            for (const auto& cat : col.categories) pre.feature_names_.push_back(schema.name + "=" + cat);
            offset += col.categories.size();
            pre.columns_.push_back(std::move(col));
            continue;
        }

        std::vector<double> observed;
        observed.reserve(rows.size());
        if (schema.kind == ColumnKind::ordinal) {
            col.categories = schema.ordinal_order;
            for (auto r : rows) {
                if (const auto* s = std::get_if<std::string>(&table.rows[r][c])) {
                    const std::size_t idx = index_in(col.categories, *s);
                    if (idx == col.categories.size()) {
                        throw DataError("column '" + schema.name + "': '" + *s + "' is not in the ordinal order");
                    }
                    observed.push_back(static_cast<double>(idx));
                }
            }
        } else {
            for (auto r : rows) {
                if (const auto* v = std::get_if<double>(&table.rows[r][c])) observed.push_back(*v);
            }
        }
        if (observed.empty()) throw DataError("column '" + schema.name + "' is entirely missing");
        col.impute_value =
            policy.impute_numeric == ImputeStrategy::mean ? mean_of(observed) : median_of(observed);

        // Statistics run over the imputed column, one value per retained row.
        std::vector<double> filled;
        filled.reserve(rows.size());
        for (auto r : rows) {
            const auto& cell = table.rows[r][c];
            if (is_missing(cell)) {
                filled.push_back(col.impute_value);
            } else if (const auto* v = std::get_if<double>(&cell)) {
                filled.push_back(*v);
            } else {
                filled.push_back(static_cast<double>(index_in(col.categories, std::get<std::string>(cell))));
            }
        }
        std::tie(col.mean, col.stddev) = moments(filled);
        pre.feature_names_.push_back(schema.name);
        offset += 1;
        pre.columns_.push_back(std::move(col));
    }
    return pre;
}

void Preprocessor::transform_row(std::span<const Cell> row, std::span<double> out) const {
    if (out.size() != output_dim()) throw UsageError("transform_row: output width mismatch");
    for (const auto& col : columns_) {
        const Cell& cell = row[col.source];
        switch (col.kind) {
            case ColumnKind::numeric: {
                const double v = is_missing(cell) ? col.impute_value : std::get<double>(cell);
                out[col.offset] = (v - col.mean) / col.stddev;
                break;
            }
            case ColumnKind::ordinal: {
                double v = col.impute_value;
                if (const auto* s = std::get_if<std::string>(&cell)) {
                    const std::size_t idx = index_in(col.categories, *s);
                    if (idx == col.categories.size()) {
                        throw DataError("column '" + col.name + "': '" + *s + "' is not in the ordinal order");
                    }
                    v = static_cast<double>(idx);
                }
                out[col.offset] = (v - col.mean) / col.stddev;
                break;
            }
            case ColumnKind::nominal: {
                const std::string& cat = is_missing(cell) ? col.impute_category : std::get<std::string>(cell);
                std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(col.offset), col.categories.size(), 0.0);
                auto it = std::lower_bound(col.categories.begin(), col.categories.end(), cat);
                if (it != col.categories.end() && *it == cat) {
                    out[col.offset + static_cast<std::size_t>(it - col.categories.begin())] = 1.0;
                } else if (policy_.unseen_category == UnseenCategory::error) {
                    throw DataError("column '" + col.name + "': unseen category '" + cat + "'");
                }
                break;
            }
            default:
                break;
        }
    }
}

Dataset apply_preprocessor(const Preprocessor& pre, const RawTable& table) {
    if (table.columns.size() != pre.input_names_.size()) throw DataError("table does not match the fitted schema");
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (table.columns[c].name != pre.input_names_[c]) {
            throw DataError("table column '" + table.columns[c].name + "' does not match fitted column '" +
                            pre.input_names_[c] + "'");
        }
    }
    // Map the table's class vocabulary onto the fitted one by name.
    std::vector<std::size_t> class_map;
    for (const auto& name : table.class_names) {
        const std::size_t idx = index_in(pre.class_names(), name);
        if (idx == pre.class_names().size()) throw DataError("class '" + name + "' unknown to the preprocessor");
        class_map.push_back(idx);
    }

    const auto rows = retained_rows(table, pre.policy());
    Dataset out;
    out.features = Matrix(rows.size(), pre.output_dim());
    out.feature_names = pre.output_feature_names();
    out.class_names = pre.class_names();
    out.source_rows = rows;
    out.labels.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) out.labels[i] = class_map[*table.label_of(rows[i])];

    parallel_for(rows.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) pre.transform_row(table.rows[rows[i]], out.features.row(i));
    });
    return out;
}

json Preprocessor::to_json() const {
    json cols = json::array();
    for (const auto& c : columns_) {
        cols.push_back({{"name", c.name},
                        {"kind", kind_name(c.kind)},
                        {"impute_value", c.impute_value},
                        {"impute_category", c.impute_category},
                        {"categories", c.categories},
                        {"mean", c.mean},
                        {"stddev", c.stddev},
                        {"source", c.source},
                        {"offset", c.offset}});
    }
    return {{"policy", data::to_json(policy_)},
            {"input_columns", input_names_},
            {"columns", cols},
            {"feature_names", feature_names_},
            {"class_names", class_names_}};
}

Preprocessor Preprocessor::from_json(const json& j) {
    Preprocessor p;
    p.policy_ = policy_from_json(j.at("policy"));
    p.input_names_ = j.at("input_columns").get<std::vector<std::string>>();
    p.feature_names_ = j.at("feature_names").get<std::vector<std::string>>();
    p.class_names_ = j.at("class_names").get<std::vector<std::string>>();
    for (const auto& c : j.at("columns")) {
        Column col;
        col.name = c.at("name").get<std::string>();
        col.kind = parse_kind(c.at("kind").get<std::string>());
        col.impute_value = c.at("impute_value").get<double>();
        col.impute_category = c.at("impute_category").get<std::string>();
        col.categories = c.at("categories").get<std::vector<std::string>>();
        col.mean = c.at("mean").get<double>();
        col.stddev = c.at("stddev").get<double>();
        col.source = c.at("source").get<std::size_t>();
        col.offset = c.at("offset").get<std::size_t>();
        p.columns_.push_back(std::move(col));
    }
    return p;
}

std::string Preprocessor::fingerprint() const { return fnv1a_hex(to_json().dump()); }

// ---------------------------------------------------------------- split

Partition partition_rows(std::span<const std::size_t> labels, std::size_t num_classes, double train_fraction,
                         std::uint64_t seed, bool stratified) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw UsageError("train_fraction must lie in (0, 1)");
    Rng rng(seed);
    Partition part;

    auto take = [&](std::vector<std::size_t>& pool) {
        rng.shuffle(std::span(pool));
        const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(pool.size()) + 0.5));
        part.train.insert(part.train.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_train));
        part.test.insert(part.test.end(), pool.begin() + static_cast<std::ptrdiff_t>(n_train), pool.end());
    };

    if (stratified) {
        std::vector<std::vector<std::size_t>> by_class(num_classes);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] >= num_classes) throw UsageError("label out of range in partition_rows");
            by_class[labels[i]].push_back(i);
        }
        for (std::size_t c = 0; c < num_classes; ++c) {
            if (by_class[c].empty()) throw DataError("class " + std::to_string(c) + " has no rows to stratify");
            take(by_class[c]);
        }
    } else {
        std::vector<std::size_t> all(labels.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        take(all);
    }
    if (part.train.empty() || part.test.empty()) throw DataError("split leaves an empty train or test side");
    std::sort(part.train.begin(), part.train.end());
    std::sort(part.test.begin(), part.test.end());
    return part;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double train_fraction, std::uint64_t seed,
                                          bool stratified) {
    const auto part = partition_rows(data.labels, data.class_names.size(), train_fraction, seed, stratified);
    return {data.subset(part.train), data.subset(part.test)};
}

}  // namespace lens::data

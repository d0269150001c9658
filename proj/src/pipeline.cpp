// SPDX-License-Identifier: Apache-2.0
#include "lens/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "lens/attribution.hpp"
#include "lens/csv.hpp"
#include "lens/error.hpp"
#include "lens/eval.hpp"
#include "lens/hash.hpp"

namespace lens::pipeline {

using nlohmann::json;

namespace {

constexpr const char* kPreprocessor = "preprocessor.json";
constexpr const char* kVae = "vae.json";
constexpr const char* kTeacher = "teacher.json";
constexpr const char* kStudent = "student.json";
constexpr const char* kTiming = "timing.json";

const char* source_name(FeatureSource s) { return s == FeatureSource::latent ? "latent" : "raw"; }
const char* space_name(AttributionSpace s) { return s == AttributionSpace::input ? "input" : "latent"; }

template <class Body>
void run_stage(const std::string& name, Body&& body) {
    try {
        body();
    } catch (const UsageError& e) {
        throw UsageError(name + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(name + ": " + e.what());
    } catch (const NumericError& e) {
        throw NumericError(name + ": " + e.what());
    } catch (const json::exception& e) {
        throw DataError(name + ": malformed artifact or config: " + e.what());
    }
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string data_checksum(const std::vector<fs::path>& paths) {
    std::string digests;
    for (const auto& p : paths) digests += fnv1a_hex(slurp(p));
    return fnv1a_hex(digests);
}

std::string safe_name(const std::string& s) {
    std::string out;
    for (char c : s) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                        c == '_';
        out.push_back(ok ? c : '_');
    }
    return out;
}

json stamp(const PipelineConfig& cfg, json body) {
    body["config"] = to_json(cfg);
    body["seed"] = cfg.seed;
    return body;
}

fs::path out_path(const PipelineConfig& cfg, const std::string& name) { return cfg.out_dir / name; }

json read_artifact(const PipelineConfig& cfg, const char* name, const char* producer) {
    const auto path = out_path(cfg, name);
    if (!fs::exists(path)) throw DataError(std::string("missing ") + name + "; run `" + producer + "` first");
    return read_json(path);
}

void expect_hash(const json& artifact, const char* key, const std::string& expected, const std::string& what) {
    const auto got = artifact.at(key).get<std::string>();
    if (got != expected) {
        throw DataError("artifact hash mismatch: " + what + " was built from " + key + " " + got + ", expected " +
                        expected);
    }
}

std::string digest(const json& j) { return fnv1a_hex(j.dump()); }

// ---------------------------------------------------------------- loading

struct Split {
    data::Preprocessor pre;
    std::string fingerprint;
    data::Dataset train;
    data::Dataset test;
};

data::TableSchema schema_of(const PipelineConfig& cfg) { return data::load_schema(cfg.schema); }

data::Dataset transform(const data::Preprocessor& pre, const data::RawTable& table,
                        const std::vector<std::size_t>& rows) {
    auto ds = data::apply_preprocessor(pre, table.subset(rows));
    if (ds.rows() != rows.size()) throw DataError("stored split rows are no longer retained by the policy");
    ds.source_rows = rows;
    return ds;
}

Split load_split(const PipelineConfig& cfg) {
    const json art = read_artifact(cfg, kPreprocessor, "preprocess");
    if (art.at("data_checksum").get<std::string>() != data_checksum(cfg.data)) {
        throw DataError("input data changed since preprocess; rerun `preprocess`");
    }
    Split s{data::Preprocessor::from_json(art.at("preprocessor")), art.at("fingerprint").get<std::string>(), {}, {}};
    if (s.pre.fingerprint() != s.fingerprint) throw DataError("preprocessor.json fingerprint does not match its state");
    const auto table = data::load_tables(cfg.data, schema_of(cfg));
    s.train = transform(s.pre, table, art.at("split").at("train_rows").get<std::vector<std::size_t>>());
    s.test = transform(s.pre, table, art.at("split").at("test_rows").get<std::vector<std::size_t>>());
    return s;
}

struct Models {
    Split split;
    std::optional<nn::VaeModel> vae;
    std::string vae_hash;
    FeatureSource source = FeatureSource::latent;
};

/// Loads the split and, when the features are latent codes, the VAE.
Models load_upstream(const PipelineConfig& cfg, FeatureSource source) {
    Models m{load_split(cfg), std::nullopt, "", source};
    if (source == FeatureSource::latent) {
        const json art = read_artifact(cfg, kVae, "train-vae");
        expect_hash(art, "preprocessor_fingerprint", m.split.fingerprint, "vae.json");
        m.vae = nn::vae_from_json(art.at("model"));
        m.vae_hash = digest(art.at("model"));
    }
    return m;
}

data::Dataset classifier_inputs(const Models& m, const data::Dataset& ds) {
    return m.vae ? nn::encode_dataset(*m.vae, ds) : ds;
}

FeatureSource parse_source(const std::string& s) {
    if (s == "latent") return FeatureSource::latent;
    if (s == "raw") return FeatureSource::raw;
    throw UsageError("features must be latent or raw, got '" + s + "'");
}

struct LoadedClassifier {
    distill::Classifier model;
    std::string hash;
    FeatureSource source;
};

/// Loads teacher.json or student.json and checks it against its upstream
/// artifacts.
LoadedClassifier load_classifier(const PipelineConfig& cfg, const Models& m, const char* file, const char* producer) {
    const json art = read_artifact(cfg, file, producer);
    expect_hash(art, "preprocessor_fingerprint", m.split.fingerprint, file);
    const auto source = parse_source(art.at("feature_source").get<std::string>());
    if (source != m.source) {
        throw DataError(std::string(file) + " was trained on " + source_name(source) + " features but the config asks for " +
                        source_name(m.source));
    }
    if (source == FeatureSource::latent) expect_hash(art, "vae_hash", m.vae_hash, file);
    return {distill::classifier_from_json(art.at("model")), digest(art.at("model")), source};
}

json history_json(const std::vector<double>& losses) { return losses; }

json class_counts(const data::Dataset& ds) {
    std::vector<std::size_t> counts(ds.class_names.size(), 0);
    for (auto l : ds.labels) ++counts[l];
    json out = json::object();
    for (std::size_t c = 0; c < counts.size(); ++c) out[ds.class_names[c]] = counts[c];
    return out;
}

std::string csv_text(const auto& write) {
    std::ostringstream os;
    write(os);
    return os.str();
}

}  // namespace

// ---------------------------------------------------------------- config

void PipelineConfig::derive_seeds() {
    vae_train.seed = seed + 1;
    distill.teacher_cfg.seed = seed + 2;
    distill.student_cfg.seed = seed + 3;
}

void PipelineConfig::validate() const {
    if (data.empty()) throw UsageError("config: no data files given");
    for (const auto& p : data) {
        if (!fs::exists(p)) throw UsageError("config: data file not found: " + p.string());
    }
    if (schema.empty() || !fs::exists(schema)) throw UsageError("config: schema file not found: " + schema.string());
    policy.validate();
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw UsageError("config: train_fraction must lie in (0, 1)");
    vae_train.validate();
    distill.validate();
    if (vae.latent_dim == 0) throw UsageError("config: vae.latent_dim must be positive");
    if (background_size == 0) throw UsageError("config: explain.background_size must be positive");
    if (timing_repeats < 3) throw UsageError("config: timing.repeats must be at least 3");
    if (timing_batch == 0) throw UsageError("config: timing.batch must be positive");
    if (space == AttributionSpace::latent && features == FeatureSource::raw) {
        throw UsageError("config: latent attribution needs latent classifier features");
    }
}

PipelineConfig config_from_json(const json& j, const fs::path& base_dir) {
    PipelineConfig c;
    auto resolve = [&](const std::string& p) {
        fs::path path(p);
        return path.is_absolute() ? path : (base_dir / path).lexically_normal();
    };
    if (j.contains("data")) {
        const auto& d = j.at("data");
        if (d.is_string()) c.data.push_back(resolve(d.get<std::string>()));
        else for (const auto& p : d) c.data.push_back(resolve(p.get<std::string>()));
    }
    if (j.contains("schema")) c.schema = resolve(j.at("schema").get<std::string>());
    if (j.contains("preprocess")) c.policy = data::policy_from_json(j.at("preprocess"));
    if (j.contains("split")) {
        const auto& s = j.at("split");
        c.train_fraction = s.value("train_fraction", c.train_fraction);
        c.stratified = s.value("stratified", c.stratified);
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("vae")) {
        const auto& v = j.at("vae");
        c.vae = nn::vae_spec_from_json(v, c.vae);
        if (v.contains("train")) c.vae_train = nn::train_config_from_json(v.at("train"), c.vae_train);
    }
    if (j.contains("teacher")) {
        const auto& t = j.at("teacher");
        c.teacher.hidden = t.value("hidden", c.teacher.hidden);
        if (t.contains("train")) c.distill.teacher_cfg = nn::train_config_from_json(t.at("train"), c.distill.teacher_cfg);
    }
    if (j.contains("student")) {
        const auto& s = j.at("student");
        c.student.hidden = s.value("hidden", c.student.hidden);
        if (s.contains("train")) c.distill.student_cfg = nn::train_config_from_json(s.at("train"), c.distill.student_cfg);
    }
    if (j.contains("distill")) {
        const auto& d = j.at("distill");
        c.distill.temperature = d.value("temperature", c.distill.temperature);
        c.distill.alpha = d.value("alpha", c.distill.alpha);
    }
    if (j.contains("features")) c.features = parse_source(j.at("features").get<std::string>());
    if (j.contains("explain")) {
        const auto& e = j.at("explain");
        c.explain_rows = e.value("rows", c.explain_rows);
        c.background_size = e.value("background_size", c.background_size);
        if (e.contains("target_class")) {
            const auto& t = e.at("target_class");
            if (t.is_number_integer()) c.target_class = std::to_string(t.get<long long>());
            else if (!t.is_null()) c.target_class = t.get<std::string>();
        }
        const auto space = e.value("space", std::string("input"));
        if (space == "input") c.space = AttributionSpace::input;
        else if (space == "latent") c.space = AttributionSpace::latent;
        else throw UsageError("explain.space must be input or latent");
        const auto model = e.value("model", std::string("student"));
        if (model != "student" && model != "teacher") throw UsageError("explain.model must be student or teacher");
        c.explain_teacher = model == "teacher";
    }
    if (j.contains("timing")) {
        c.timing_repeats = j.at("timing").value("repeats", c.timing_repeats);
        c.timing_batch = j.at("timing").value("batch", c.timing_batch);
    }
    if (j.contains("out")) c.out_dir = resolve(j.at("out").get<std::string>());
    c.derive_seeds();
    return c;
}

PipelineConfig load_config(const fs::path& path) {
    json j;
    try {
        j = read_json(path);
    } catch (const json::exception& e) {
        throw UsageError("config " + path.string() + ": " + e.what());
    }
    return config_from_json(j, fs::absolute(path).parent_path());
}

json to_json(const PipelineConfig& c) {
    json data = json::array();
    for (const auto& p : c.data) data.push_back(p.string());
    json spec = nn::to_json(c.vae);
    spec["train"] = nn::to_json(c.vae_train);
    return {{"data", data},
            {"schema", c.schema.string()},
            {"preprocess", data::to_json(c.policy)},
            {"split", {{"train_fraction", c.train_fraction}, {"stratified", c.stratified}}},
            {"seed", c.seed},
            {"vae", spec},
            {"teacher", {{"hidden", c.teacher.hidden}, {"train", nn::to_json(c.distill.teacher_cfg)}}},
            {"student", {{"hidden", c.student.hidden}, {"train", nn::to_json(c.distill.student_cfg)}}},
            {"distill", {{"temperature", c.distill.temperature}, {"alpha", c.distill.alpha}}},
            {"features", source_name(c.features)},
            {"explain",
             {{"rows", c.explain_rows},
              {"background_size", c.background_size},
              {"target_class", c.target_class ? json(*c.target_class) : json(nullptr)},
              {"space", space_name(c.space)},
              {"model", c.explain_teacher ? "teacher" : "student"}}},
            {"timing", {{"repeats", c.timing_repeats}, {"batch", c.timing_batch}}}};
}

std::size_t resolve_class(const std::string& spec, const std::vector<std::string>& class_names) {
    for (std::size_t c = 0; c < class_names.size(); ++c) {
        if (class_names[c] == spec) return c;
    }
    std::size_t index = 0;
    const auto* end = spec.data() + spec.size();
    const auto [ptr, ec] = std::from_chars(spec.data(), end, index);
    if (spec.empty() || ec != std::errc() || ptr != end) throw UsageError("unknown target class '" + spec + "'");
    if (index >= class_names.size()) {
        throw UsageError("target class index " + spec + " out of range (" + std::to_string(class_names.size()) +
                         " classes)");
    }
    return index;
}

void write_artifact(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    auto partial = path;
    partial += ".partial";
    {
        std::ofstream out(partial, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + partial.string());
        out << text;
        out.flush();
        if (!out) throw DataError("write failed: " + partial.string());
    }
    fs::rename(partial, path);
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return json::parse(in);
}

// ---------------------------------------------------------------- stages

void preprocess(const PipelineConfig& cfg) {
    run_stage("preprocess", [&] {
        cfg.validate();
        const auto table = data::load_tables(cfg.data, schema_of(cfg));
        const auto kept = data::retained_rows(table, cfg.policy);
        if (kept.empty()) throw DataError("no rows survive the missing-value filter");
        std::vector<std::size_t> labels;
        labels.reserve(kept.size());
        for (auto r : kept) labels.push_back(*table.label_of(r));
        const auto part =
            data::partition_rows(labels, table.class_names.size(), cfg.train_fraction, cfg.split_seed(), cfg.stratified);
        std::vector<std::size_t> train_rows, test_rows;
        for (auto i : part.train) train_rows.push_back(kept[i]);
        for (auto i : part.test) test_rows.push_back(kept[i]);

        const auto pre = data::fit_preprocessor(table.subset(train_rows), cfg.policy);
        const auto train = transform(pre, table, train_rows);
        const auto test = transform(pre, table, test_rows);

        json art{{"fingerprint", pre.fingerprint()},
                 {"data_checksum", data_checksum(cfg.data)},
                 {"preprocessor", pre.to_json()},
                 {"rows", {{"loaded", table.rows.size()}, {"retained", kept.size()}}},
                 {"split",
                  {{"train_count", train_rows.size()},
                   {"test_count", test_rows.size()},
                   {"train_classes", class_counts(train)},
                   {"test_classes", class_counts(test)},
                   {"train_rows", train_rows},
                   {"test_rows", test_rows}}}};
        write_artifact(out_path(cfg, kPreprocessor), stamp(cfg, std::move(art)).dump(1));
    });
}

void train_vae(const PipelineConfig& cfg) {
    run_stage("train-vae", [&] {
        cfg.validate();
        const auto split = load_split(cfg);
        const auto result = nn::train_vae(split.train, cfg.vae, cfg.vae_train);
        json history = json::array();
        for (const auto& e : result.history) history.push_back({{"loss", e.loss}, {"recon", e.recon}, {"kl", e.kl}});
        json art{{"preprocessor_fingerprint", split.fingerprint},
                 {"spec", nn::to_json(cfg.vae)},
                 {"train", nn::to_json(cfg.vae_train)},
                 {"params", nn::count_parameters(result.model)},
                 {"history", history},
                 {"model", nn::to_json(result.model)}};
        write_artifact(out_path(cfg, kVae), stamp(cfg, std::move(art)).dump(1));
    });
}

void train_teacher(const PipelineConfig& cfg) {
    run_stage("train-teacher", [&] {
        cfg.validate();
        const auto m = load_upstream(cfg, cfg.features);
        const auto inputs = classifier_inputs(m, m.split.train);
        const auto trained = distill::train_teacher(inputs, cfg.teacher, cfg.distill.teacher_cfg);
        json art{{"preprocessor_fingerprint", m.split.fingerprint},
                 {"vae_hash", m.vae_hash},
                 {"feature_source", source_name(m.source)},
                 {"hidden", cfg.teacher.hidden},
                 {"train", nn::to_json(cfg.distill.teacher_cfg)},
                 {"params", nn::count_parameters(trained.model.net)},
                 {"history", history_json(trained.history)},
                 {"model", distill::to_json(trained.model)}};
        write_artifact(out_path(cfg, kTeacher), stamp(cfg, std::move(art)).dump(1));
    });
}

void distill(const PipelineConfig& cfg) {
    run_stage("distill", [&] {
        cfg.validate();
        const auto m = load_upstream(cfg, cfg.features);
        const auto teacher = load_classifier(cfg, m, kTeacher, "train-teacher");
        const auto inputs = classifier_inputs(m, m.split.train);
        const auto trained = distill::train_student(inputs, teacher.model, cfg.student, cfg.distill);
        json art{{"preprocessor_fingerprint", m.split.fingerprint},
                 {"vae_hash", m.vae_hash},
                 {"teacher_hash", teacher.hash},
                 {"feature_source", source_name(m.source)},
                 {"hidden", cfg.student.hidden},
                 {"distill", distill::to_json(cfg.distill)},
                 {"params", nn::count_parameters(trained.model.net)},
                 {"history", history_json(trained.history)},
                 {"model", distill::to_json(trained.model)}};
        write_artifact(out_path(cfg, kStudent), stamp(cfg, std::move(art)).dump(1));
    });
}

void evaluate(const PipelineConfig& cfg) {
    run_stage("evaluate", [&] {
        cfg.validate();
        const auto m = load_upstream(cfg, cfg.features);
        const auto test = classifier_inputs(m, m.split.test);
        if (test.rows() == 0) throw DataError("test split is empty");
        const std::size_t batch_rows = std::min(cfg.timing_batch, test.rows());
        std::vector<std::size_t> batch_idx(batch_rows);
        for (std::size_t i = 0; i < batch_rows; ++i) batch_idx[i] = i;
        const Matrix timing_batch = test.features.gather_rows(batch_idx);

        json timing{{"batch", batch_rows}, {"repeats", cfg.timing_repeats}};
        if (m.vae) {
            const auto t = eval::time_inference(*m.vae, m.split.test.features.gather_rows(batch_idx), cfg.timing_repeats);
            timing["encoder"] = {{"ms_per_batch", t.ms_per_batch}, {"ms_per_sample", t.ms_per_sample}};
        }
        for (const char* role : {"teacher", "student"}) {
            const bool is_teacher = std::string(role) == "teacher";
            const auto c = load_classifier(cfg, m, is_teacher ? kTeacher : kStudent, is_teacher ? "train-teacher" : "distill");
            const auto pred = distill::predict(c.model, test.features);
            const auto cm = eval::confusion(test.labels, pred.labels, test.class_names.size(), test.class_names);
            auto rep = eval::metrics(cm);
            rep.params = nn::count_parameters(c.model.net);
            rep.memory_bytes = eval::analytic_memory(c.model.net);
            const auto t = eval::time_inference(c.model.net, timing_batch, cfg.timing_repeats);
            rep.inference_ms_per_batch = t.ms_per_batch;
            timing[role] = {{"ms_per_batch", t.ms_per_batch}, {"ms_per_sample", t.ms_per_sample}};

            json art{{"model", role},
                     {"model_hash", c.hash},
                     {"preprocessor_fingerprint", m.split.fingerprint},
                     {"feature_source", source_name(m.source)},
                     {"test_rows", test.rows()},
                     {"metrics", eval::to_json(rep, test.class_names)},
                     {"confusion", eval::to_json(cm)}};
            const std::string r(role);
            write_artifact(out_path(cfg, "metrics_" + r + ".json"), stamp(cfg, std::move(art)).dump(1));
            write_artifact(out_path(cfg, "metrics_" + r + ".csv"),
                           csv_text([&](std::ostream& os) { eval::write_metrics_csv(rep, test.class_names, os); }));
            write_artifact(out_path(cfg, "confusion_" + r + ".csv"),
                           csv_text([&](std::ostream& os) { eval::write_confusion_csv(cm, os); }));
        }
        write_artifact(out_path(cfg, kTiming), stamp(cfg, std::move(timing)).dump(1));
    });
}

void explain(const PipelineConfig& cfg) {
    run_stage("explain", [&] {
        cfg.validate();
        const auto m = load_upstream(cfg, cfg.features);
        const char* file = cfg.explain_teacher ? kTeacher : kStudent;
        const auto c = load_classifier(cfg, m, file, cfg.explain_teacher ? "train-teacher" : "distill");
        const auto& test = m.split.test;
        const auto& names = c.model.class_names;
        std::optional<std::size_t> fixed_target;
        if (cfg.target_class) fixed_target = resolve_class(*cfg.target_class, names);

        const bool latent_space = cfg.space == AttributionSpace::latent;
        const nn::VaeModel* encoder = latent_space || !m.vae ? nullptr : &*m.vae;
        const auto train_view = latent_space ? classifier_inputs(m, m.split.train) : m.split.train;
        const auto test_view = latent_space ? classifier_inputs(m, test) : test;
        const Matrix background = attr::sample_background(train_view.features, cfg.background_size, cfg.background_seed());
        const auto model_inputs = classifier_inputs(m, test);

        for (auto row : cfg.explain_rows) {
            if (row >= test.rows()) {
                throw UsageError("explain row " + std::to_string(row) + " out of range (test split has " +
                                 std::to_string(test.rows()) + " rows)");
            }
            const std::size_t one[] = {row};
            const auto pred = distill::predict(c.model, model_inputs.features.gather_rows(one));
            const std::size_t target = fixed_target ? *fixed_target : pred.labels[0];
            const auto a = attr::explain_instance(c.model, encoder, test_view.feature_names, background,
                                                  test_view.features.row(row), target);
            json art = attr::to_json(a, target, names[target]);
            art["row"] = row;
            art["source_row"] = test.source_rows[row];
            art["true_label"] = names[test.labels[row]];
            art["predicted_label"] = names[pred.labels[0]];
            art["model_probability"] = pred.probs(0, target);
            art["model"] = cfg.explain_teacher ? "teacher" : "student";
            art["model_hash"] = c.hash;
            art["space"] = space_name(cfg.space);
            art["background_rows"] = background.rows();
            art["preprocessor_fingerprint"] = m.split.fingerprint;
            const std::string stem = "row" + std::to_string(row) + "_" + safe_name(names[target]);
            write_artifact(out_path(cfg, "attribution_" + stem + ".json"), stamp(cfg, std::move(art)).dump(1));
            write_artifact(out_path(cfg, "waterfall_" + stem + ".csv"),
                           csv_text([&](std::ostream& os) { attr::write_waterfall_csv(a, os); }));
        }
    });
}

void report(const PipelineConfig& cfg) {
    run_stage("report", [&] {
        const json pre = read_artifact(cfg, kPreprocessor, "preprocess");
        const auto& split = pre.at("split");
        const auto classes = pre.at("preprocessor").at("class_names").get<std::vector<std::string>>();

        write_artifact(out_path(cfg, "class_distribution.csv"), csv_text([&](std::ostream& os) {
                           csv::write_record(os, {"Class", "Train", "Test"});
                           for (const auto& name : classes) {
                               csv::write_record(os, {name, std::to_string(split.at("train_classes").value(name, 0)),
                                                      std::to_string(split.at("test_classes").value(name, 0))});
                           }
                       }));

        std::ostringstream md;
        md << "# Pipeline report\n\n";
        md << "Seed " << cfg.seed << ". Rows loaded " << pre.at("rows").at("loaded") << ", retained "
           << pre.at("rows").at("retained") << ", train " << split.at("train_count") << ", test "
           << split.at("test_count") << ".\n\n";
        md << "## Class distribution\n\n| Class | Train | Test |\n|---|---|---|\n";
        for (const auto& name : classes) {
            md << "| " << name << " | " << split.at("train_classes").value(name, 0) << " | "
               << split.at("test_classes").value(name, 0) << " |\n";
        }

        json timing;
        if (fs::exists(out_path(cfg, kTiming))) timing = read_json(out_path(cfg, kTiming));
        md << "\n## Detection\n\n| Model | Accuracy | Precision | Recall | F1 | Params | Memory (bytes) | ms / batch |\n"
           << "|---|---|---|---|---|---|---|---|\n";
        for (const char* role : {"teacher", "student"}) {
            const auto path = out_path(cfg, std::string("metrics_") + role + ".json");
            if (!fs::exists(path)) continue;
            const json art = read_json(path);
            const auto& r = art.at("metrics");
            md << "| " << role << " | " << csv::format_double(r.at("accuracy").get<double>()) << " | "
               << csv::format_double(r.at("weighted").at("precision").get<double>()) << " | "
               << csv::format_double(r.at("weighted").at("recall").get<double>()) << " | "
               << csv::format_double(r.at("weighted").at("f1").get<double>()) << " | " << r.at("params") << " | "
               << r.at("memory_bytes") << " | ";
            if (timing.contains(role)) md << csv::format_double(timing.at(role).at("ms_per_batch").get<double>());
            else md << "-";
            md << " |\n";
        }

        std::vector<fs::path> attributions;
        if (fs::exists(cfg.out_dir)) {
            for (const auto& e : fs::directory_iterator(cfg.out_dir)) {
                const auto name = e.path().filename().string();
                if (name.starts_with("attribution_") && name.ends_with(".json")) attributions.push_back(e.path());
            }
        }
        std::sort(attributions.begin(), attributions.end());
        for (const auto& path : attributions) {
            const json a = read_json(path);
            md << "\n## Attribution, test row " << a.at("row") << " (" << a.at("model").get<std::string>() << ", P("
               << a.at("target_name").get<std::string>() << "))\n\n";
            md << "| Step | Feature | Contribution | Cumulative |\n|---|---|---|---|\n";
            md << "| 0 | Intercept | " << csv::format_double(a.at("baseline").get<double>()) << " | "
               << csv::format_double(a.at("baseline").get<double>()) << " |\n";
            const auto& contrib = a.at("contributions");
            for (std::size_t i = 0; i < std::min<std::size_t>(contrib.size(), 10); ++i) {
                const auto& c = contrib[i];
                md << "| " << c.at("step") << " | " << c.at("name").get<std::string>() << " | "
                   << csv::format_double(c.at("value").get<double>()) << " | "
                   << csv::format_double(c.at("cumulative").get<double>()) << " |\n";
            }
            if (contrib.size() > 10) md << "\n" << contrib.size() - 10 << " further features omitted.\n";
            md << "\nPrediction " << csv::format_double(a.at("final_prediction").get<double>()) << ".\n";
        }
        write_artifact(out_path(cfg, "report.md"), md.str());
    });
}

void run(const PipelineConfig& cfg) {
    preprocess(cfg);
    if (cfg.features == FeatureSource::latent) train_vae(cfg);  // nothing reads it otherwise
    train_teacher(cfg);
    distill(cfg);
    evaluate(cfg);
    explain(cfg);
    report(cfg);
}

}  // namespace lens::pipeline

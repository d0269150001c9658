// SPDX-License-Identifier: Apache-2.0
// End-to-end checks that drive the `lens` binary through std::system.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "lens/error.hpp"
#include "lens/pipeline.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kSource(LENS_SOURCE_DIR);

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

/// Runs the CLI with `args`; stdout and stderr go to `log`. Returns the exit status.
int lens_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = quote(LENS_CLI_PATH) + " " + args + " >" + quote(log) + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Small, fast pipeline over the bundled 600-row table.
json quick_config() {
    return {{"data", (kSource / "data/synthetic_600.csv").string()},
            {"schema", (kSource / "configs/synthetic_schema.json").string()},
            {"split", {{"train_fraction", 0.10}, {"stratified", true}}},
            {"seed", 5},
            {"vae", {{"encoder_hidden", {16}}, {"latent_dim", 3}, {"decoder_hidden", {16}}, {"train", {{"epochs", 40}}}}},
            {"teacher", {{"hidden", {16, 8}}, {"train", {{"epochs", 30}}}}},
            {"student", {{"hidden", {8}}, {"train", {{"epochs", 30}}}}},
            {"explain", {{"rows", {0, 3}}, {"background_size", 40}}},
            {"timing", {{"repeats", 3}, {"batch", 16}}}};
}

fs::path write_config(const fs::path& dir, const json& cfg) {
    const auto path = dir / "config.json";
    lens::test::write_file(path, cfg.dump(1));
    return path;
}

json load(const fs::path& p) { return json::parse(lens::test::read_file(p)); }

std::vector<fs::path> files_with_prefix(const fs::path& dir, const std::string& prefix) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().filename().string().rfind(prefix, 0) == 0) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Artifacts whose bytes must not change across reruns (timing.json holds wall-clock values).
std::vector<std::string> deterministic_artifacts(const fs::path& dir) {
    std::vector<std::string> names{"preprocessor.json", "vae.json",          "teacher.json",       "student.json",
                                   "metrics_teacher.json", "metrics_student.json", "metrics_teacher.csv",
                                   "metrics_student.csv",  "confusion_teacher.csv", "confusion_student.csv"};
    for (const auto& prefix : {"attribution_", "waterfall_"}) {
        for (const auto& p : files_with_prefix(dir, prefix)) names.push_back(p.filename().string());
    }
    return names;
}

void check_attribution(const json& a) {
    double running = a.at("baseline").get<double>();
    for (const auto& c : a.at("contributions")) running += c.at("value").get<double>();
    CHECK(std::abs(running - a.at("final_prediction").get<double>()) < 1e-9);
    CHECK(a.at("local_accuracy_error").get<double>() < 1e-9);
    // the attributed quantity is the model's own probability for the target
    CHECK(a.at("final_prediction").get<double>() == a.at("model_probability").get<double>());
}

}  // namespace

TEST_CASE("run on the bundled config emits every artifact") {
    const auto dir = lens::test::scratch_dir("cli_smoke");
    const auto start = std::chrono::steady_clock::now();
    const int rc = lens_cli("run --config " + quote(kSource / "configs/synthetic.json") + " --out " + quote(dir / "out"),
                            dir / "log.txt");
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    INFO(lens::test::read_file(dir / "log.txt"));
    REQUIRE(rc == 0);
    CHECK(seconds < 60.0);
    const auto out = dir / "out";
    for (const char* name : {"preprocessor.json", "vae.json", "teacher.json", "student.json", "metrics_teacher.json",
                             "metrics_student.json", "timing.json", "report.md", "class_distribution.csv"}) {
        CHECK_MESSAGE(fs::exists(out / name), name);
    }
    const auto attributions = files_with_prefix(out, "attribution_");
    CHECK(attributions.size() == 2);
    CHECK(files_with_prefix(out, "waterfall_").size() == 2);
    for (const auto& e : fs::directory_iterator(out)) {
        CHECK_MESSAGE(e.path().extension() != ".partial", e.path().string());
        if (e.path().extension() != ".json") continue;
        const auto j = load(e.path());
        CHECK_MESSAGE(j.contains("config"), e.path().string());
        CHECK(j.at("seed") == 42);
        CHECK_FALSE(j.at("config").contains("out"));
    }
    for (const auto& p : attributions) check_attribution(load(p));
    const auto metrics = load(out / "metrics_teacher.json");
    CHECK(metrics.at("metrics").at("accuracy").get<double>() >= 0.9);
}

TEST_CASE("two runs with one seed give byte-identical artifacts") {
    const auto dir = lens::test::scratch_dir("cli_determinism");
    const auto cfg = write_config(dir, quick_config());
    REQUIRE(lens_cli("run --config " + quote(cfg) + " --out " + quote(dir / "a"), dir / "a.log") == 0);
    REQUIRE(lens_cli("run --config " + quote(cfg) + " --out " + quote(dir / "b"), dir / "b.log") == 0);
    const auto names = deterministic_artifacts(dir / "a");
    CHECK(names.size() == 14);
    for (const auto& n : names) {
        CHECK_MESSAGE(lens::test::read_file(dir / "a" / n) == lens::test::read_file(dir / "b" / n), n);
    }

    REQUIRE(lens_cli("run --config " + quote(cfg) + " --seed 6 --out " + quote(dir / "c"), dir / "c.log") == 0);
    CHECK(lens::test::read_file(dir / "a/vae.json") != lens::test::read_file(dir / "c/vae.json"));
    CHECK(load(dir / "c/metrics_student.json").at("seed") == 6);
}

TEST_CASE("later stages rerun from stored upstream artifacts reproduce their outputs") {
    const auto dir = lens::test::scratch_dir("cli_stages");
    const auto cfg = write_config(dir, quick_config());
    const std::string common = " --config " + quote(cfg) + " --out " + quote(dir / "out");
    REQUIRE(lens_cli("run" + common, dir / "run.log") == 0);
    const auto names = deterministic_artifacts(dir / "out");
    std::vector<std::string> before;
    for (const auto& n : names) before.push_back(lens::test::read_file(dir / "out" / n));

    for (const char* n : {"teacher.json", "student.json", "metrics_teacher.json", "metrics_student.json"}) {
        fs::remove(dir / "out" / n);
    }
    for (const auto& p : files_with_prefix(dir / "out", "attribution_")) fs::remove(p);
    for (const char* stage : {"train-teacher", "distill", "evaluate", "explain"}) {
        INFO(stage);
        REQUIRE(lens_cli(std::string(stage) + common, dir / "stage.log") == 0);
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
        CHECK_MESSAGE(lens::test::read_file(dir / "out" / names[i]) == before[i], names[i]);
    }

    // evaluating again from the reloaded models gives the stored metrics
    const auto stored = load(dir / "out/metrics_student.json");
    REQUIRE(lens_cli("evaluate" + common, dir / "eval.log") == 0);
    CHECK(load(dir / "out/metrics_student.json") == stored);
}

TEST_CASE("tampered or missing upstream artifacts are data errors") {
    const auto dir = lens::test::scratch_dir("cli_hashes");
    const auto cfg = write_config(dir, quick_config());
    const std::string common = " --config " + quote(cfg) + " --out " + quote(dir / "out");
    const auto log = dir / "log.txt";

    CHECK(lens_cli("train-vae" + common, log) == 2);
    CHECK(lens::test::read_file(log).find("run `preprocess` first") != std::string::npos);

    REQUIRE(lens_cli("run" + common, log) == 0);
    CHECK(lens_cli("evaluate" + common, log) == 0);

    // change one VAE weight: every downstream consumer must refuse
    auto vae = load(dir / "out/vae.json");
    auto& w = vae["model"]["decoder"]["layers"][0]["weight"][0];
    w = w.get<double>() + 0.5;
    const auto original = lens::test::read_file(dir / "out/vae.json");
    lens::test::write_file(dir / "out/vae.json", vae.dump(1));
    CHECK(lens_cli("evaluate" + common, log) == 2);
    CHECK(lens::test::read_file(log).find("hash mismatch") != std::string::npos);
    CHECK(lens_cli("explain" + common, log) == 2);
    lens::test::write_file(dir / "out/vae.json", original);
    CHECK(lens_cli("evaluate" + common, log) == 0);

    // preprocessor state that no longer matches its fingerprint
    auto pre = load(dir / "out/preprocessor.json");
    pre["fingerprint"] = "0000000000000000";
    lens::test::write_file(dir / "out/preprocessor.json", pre.dump(1));
    CHECK(lens_cli("train-vae" + common, log) == 2);
}

TEST_CASE("usage errors exit with status 1") {
    const auto dir = lens::test::scratch_dir("cli_usage");
    const auto cfg = write_config(dir, quick_config());
    const auto log = dir / "log.txt";
    const std::string common = " --config " + quote(cfg) + " --out " + quote(dir / "out");
    CHECK(lens_cli("run --config " + quote(dir / "absent.json"), log) == 1);
    CHECK(lens_cli("run", log) == 1);
    CHECK(lens_cli("frobnicate" + common, log) == 1);
    CHECK(lens_cli("run --latent --raw" + common, log) == 1);
    CHECK(lens_cli("preprocess --train-fraction 1.5" + common, log) == 1);
    CHECK(lens_cli("--help", log) == 0);

    REQUIRE(lens_cli("run" + common, log) == 0);
    // two classes, so index 2 names no class
    CHECK(lens_cli("explain --target-class 2" + common, log) == 1);
    CHECK(lens_cli("explain --target-class nonesuch" + common, log) == 1);
    CHECK(lens_cli("explain --target-class 1" + common, log) == 0);
    for (const auto& p : files_with_prefix(dir / "out", "attribution_")) {
        if (p.filename().string().find("_attack") == std::string::npos) continue;
        const auto a = load(p);
        CHECK(a.at("target_class") == 1);
        check_attribution(a);
    }

    auto bad = quick_config();
    bad["explain"]["space"] = "latent";
    bad["features"] = "raw";
    const auto bad_path = dir / "bad.json";
    lens::test::write_file(bad_path, bad.dump());
    CHECK(lens_cli("preprocess --config " + quote(bad_path) + " --out " + quote(dir / "bad"), log) == 1);
    lens::test::write_file(bad_path, "{ not json");
    CHECK(lens_cli("preprocess --config " + quote(bad_path), log) == 1);
}

TEST_CASE("attribution edge cases through the CLI") {
    const auto dir = lens::test::scratch_dir("cli_attribution");
    auto cfg = quick_config();
    cfg["explain"]["background_size"] = 1;
    const auto path = write_config(dir, cfg);
    const std::string common = " --config " + quote(path) + " --out " + quote(dir / "out");
    REQUIRE(lens_cli("run" + common, dir / "log.txt") == 0);
    for (const auto& p : files_with_prefix(dir / "out", "attribution_")) {
        const auto a = load(p);
        CHECK(a.at("background_rows") == 1);
        check_attribution(a);
    }

    // latent-space attribution and the raw-feature route
    REQUIRE(lens_cli("run --raw --out " + quote(dir / "raw") + " --config " + quote(path), dir / "log.txt") == 0);
    CHECK_FALSE(fs::exists(dir / "raw/vae.json"));
    const auto raw_attr = files_with_prefix(dir / "raw", "attribution_");
    REQUIRE_FALSE(raw_attr.empty());
    CHECK(load(raw_attr[0]).at("contributions").size() == 10);  // 6 numeric, 3 one-hot, 1 ordinal

    cfg["explain"]["space"] = "latent";
    write_config(dir, cfg);
    REQUIRE(lens_cli("explain" + common, dir / "log.txt") == 0);
    for (const auto& p : files_with_prefix(dir / "out", "attribution_")) {
        const auto a = load(p);
        CHECK(a.at("space") == "latent");
        CHECK(a.at("contributions").size() == 3);
        check_attribution(a);
    }
}

TEST_CASE("class resolution") {
    using lens::pipeline::resolve_class;
    const std::vector<std::string> names{"normal", "attack", "3"};
    CHECK(resolve_class("attack", names) == 1);
    CHECK(resolve_class("0", names) == 0);
    CHECK(resolve_class("3", names) == 2);  // a name wins over an index
    CHECK_THROWS_AS(resolve_class("4", names), lens::UsageError);
    CHECK_THROWS_AS(resolve_class("", names), lens::UsageError);
    CHECK_THROWS_AS(resolve_class("-1", names), lens::UsageError);
    CHECK_THROWS_AS(resolve_class("1x", names), lens::UsageError);
}

TEST_CASE("config parsing, defaults and seed derivation") {
    using namespace lens::pipeline;
    const auto c = config_from_json(json::object(), "/base");
    CHECK(c.train_fraction == 0.10);
    CHECK(c.stratified);
    CHECK(c.seed == 42);
    CHECK(c.teacher.hidden == std::vector<std::size_t>{128, 64});
    CHECK(c.student.hidden == std::vector<std::size_t>{64, 32});
    CHECK(c.features == FeatureSource::latent);
    CHECK(c.background_size == 1000);
    CHECK(c.vae_train.seed == 43);
    CHECK(c.distill.teacher_cfg.seed == 44);
    CHECK(c.distill.student_cfg.seed == 45);
    CHECK(c.background_seed() == 46);
    CHECK_THROWS_AS(c.validate(), lens::UsageError);  // no data

    const json j{{"data", {"a.csv", "/abs/b.csv"}},
                 {"schema", "s.json"},
                 {"seed", 9},
                 {"vae", {{"train", {{"seed", 1000}}}}},
                 {"explain", {{"target_class", 1}, {"model", "teacher"}}},
                 {"out", "o"}};
    const auto d = config_from_json(j, "/base");
    CHECK(d.data == std::vector<fs::path>{"/base/a.csv", "/abs/b.csv"});
    CHECK(d.schema == fs::path("/base/s.json"));
    CHECK(d.out_dir == fs::path("/base/o"));
    CHECK(d.vae_train.seed == 10);  // derived from the master seed
    CHECK(d.target_class == std::optional<std::string>("1"));
    CHECK(d.explain_teacher);
    CHECK_FALSE(to_json(d).contains("out"));
    CHECK(config_from_json(to_json(d), "/elsewhere").data == d.data);

    CHECK_THROWS_AS(config_from_json(json{{"features", "pixels"}}, "/"), lens::UsageError);
    CHECK_THROWS_AS(config_from_json(json{{"explain", {{"space", "output"}}}}, "/"), lens::UsageError);
    CHECK_THROWS_AS(config_from_json(json{{"explain", {{"model", "oracle"}}}}, "/"), lens::UsageError);
}

TEST_CASE("artifacts are written whole") {
    const auto dir = lens::test::scratch_dir("cli_write");
    lens::pipeline::write_artifact(dir / "a.json", "{\"k\": 1}");
    CHECK(lens::pipeline::read_json(dir / "a.json").at("k") == 1);
    CHECK_FALSE(fs::exists(dir / "a.json.partial"));
    lens::pipeline::write_artifact(dir / "a.json", "{\"k\": 2}");
    CHECK(lens::pipeline::read_json(dir / "a.json").at("k") == 2);
}

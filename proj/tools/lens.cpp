// SPDX-License-Identifier: Apache-2.0
// lens: staged intrusion-detection pipeline driver.
//
//   lens <stage> --config cfg.json [--seed N] [--out DIR] [--train-fraction F]
//                [--target-class NAME|INDEX] [--latent | --raw]
//
// Flags override values from the config file. Exit status: 0 success,
// 1 usage error, 2 data error, 3 numeric divergence.

#include <cstdint>
#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "lens/error.hpp"
#include "lens/pipeline.hpp"

namespace {

constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kNumeric = 3;

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<double> train_fraction;
    std::optional<std::string> target_class;
    bool latent = false;
    bool raw = false;
};

lens::pipeline::PipelineConfig build_config(const Overrides& o) {
    auto cfg = lens::pipeline::load_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (o.out) cfg.out_dir = *o.out;
    if (o.train_fraction) cfg.train_fraction = *o.train_fraction;
    if (o.target_class) cfg.target_class = *o.target_class;
    if (o.latent) cfg.features = lens::pipeline::FeatureSource::latent;
    if (o.raw) cfg.features = lens::pipeline::FeatureSource::raw;
    cfg.derive_seeds();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Train, distill, evaluate and explain tabular intrusion detectors."};
    app.fallthrough();
    app.require_subcommand(1);

    Overrides o;
    app.add_option("--config", o.config, "Pipeline config (JSON)")->required()->check(CLI::ExistingFile);
    app.add_option("--seed", o.seed, "Master seed");
    app.add_option("--out", o.out, "Output directory");
    app.add_option("--train-fraction", o.train_fraction, "Training share of retained rows, in (0, 1)");
    app.add_option("--target-class", o.target_class, "Class to explain, by name or index");
    auto* latent = app.add_flag("--latent", o.latent, "Classify VAE latent codes (default)");
    auto* raw = app.add_flag("--raw", o.raw, "Classify preprocessed features directly");
    latent->excludes(raw);

    using Stage = std::function<void(const lens::pipeline::PipelineConfig&)>;
    const std::map<std::string, std::pair<Stage, std::string>> stages{
        {"preprocess", {lens::pipeline::preprocess, "Fit the preprocessor and split the data"}},
        {"train-vae", {lens::pipeline::train_vae, "Train the variational autoencoder"}},
        {"train-teacher", {lens::pipeline::train_teacher, "Train the teacher classifier"}},
        {"distill", {lens::pipeline::distill, "Train the student against the teacher"}},
        {"evaluate", {lens::pipeline::evaluate, "Score both classifiers on the test split"}},
        {"explain", {lens::pipeline::explain, "Break-down attribution for selected test rows"}},
        {"report", {lens::pipeline::report, "Summarize artifacts in report.md"}},
        {"run", {lens::pipeline::run, "All stages in order"}},
    };
    Stage selected;
    for (const auto& [name, entry] : stages) {
        app.add_subcommand(name, entry.second)->callback([&selected, fn = entry.first] { selected = fn; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        selected(build_config(o));
    } catch (const lens::UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const lens::NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumeric;
    } catch (const lens::DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
    return 0;
}

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lens/datapipe.hpp"
#include "lens/distill.hpp"
#include "lens/nncore.hpp"
#include "lens/vae.hpp"

namespace lens::pipeline {

namespace fs = std::filesystem;

enum class FeatureSource { latent, raw };
enum class AttributionSpace { input, latent };

struct PipelineConfig {
    std::vector<fs::path> data;  // one or more CSV files sharing the schema
    fs::path schema;
    data::PreprocessPolicy policy;
    double train_fraction = 0.10;
    bool stratified = true;
    std::uint64_t seed = 42;

    nn::VaeSpec vae;
    nn::TrainConfig vae_train;
    distill::ClassifierSpec teacher{{128, 64}};
    distill::ClassifierSpec student{{64, 32}};
    distill::DistillConfig distill;  // T, alpha and the teacher/student TrainConfigs

    FeatureSource features = FeatureSource::latent;

    std::size_t background_size = 1000;
    std::vector<std::size_t> explain_rows{0};  // positions in the test split
    std::optional<std::string> target_class;   // name or index; predicted class when absent
    AttributionSpace space = AttributionSpace::input;
    bool explain_teacher = false;

    std::size_t timing_repeats = 7;
    std::size_t timing_batch = 64;

    fs::path out_dir = "lens_out";

    /// Per-stage seeds derived from `seed`: split +0, vae +1, teacher +2,
    /// student +3, background +4.
    std::uint64_t split_seed() const noexcept { return seed; }
    std::uint64_t background_seed() const noexcept { return seed + 4; }
    void derive_seeds();

    void validate() const;
};

/// Parses a config document. Relative data/schema paths are resolved against
/// `base_dir`.
PipelineConfig config_from_json(const nlohmann::json& j, const fs::path& base_dir);
PipelineConfig load_config(const fs::path& path);
/// Everything that affects results. The output directory is left out.
nlohmann::json to_json(const PipelineConfig& cfg);

// Stages. Each reads its inputs from cfg.out_dir and writes its artifacts
// there. Errors keep their type and gain a "<stage>: " prefix.
void preprocess(const PipelineConfig& cfg);
void train_vae(const PipelineConfig& cfg);
void train_teacher(const PipelineConfig& cfg);
void distill(const PipelineConfig& cfg);
void evaluate(const PipelineConfig& cfg);
void explain(const PipelineConfig& cfg);
void report(const PipelineConfig& cfg);
void run(const PipelineConfig& cfg);

/// Resolves a class given by name or decimal index. Throws UsageError when it
/// names no class.
std::size_t resolve_class(const std::string& spec, const std::vector<std::string>& class_names);

/// Writes `text` to `path` via a ".partial" sibling and a rename, so a file
/// under the final name is always complete.
void write_artifact(const fs::path& path, const std::string& text);
nlohmann::json read_json(const fs::path& path);

}  // namespace lens::pipeline

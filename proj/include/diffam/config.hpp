#pragma once

// Experiment configuration: a sectioned key = value file.
//
//   [data]       sources, masks, reference, reference_mask, reference_clean,
//                target, impostors, denoiser_data
//   [models]     denoiser_sharing, image_encoder, text_encoder, identity,
//                ensemble (comma list), eval_embedder, perceptual, fid_features
//   [diffusion]  t0, s_inv, s_sam, t_full, beta_start, beta_end
//   [train]      epochs, base_lr, lr_step, lr_slope, lr_mode, adam_*, norm_epsilon,
//                prompt_clean, prompt_makeup
//   [weights]    removal, identity, lpips, makeup, direction, pixel, adversarial, visual, l1
//   [eval]       far, max_impostor_pairs, model_name
//   [api]        endpoint, rate_limit, concurrency, timeout
//   [run]        seed, out
//
// Relative paths resolve against the directory holding the config file.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "diffam/pipeline.hpp"

namespace diffam {

namespace fs = std::filesystem;

struct DataPaths {
    fs::path sources;
    fs::path masks;
    fs::path reference;
    fs::path reference_mask;   // defaults to <masks>/<reference stem>.mask.png
    fs::path reference_clean;  // empty: run makeup removal first
    fs::path target;
    fs::path impostors;
    fs::path denoiser_data;
};

struct ModelNames {
    std::string denoiser_sharing = "per_pixel";
    std::string image_encoder = "toy-linear-64";
    std::string text_encoder = "toy-hash-64";
    std::string identity = "toy-face-0";
    std::vector<std::string> ensemble = {"toy-face-1", "toy-face-2", "toy-face-3"};
    std::string eval_embedder = "toy-face-4";
    std::string perceptual = "toy-conv";
    std::string fid_features = "toy-linear-64";
};

struct ScheduleSettings {
    int t_full = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
};

struct EvalSettings {
    double far = 0.01;
    int max_impostor_pairs = 10000;
    std::string model_name = "toy-face-4";
};

struct ApiSettings {
    std::string endpoint;  // FACECOMPARE_ENDPOINT when empty
    double rate_limit = 10.0;
    int concurrency = 4;
    double timeout = 10.0;
};

struct ExperimentConfig {
    DataPaths data;
    ModelNames models;
    ScheduleSettings schedule;
    FineTuneConfig train;
    EvalSettings eval;
    ApiSettings api;
    fs::path out = "runs/default";
};

struct ConfigOverrides {
    std::optional<int> t0;
    std::optional<int> s_inv;
    std::optional<int> s_sam;
    std::optional<double> lambda_dir;
    std::optional<std::uint64_t> seed;
    std::optional<fs::path> out;
};

ExperimentConfig load_config(const fs::path& path);
ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir);
void apply_overrides(ExperimentConfig& cfg, const ConfigOverrides& overrides);

/// Sorted `key = value` lines grouped by section.
std::string canonical_config(const ExperimentConfig& cfg);
/// SHA-256 (hex) of the canonical form with [run] out removed.
std::string config_hash(const ExperimentConfig& cfg);
std::string sha256_hex(const std::string& bytes);

void validate_config(const ExperimentConfig& cfg);

}  // namespace diffam

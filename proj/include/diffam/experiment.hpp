#pragma once

// Dataset layout, model construction and the command implementations behind
// the CLI. Every command writes into cfg.out and returns its manifest.
//
// Layout:  <dir>/*.png                 images (sorted by file name)
//          <masks>/<stem>.mask.png     region labels
//          <root>/images/*.png + <root>/identities.tsv   impostor dataset

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "diffam/config.hpp"
#include "diffam/denoiser.hpp"

namespace diffam {

using json = nlohmann::json;

struct NamedImage {
    std::string stem;
    fs::path path;
    ImageBuffer image;
};

/// PNG files in dir, excluding *.mask.png, sorted by file name.
std::vector<NamedImage> load_image_dir(const fs::path& dir);

/// <masks>/<stem>.mask.png checked against the image shape; ConfigError naming
/// the file when it is missing.
RegionMasks load_mask_for(const fs::path& masks_dir, const NamedImage& img);

struct IdentityDataset {
    std::vector<NamedImage> images;
    std::vector<int> labels;
};

/// <root>/images plus <root>/identities.tsv (stem<TAB>identity per line).
IdentityDataset load_identity_dataset(const fs::path& root);
void write_identity_tsv(const fs::path& path, const std::vector<std::string>& stems, const std::vector<int>& labels);

struct ModelBundle {
    std::unique_ptr<GaussianDenoiser> denoiser;
    JointEncoders clip;
    std::shared_ptr<const FaceEmbedder> identity;
    Ensemble ensemble;
    std::shared_ptr<const FaceEmbedder> evaluator;
    std::shared_ptr<const PerceptualExtractor> perceptual;
    std::shared_ptr<const ImageEncoder> fid_features;
};

NoiseSchedule schedule_for(const ExperimentConfig& cfg);
/// Toy denoiser fitted to data.denoiser_data; encoders from the registry seeded with run.seed.
ModelBundle build_models(const ExperimentConfig& cfg);

json log_record_json(const LogRecord& r);
json artifacts_json(const StageArtifacts& a, const Denoiser& frozen);
StageArtifacts artifacts_from_json(const json& j, const Denoiser& frozen);

/// Writes dump() plus a trailing newline.
void write_json(const fs::path& path, const json& j);
json read_json(const fs::path& path);

json run_remove_makeup(const ExperimentConfig& cfg);
json run_transfer(const ExperimentConfig& cfg);
json run_protect(const ExperimentConfig& cfg, const fs::path& artifacts, const std::vector<fs::path>& inputs);
json run_calibrate(const ExperimentConfig& cfg);
json run_evaluate(const ExperimentConfig& cfg, const fs::path& manifest, const fs::path& threshold = {});
/// Protected outputs of a transfer manifest against the target through a
/// face-compare service; endpoint/key fall back to the config and environment.
json run_compare_api(const ExperimentConfig& cfg, const fs::path& manifest, const std::string& endpoint = {},
                     const std::string& api_key = {});

/// Writes a deterministic toy dataset and a matching config.ini under root.
fs::path write_synthetic_dataset(const fs::path& root, std::uint64_t seed, int n_sources = 8);

}  // namespace diffam

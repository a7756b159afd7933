#pragma once

// The two fine-tuning stages and the protect entry point.
//
// Both stages compute latents once with the frozen denoiser (DDIM inversion
// over s_inv steps), then fine-tune a trainable copy through the s_sam-step
// DDIM sampling chain with Adam.

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "diffam/ddim.hpp"
#include "diffam/encoders.hpp"
#include "diffam/losses.hpp"
#include "diffam/regions.hpp"

namespace diffam {

enum class LrMode {
    additive,        // base * (1 + slope * k)
    multiplicative,  // base * (1 + slope)^k
};

struct DiffusionSettings {
    int t0 = 60;
    int s_inv = 20;
    int s_sam = 6;

    bool operator==(const DiffusionSettings&) const = default;
};

struct FineTuneConfig {
    DiffusionSettings diffusion;
    int epochs = 6;
    double base_lr = 4e-6;
    int lr_step = 50;
    double lr_slope = 0.2;
    LrMode lr_mode = LrMode::additive;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    /// Added inside direction norms during training only.
    double norm_epsilon = 1e-8;
    LossWeights weights;
    std::uint64_t seed = 0;
    std::string prompt_clean = "face without makeup";
    std::string prompt_makeup = "face with makeup";

    void validate(int t_full) const;
};

/// Learning rate at a zero-based iteration; k = floor(iter / lr_step).
double lr_at(int iter, const FineTuneConfig& cfg);

class Adam {
public:
    Adam(Eigen::Index size, double beta1, double beta2, double epsilon);

    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);
    int steps() const { return steps_; }

private:
    double beta1_;
    double beta2_;
    double epsilon_;
    int steps_ = 0;
    Eigen::VectorXd m_;
    Eigen::VectorXd v_;
};

struct LogRecord {
    std::string stage;
    std::string tag;
    int iter = 0;
    int epoch = 0;
    int image = 0;
    double lr = 0.0;
    double total = 0.0;
    std::vector<std::pair<std::string, double>> terms;
    std::vector<std::pair<std::string, double>> cosines;
    std::vector<std::string> warnings;
};

using LogSink = std::function<void(const LogRecord&)>;

struct StageArtifacts {
    std::string stage;
    std::string tag;
    DiffusionSettings settings;
    Eigen::VectorXd parameters;
    std::vector<ImageBuffer> latents;
    std::vector<ImageBuffer> outputs;
    /// Stage 1 only: E_I(y) - E_I(y_hat) per reference.
    std::vector<EmbeddingVector> reference_directions;
    std::vector<LogRecord> log;
};

struct RemovalModels {
    JointEncoders clip;
    std::shared_ptr<const FaceEmbedder> identity;
    std::shared_ptr<const PerceptualExtractor> perceptual;
};

struct TransferModels {
    JointEncoders clip;
    Ensemble ensemble;
    std::shared_ptr<const PerceptualExtractor> perceptual;
};

struct TransferInputs {
    std::vector<ImageBuffer> sources;
    std::vector<RegionMasks> source_masks;
    ImageBuffer reference;
    RegionMasks reference_mask = RegionMasks::background(1, 1);
    ImageBuffer reference_clean;
    ImageBuffer target;
};

/// "full" or "wo-dir" (makeup direction loss disabled), suffixed with t0.
std::string experiment_tag(const FineTuneConfig& cfg);

/// Clamp to [-1, 1]; returns the number of clamped values.
Eigen::Index clamp_unit(ImageBuffer& img);

/// Frozen invert (s_inv) then frozen sample (s_sam).
ImageBuffer reconstruct(const ImageBuffer& x, const Denoiser& frozen, const DiffusionSettings& settings);

StageArtifacts run_makeup_removal(const std::vector<ImageBuffer>& references, const Denoiser& frozen,
                                  const RemovalModels& models, const FineTuneConfig& cfg, const LogSink& sink = {});

StageArtifacts run_adversarial_transfer(const TransferInputs& inputs, const Denoiser& frozen,
                                        const TransferModels& models, const FineTuneConfig& cfg,
                                        const LogSink& sink = {});

struct ProtectedImage {
    ImageBuffer image;
    Eigen::Index clamped = 0;
};

/// Invert with the frozen denoiser, sample with the tuned parameters.
ProtectedImage protect(const ImageBuffer& x, const StageArtifacts& artifacts, const Denoiser& frozen,
                       const FineTuneConfig& cfg);

}  // namespace diffam

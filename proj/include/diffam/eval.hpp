#pragma once

#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "diffam/encoders.hpp"

namespace diffam {

struct VerificationThreshold {
    double tau = 0.0;
    double far = 0.0;
    int n_impostor_pairs = 0;
    /// No impostor score could be accepted at this FAR; tau sits above the max.
    bool saturated = false;
};

inline constexpr double tie_epsilon = 1e-9;

/// Smallest impostor score tau with |{s >= tau}| / N <= far. When no score
/// qualifies, tau = max + tie_epsilon and the result is flagged saturated.
VerificationThreshold calibrate_threshold(const std::vector<double>& impostor_scores, double far);

struct AttackSuccess {
    double rate = 0.0;
    std::vector<double> scores;  // cos(emb(x'), emb(target)) per image
};

/// Fraction of protected images with cos(emb(x'), emb(target)) > tau.
AttackSuccess attack_success_rate(const std::vector<ImageBuffer>& protected_images, const ImageBuffer& target,
                                  const FaceEmbedder& emb, const VerificationThreshold& threshold);

/// Fraction of precomputed scores strictly above tau.
double acceptance_rate(const std::vector<double>& scores, double tau);

/// 10 log10(R^2 / MSE) with R = 2; +infinity for identical images.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, dynamic range 2, valid windows only, averaged over channels.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

/// Frechet distance between Gaussians fitted to two feature sets.
double fid(const std::vector<EmbeddingVector>& feats_a, const std::vector<EmbeddingVector>& feats_b);

/// Cross-identity index pairs (i < j, labels differ), seeded subsample when
/// more than max_pairs exist.
std::vector<std::pair<int, int>> impostor_pairs(const std::vector<int>& labels, std::size_t max_pairs,
                                                std::uint64_t seed);

std::vector<double> impostor_scores(const std::vector<ImageBuffer>& images, const std::vector<int>& labels,
                                    const FaceEmbedder& emb, std::size_t max_pairs, std::uint64_t seed);

}  // namespace diffam
